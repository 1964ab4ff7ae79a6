#ifndef AUTOTM_PIPELINE_H_
#define AUTOTM_PIPELINE_H_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autotm/artm.h"
#include "autotm/corpus.h"
#include "autotm/random.h"

namespace autotm {

// Parameter box of the search space.
struct ParamBounds {
  int min_iters = 1;
  int max_iters = 50;
  double smoothing_max = 10.0;    // smoothing a, b in [0, smoothing_max]
  double sparsing_min = -10.0;    // sparsing a, b in [sparsing_min, 0]
  double decorrelation_max = 1e5;  // decorrelation a in [0, decorrelation_max]
  // Lower edge of the log-uniform decorrelation draw.
  double decorrelation_log_min = 1e-3;
  int per_kind_cap = 10;
  int total_cap = 30;

  double lower(RegKind kind) const;
  double upper(RegKind kind) const;
};

const ParamBounds& DefaultBounds();

// One training cycle: `n_iters` EM passes with a single regularizer. The
// target group is implied by the kind (smoothing -> background topics,
// sparsing and decorrelation -> specific topics).
struct Stage {
  RegKind kind = RegKind::kSmoothing;
  int n_iters = 1;
  double a = 0.0;  // Phi strength
  double b = 0.0;  // Theta strength (recorded but inert for decorrelation)

  TopicGroup target() const;
  RegularizerSpec ToRegularizer() const;
  bool operator==(const Stage&) const = default;
};

struct GraphPipeline {
  std::vector<Stage> stages;
  bool operator==(const GraphPipeline&) const = default;
  int size() const { return static_cast<int>(stages.size()); }
  int CountKind(RegKind kind) const;
};

struct Violation {
  int stage = -1;  // -1 for pipeline-level violations
  std::string field;
  std::string message;
};

std::vector<Violation> Validate(const GraphPipeline& pipeline,
                                const ParamBounds& bounds = DefaultBounds());
std::string FormatViolations(const std::vector<Violation>& violations);
// Throws InvalidPipeline listing every violation.
void ValidateOrThrow(const GraphPipeline& pipeline,
                     const ParamBounds& bounds = DefaultBounds());

Stage RandomStage(Rng& rng, RegKind kind, const ParamBounds& bounds = DefaultBounds());
// Kinds are drawn uniformly among those still below the per-kind cap.
RegKind RandomKind(Rng& rng, const GraphPipeline& pipeline,
                   const ParamBounds& bounds = DefaultBounds());
GraphPipeline RandomPipeline(Rng& rng, int min_len, int max_len,
                             const ParamBounds& bounds = DefaultBounds());

// Fixed-size baseline genome: four stages in the order smoothing,
// decorrelation, decorrelation, sparsing; slot 3*i holds n_iters (0 skips the
// stage), 3*i+1 holds a and 3*i+2 holds b.
struct FixedGenome {
  static constexpr int kStages = 4;
  static constexpr int kSlots = 12;
  static constexpr std::array<RegKind, kStages> kKinds = {
      RegKind::kSmoothing, RegKind::kDecorrelation, RegKind::kDecorrelation,
      RegKind::kSparsing};

  std::array<double, kSlots> slots{};
  bool operator==(const FixedGenome&) const = default;

  static double SlotLower(int slot, const ParamBounds& bounds = DefaultBounds());
  static double SlotUpper(int slot, const ParamBounds& bounds = DefaultBounds());
  static FixedGenome Random(Rng& rng, const ParamBounds& bounds = DefaultBounds());
  void Clamp(const ParamBounds& bounds = DefaultBounds());
};

// Throws InvalidPipeline (EmptyPipeline) when every stage rounds to zero passes.
GraphPipeline FixedToPipeline(const FixedGenome& genome);

constexpr int kSurrogateVectorLength = 90;

// Layout: kind block (smoothing, sparsing, decorrelation) x slot 0..9 x
// (n_iters, a, b). Stages of a kind fill that kind's slots in pipeline order;
// unused slots are zero.
std::vector<double> ToSurrogateVector(const GraphPipeline& pipeline);

nlohmann::json PipelineToJson(const GraphPipeline& pipeline);
GraphPipeline PipelineFromJson(const nlohmann::json& j);
std::string SerializePipeline(const GraphPipeline& pipeline);
GraphPipeline ParsePipeline(const std::string& text);

// The four-stage example: smoothing(6), decorrelation(28), decorrelation(30),
// sparsing(2). Strengths are representative values.
GraphPipeline ExamplePipeline();

using FitnessFn = std::function<double(const TopicModel&)>;

struct ExecuteOptions {
  TrainOptions train;
};

struct ExecutionResult {
  TopicModel model;
  double fitness = 0.0;
  double seconds = 0.0;
  int em_passes = 0;
};

// init -> each stage in order -> fitness. Stage failures are rethrown as
// Error("StageFailed") naming the stage.
ExecutionResult Execute(const GraphPipeline& pipeline, const Corpus& corpus, int num_topics,
                        int num_background, uint64_t seed, const FitnessFn& fitness,
                        const ExecuteOptions& options = {});

}  // namespace autotm

#endif  // AUTOTM_PIPELINE_H_
