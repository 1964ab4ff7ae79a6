#ifndef AUTOTM_EVOLUTION_H_
#define AUTOTM_EVOLUTION_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "autotm/evaluator.h"
#include "autotm/pipeline.h"
#include "autotm/surrogate.h"

namespace autotm {

enum class Representation { kGraph, kFixed };

std::string RepresentationName(Representation r);
Representation ParseRepresentation(const std::string& name);

// ---------------------------------------------------------------------------
// Operators. Each reports whether it degenerated to the identity.

struct MutationResult {
  GraphPipeline pipeline;
  bool identity = false;
};

MutationResult MutateAddStage(const GraphPipeline& p, Rng& rng,
                              const ParamBounds& bounds = DefaultBounds());
MutationResult MutateRemoveStage(const GraphPipeline& p, Rng& rng);
MutationResult MutateSwapStages(const GraphPipeline& p, Rng& rng);
// Perturbs one uniformly chosen stage. `sigma` is a fraction of each
// parameter's range; decorrelation strengths move in log10 space.
MutationResult MutateStageParams(const GraphPipeline& p, Rng& rng, double sigma,
                                 const ParamBounds& bounds = DefaultBounds());

struct CrossoverResult {
  GraphPipeline child1;
  GraphPipeline child2;
  int cut1 = 0;
  int cut2 = 0;
  bool repaired = false;          // a cap repair fired on either child
  bool returned_parents = false;  // both children would have been empty
};

// child1 = p1[0, x1) ++ p2[x2, len2), child2 = p2[0, x2) ++ p1[x1, len1).
CrossoverResult CrossoverAt(const GraphPipeline& p1, const GraphPipeline& p2, int x1, int x2,
                            const ParamBounds& bounds = DefaultBounds());
CrossoverResult Crossover(const GraphPipeline& p1, const GraphPipeline& p2, Rng& rng,
                          const ParamBounds& bounds = DefaultBounds());

// Drops trailing stages of over-cap kinds, then trailing stages past the total
// cap. Returns true when anything was removed.
bool RepairCaps(GraphPipeline& p, const ParamBounds& bounds = DefaultBounds());

// Gaussian perturbation of each slot with probability `slot_prob`; values are
// clamped to the slot box.
FixedGenome MutateFixed(const FixedGenome& g, Rng& rng, double sigma, double slot_prob);
// One-point crossover at a stage boundary.
std::pair<FixedGenome, FixedGenome> CrossoverFixed(const FixedGenome& a, const FixedGenome& b,
                                                   Rng& rng);

// Maps between a slot value and the [0, 1] search coordinate (log10 for
// decorrelation strengths).
double FixedSlotToUnit(int slot, double value);
double FixedSlotFromUnit(int slot, double unit);

// ---------------------------------------------------------------------------

using Genome = std::variant<GraphPipeline, FixedGenome>;

// Pipeline the genome trains. A fixed genome whose stages all round to zero
// passes yields an empty (invalid) pipeline.
GraphPipeline GenomePipeline(const Genome& genome);

struct Individual {
  Genome genome;
  std::optional<double> fitness;
  FitnessSource source = FitnessSource::kTrueEval;
  uint64_t eval_seed = 0;
  std::string error;  // set when the true evaluation failed
};

struct MutationProbs {
  double add = 0.2;
  double remove = 0.2;
  double swap = 0.2;
  double params = 0.7;
};

struct GaConfig {
  int population_size = 10;
  int generations = 25;
  double crossover_prob = 0.9;
  MutationProbs mutation;
  double param_sigma = 0.1;
  int tournament_size = 3;
  int elitism = 1;
  int early_stop_patience = 5;
  double min_delta = 1e-4;
  // Stop once this many true evaluations were spent; 0 disables the budget.
  int64_t max_true_evals = 0;
  int init_min_stages = 1;
  int init_max_stages = 4;
  uint64_t seed = 0;
  std::optional<SurrogateConfig> surrogate;
};

// Empty when valid.
std::string CheckGaConfig(const GaConfig& config);

struct GenerationRecord {
  int generation = 0;
  double best = 0.0;  // best true fitness so far
  double mean = 0.0;  // mean finite fitness of the current population
  int64_t true_evals = 0;
  int64_t surrogate_evals = 0;
  double elapsed_s = 0.0;
};

struct RunResult {
  Individual best;  // always truly evaluated
  std::vector<GenerationRecord> history;
  int64_t total_true_evals = 0;
  bool early_stopped = false;
  int random_fallbacks = 0;  // BO proposals drawn at random (degenerate GP)
  std::optional<SurrogateDataset> surrogate_data;
};

// Evaluation seed of individual `index` in `generation`.
uint64_t EvalSeed(uint64_t run_seed, int generation, int index);

RunResult RunGa(Evaluator& evaluator, const GaConfig& config, Representation representation);

struct RandomSearchConfig {
  int64_t budget = 100;
  int batch_size = 10;
  int init_min_stages = 1;
  int init_max_stages = 4;
  uint64_t seed = 0;
};

RunResult RunRandomSearch(Evaluator& evaluator, const RandomSearchConfig& config,
                          Representation representation);

// ---------------------------------------------------------------------------
// Bayesian optimization over a unit box.

struct BoConfig {
  int budget = 50;  // true evaluations, including the initial design
  int n_init = 10;
  int candidates = 1000;  // random EI probes per proposal
  int multistart = 5;     // best probes refined locally
  int local_steps = 40;
  double xi = 0.0;
  uint64_t seed = 0;
  GpConfig gp;
};

std::string CheckBoConfig(const BoConfig& config);

// Latin-hypercube sample of n points in [0, 1]^dim.
std::vector<std::vector<double>> LatinHypercube(int n, int dim, Rng& rng);

double ExpectedImprovement(const Prediction& p, double best, double xi);

struct BoStep {
  std::vector<double> x;
  double value = 0.0;
  bool random_fallback = false;
};

struct BoTrace {
  std::vector<BoStep> steps;
  double best = 0.0;
  std::vector<double> best_x;
  int random_fallbacks = 0;
};

// Maximizes `objective` over [0, 1]^dim. Non-finite values count against the
// budget but are excluded from the GP.
BoTrace MaximizeBox(const std::function<double(const std::vector<double>&)>& objective, int dim,
                    const BoConfig& config);

// Fixed genome only; a graph representation throws RepresentationUnsupported.
// History has one row for the initial design and one per proposal.
RunResult RunBo(Evaluator& evaluator, const BoConfig& config, Representation representation);

}  // namespace autotm

#endif  // AUTOTM_EVOLUTION_H_
