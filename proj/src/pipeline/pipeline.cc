#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "autotm/errors.h"
#include "autotm/pipeline.h"

namespace autotm {

double ParamBounds::lower(RegKind kind) const {
  switch (kind) {
    case RegKind::kSmoothing:
    case RegKind::kDecorrelation:
      return 0.0;
    case RegKind::kSparsing:
      return sparsing_min;
  }
  return 0.0;
}

double ParamBounds::upper(RegKind kind) const {
  switch (kind) {
    case RegKind::kSmoothing:
      return smoothing_max;
    case RegKind::kSparsing:
      return 0.0;
    case RegKind::kDecorrelation:
      return decorrelation_max;
  }
  return 0.0;
}

const ParamBounds& DefaultBounds() {
  static const ParamBounds bounds;
  return bounds;
}

TopicGroup Stage::target() const {
  return kind == RegKind::kSmoothing ? TopicGroup::kBackground : TopicGroup::kSpecific;
}

RegularizerSpec Stage::ToRegularizer() const {
  return {kind, target(), a, kind == RegKind::kDecorrelation ? 0.0 : b};
}

int GraphPipeline::CountKind(RegKind kind) const {
  return static_cast<int>(
      std::count_if(stages.begin(), stages.end(), [kind](const Stage& s) { return s.kind == kind; }));
}

std::vector<Violation> Validate(const GraphPipeline& pipeline, const ParamBounds& bounds) {
  std::vector<Violation> out;
  if (pipeline.stages.empty()) {
    out.push_back({-1, "stages", "EmptyPipeline: pipeline has no stages"});
    return out;
  }
  if (pipeline.size() > bounds.total_cap) {
    out.push_back({-1, "stages",
                   "total cap: " + std::to_string(pipeline.size()) + " stages exceed " +
                       std::to_string(bounds.total_cap)});
  }
  for (RegKind kind : {RegKind::kSmoothing, RegKind::kSparsing, RegKind::kDecorrelation}) {
    const int count = pipeline.CountKind(kind);
    if (count > bounds.per_kind_cap) {
      out.push_back({-1, "stages",
                     "per-kind cap: " + std::to_string(count) + " " + RegKindName(kind) +
                         " stages exceed " + std::to_string(bounds.per_kind_cap)});
    }
  }
  for (int i = 0; i < pipeline.size(); ++i) {
    const Stage& s = pipeline.stages[i];
    if (s.n_iters < bounds.min_iters) {
      out.push_back({i, "n_iters", "n_iters below " + std::to_string(bounds.min_iters)});
    }
    if (s.n_iters > bounds.max_iters) {
      out.push_back({i, "n_iters", "n_iters above " + std::to_string(bounds.max_iters)});
    }
    const double lo = bounds.lower(s.kind);
    const double hi = bounds.upper(s.kind);
    if (!std::isfinite(s.a) || s.a < lo || s.a > hi) {
      out.push_back({i, "a", "a out of " + RegKindName(s.kind) + " bounds"});
    }
    if (!std::isfinite(s.b) || s.b < lo || s.b > hi) {
      out.push_back({i, "b", "b out of " + RegKindName(s.kind) + " bounds"});
    }
  }
  return out;
}

std::string FormatViolations(const std::vector<Violation>& violations) {
  std::ostringstream out;
  for (size_t i = 0; i < violations.size(); ++i) {
    const auto& v = violations[i];
    if (i > 0) out << "; ";
    if (v.stage >= 0) out << "stage " << v.stage << " ";
    out << v.field << ": " << v.message;
  }
  return out.str();
}

void ValidateOrThrow(const GraphPipeline& pipeline, const ParamBounds& bounds) {
  const auto violations = Validate(pipeline, bounds);
  if (!violations.empty()) throw InvalidPipeline(FormatViolations(violations));
}

Stage RandomStage(Rng& rng, RegKind kind, const ParamBounds& bounds) {
  Stage s;
  s.kind = kind;
  s.n_iters = UniformInt(rng, bounds.min_iters, bounds.max_iters);
  if (kind == RegKind::kDecorrelation) {
    const double lo = std::log(bounds.decorrelation_log_min);
    const double hi = std::log(bounds.decorrelation_max);
    s.a = std::exp(UniformReal(rng, lo, hi));
    s.b = std::exp(UniformReal(rng, lo, hi));
  } else {
    s.a = UniformReal(rng, bounds.lower(kind), bounds.upper(kind));
    s.b = UniformReal(rng, bounds.lower(kind), bounds.upper(kind));
  }
  return s;
}

RegKind RandomKind(Rng& rng, const GraphPipeline& pipeline, const ParamBounds& bounds) {
  std::vector<RegKind> open;
  for (RegKind kind : {RegKind::kSmoothing, RegKind::kSparsing, RegKind::kDecorrelation}) {
    if (pipeline.CountKind(kind) < bounds.per_kind_cap) open.push_back(kind);
  }
  if (open.empty()) throw InvalidPipeline("every regularizer kind is at its cap");
  return open[static_cast<size_t>(UniformInt(rng, 0, static_cast<int>(open.size()) - 1))];
}

GraphPipeline RandomPipeline(Rng& rng, int min_len, int max_len, const ParamBounds& bounds) {
  min_len = std::max(min_len, 1);
  max_len = std::min(max_len, bounds.total_cap);
  if (min_len > max_len) throw ConfigError("length_range", "empty pipeline length range");
  GraphPipeline p;
  const int len = UniformInt(rng, min_len, max_len);
  for (int i = 0; i < len; ++i) p.stages.push_back(RandomStage(rng, RandomKind(rng, p, bounds), bounds));
  return p;
}

double FixedGenome::SlotLower(int slot, const ParamBounds& bounds) {
  if (slot % 3 == 0) return 0.0;
  return bounds.lower(kKinds[static_cast<size_t>(slot / 3)]);
}

double FixedGenome::SlotUpper(int slot, const ParamBounds& bounds) {
  if (slot % 3 == 0) return bounds.max_iters;
  return bounds.upper(kKinds[static_cast<size_t>(slot / 3)]);
}

FixedGenome FixedGenome::Random(Rng& rng, const ParamBounds& bounds) {
  FixedGenome g;
  for (int i = 0; i < kStages; ++i) {
    const Stage s = RandomStage(rng, kKinds[static_cast<size_t>(i)], bounds);
    g.slots[3 * i] = s.n_iters;
    g.slots[3 * i + 1] = s.a;
    g.slots[3 * i + 2] = s.b;
  }
  return g;
}

void FixedGenome::Clamp(const ParamBounds& bounds) {
  for (int i = 0; i < kSlots; ++i) {
    slots[i] = std::clamp(slots[i], SlotLower(i, bounds), SlotUpper(i, bounds));
  }
}

GraphPipeline FixedToPipeline(const FixedGenome& genome) {
  GraphPipeline p;
  for (int i = 0; i < FixedGenome::kStages; ++i) {
    const int n = static_cast<int>(std::lround(genome.slots[3 * i]));
    if (n <= 0) continue;
    p.stages.push_back({FixedGenome::kKinds[static_cast<size_t>(i)], n, genome.slots[3 * i + 1],
                        genome.slots[3 * i + 2]});
  }
  ValidateOrThrow(p);
  return p;
}

std::vector<double> ToSurrogateVector(const GraphPipeline& pipeline) {
  const ParamBounds& bounds = DefaultBounds();
  std::vector<double> v(kSurrogateVectorLength, 0.0);
  auto block = [](RegKind kind) {
    switch (kind) {
      case RegKind::kSmoothing:
        return 0;
      case RegKind::kSparsing:
        return 1;
      case RegKind::kDecorrelation:
        return 2;
    }
    return 0;
  };
  std::array<int, 3> used{};
  for (const Stage& s : pipeline.stages) {
    const int k = block(s.kind);
    if (used[k] >= bounds.per_kind_cap) {
      throw InvalidPipeline("per-kind cap exceeded for " + RegKindName(s.kind));
    }
    const int base = (k * bounds.per_kind_cap + used[k]) * 3;
    v[base] = s.n_iters;
    v[base + 1] = s.a;
    v[base + 2] = s.b;
    ++used[k];
  }
  return v;
}

nlohmann::json PipelineToJson(const GraphPipeline& pipeline) {
  nlohmann::json stages = nlohmann::json::array();
  for (const Stage& s : pipeline.stages) {
    stages.push_back({{"kind", RegKindName(s.kind)}, {"n_iters", s.n_iters}, {"a", s.a}, {"b", s.b}});
  }
  return {{"stages", stages}};
}

GraphPipeline PipelineFromJson(const nlohmann::json& j) {
  GraphPipeline p;
  try {
    for (const auto& s : j.at("stages")) {
      p.stages.push_back({ParseRegKind(s.at("kind").get<std::string>()),
                          s.at("n_iters").get<int>(), s.at("a").get<double>(),
                          s.at("b").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline json: ") + e.what());
  }
  return p;
}

std::string SerializePipeline(const GraphPipeline& pipeline) {
  return PipelineToJson(pipeline).dump();
}

GraphPipeline ParsePipeline(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline json: ") + e.what());
  }
  return PipelineFromJson(j);
}

GraphPipeline ExamplePipeline() {
  return {{{RegKind::kSmoothing, 6, 0.5, 0.5},
           {RegKind::kDecorrelation, 28, 1000.0, 1.0},
           {RegKind::kDecorrelation, 30, 5000.0, 1.0},
           {RegKind::kSparsing, 2, -0.5, -0.5}}};
}

ExecutionResult Execute(const GraphPipeline& pipeline, const Corpus& corpus, int num_topics,
                        int num_background, uint64_t seed, const FitnessFn& fitness,
                        const ExecuteOptions& options) {
  ValidateOrThrow(pipeline);
  const auto start = std::chrono::steady_clock::now();
  ExecutionResult result;
  result.model = InitModel(corpus.vocab_size(), num_topics, num_background, corpus.num_docs(), seed);
  for (int i = 0; i < pipeline.size(); ++i) {
    const Stage& stage = pipeline.stages[i];
    try {
      result.model = TrainPasses(std::move(result.model), corpus, stage.n_iters,
                                 {stage.ToRegularizer()}, options.train);
    } catch (const std::exception& e) {
      throw Error("StageFailed", "stage " + std::to_string(i) + " (" + RegKindName(stage.kind) +
                                     "): " + e.what());
    }
    result.em_passes += stage.n_iters;
  }
  result.fitness = fitness ? fitness(result.model) : 0.0;
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace autotm
