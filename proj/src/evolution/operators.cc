#include <algorithm>
#include <cmath>

#include "autotm/errors.h"
#include "autotm/evolution.h"

namespace autotm {
namespace {

int RandomIndex(Rng& rng, int n) { return UniformInt(rng, 0, n - 1); }

double Gaussian(Rng& rng, double sigma) {
  std::normal_distribution<double> normal(0.0, sigma);
  return normal(rng);
}

// Search coordinate in [0, 1] for a strength of the given kind.
double StrengthToUnit(RegKind kind, double value, const ParamBounds& bounds) {
  if (kind == RegKind::kDecorrelation) {
    const double lo = std::log10(bounds.decorrelation_log_min);
    const double hi = std::log10(bounds.decorrelation_max);
    const double v = std::max(value, bounds.decorrelation_log_min);
    return std::clamp((std::log10(v) - lo) / (hi - lo), 0.0, 1.0);
  }
  const double lo = bounds.lower(kind);
  const double hi = bounds.upper(kind);
  return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

double StrengthFromUnit(RegKind kind, double unit, const ParamBounds& bounds) {
  unit = std::clamp(unit, 0.0, 1.0);
  if (kind == RegKind::kDecorrelation) {
    const double lo = std::log10(bounds.decorrelation_log_min);
    const double hi = std::log10(bounds.decorrelation_max);
    return std::min(std::pow(10.0, lo + unit * (hi - lo)), bounds.decorrelation_max);
  }
  const double lo = bounds.lower(kind);
  const double hi = bounds.upper(kind);
  return std::clamp(lo + unit * (hi - lo), lo, hi);
}

double PerturbStrength(RegKind kind, double value, double sigma, Rng& rng,
                       const ParamBounds& bounds) {
  const double delta = Gaussian(rng, sigma);
  return StrengthFromUnit(kind, StrengthToUnit(kind, value, bounds) + delta, bounds);
}

}  // namespace

std::string RepresentationName(Representation r) {
  return r == Representation::kGraph ? "graph" : "fixed";
}

Representation ParseRepresentation(const std::string& name) {
  if (name == "graph") return Representation::kGraph;
  if (name == "fixed") return Representation::kFixed;
  throw ConfigError("representation", "unknown representation '" + name + "'");
}

MutationResult MutateAddStage(const GraphPipeline& p, Rng& rng, const ParamBounds& bounds) {
  if (p.size() >= bounds.total_cap) return {p, true};
  bool open = false;
  for (RegKind kind : {RegKind::kSmoothing, RegKind::kSparsing, RegKind::kDecorrelation}) {
    open = open || p.CountKind(kind) < bounds.per_kind_cap;
  }
  if (!open) return {p, true};
  GraphPipeline out = p;
  const Stage stage = RandomStage(rng, RandomKind(rng, p, bounds), bounds);
  const int pos = UniformInt(rng, 0, p.size());
  out.stages.insert(out.stages.begin() + pos, stage);
  return {std::move(out), false};
}

MutationResult MutateRemoveStage(const GraphPipeline& p, Rng& rng) {
  if (p.size() < 2) return {p, true};
  GraphPipeline out = p;
  out.stages.erase(out.stages.begin() + RandomIndex(rng, p.size()));
  return {std::move(out), false};
}

MutationResult MutateSwapStages(const GraphPipeline& p, Rng& rng) {
  if (p.size() < 2) return {p, true};
  GraphPipeline out = p;
  const int i = RandomIndex(rng, p.size());
  int j = RandomIndex(rng, p.size() - 1);
  if (j >= i) ++j;
  std::swap(out.stages[i], out.stages[j]);
  return {std::move(out), false};
}

MutationResult MutateStageParams(const GraphPipeline& p, Rng& rng, double sigma,
                                 const ParamBounds& bounds) {
  if (p.size() == 0 || !(sigma > 0.0)) return {p, true};
  GraphPipeline out = p;
  Stage& s = out.stages[static_cast<size_t>(RandomIndex(rng, p.size()))];
  const double range = bounds.max_iters - bounds.min_iters;
  const double n = s.n_iters + Gaussian(rng, sigma * range);
  s.n_iters = std::clamp(static_cast<int>(std::lround(n)), bounds.min_iters, bounds.max_iters);
  s.a = PerturbStrength(s.kind, s.a, sigma, rng, bounds);
  s.b = PerturbStrength(s.kind, s.b, sigma, rng, bounds);
  return {std::move(out), false};
}

bool RepairCaps(GraphPipeline& p, const ParamBounds& bounds) {
  bool repaired = false;
  for (RegKind kind : {RegKind::kSmoothing, RegKind::kSparsing, RegKind::kDecorrelation}) {
    int excess = p.CountKind(kind) - bounds.per_kind_cap;
    for (int i = p.size() - 1; i >= 0 && excess > 0; --i) {
      if (p.stages[static_cast<size_t>(i)].kind == kind) {
        p.stages.erase(p.stages.begin() + i);
        --excess;
        repaired = true;
      }
    }
  }
  if (p.size() > bounds.total_cap) {
    p.stages.resize(static_cast<size_t>(bounds.total_cap));
    repaired = true;
  }
  return repaired;
}

CrossoverResult CrossoverAt(const GraphPipeline& p1, const GraphPipeline& p2, int x1, int x2,
                            const ParamBounds& bounds) {
  if (x1 < 0 || x1 > p1.size() || x2 < 0 || x2 > p2.size()) {
    throw ConfigError("crossover", "cut point out of range");
  }
  CrossoverResult r;
  r.cut1 = x1;
  r.cut2 = x2;
  r.child1.stages.assign(p1.stages.begin(), p1.stages.begin() + x1);
  r.child1.stages.insert(r.child1.stages.end(), p2.stages.begin() + x2, p2.stages.end());
  r.child2.stages.assign(p2.stages.begin(), p2.stages.begin() + x2);
  r.child2.stages.insert(r.child2.stages.end(), p1.stages.begin() + x1, p1.stages.end());
  if (r.child1.stages.empty() && r.child2.stages.empty()) {
    r.child1 = p1;
    r.child2 = p2;
    r.returned_parents = true;
    return r;
  }
  const bool rep1 = RepairCaps(r.child1, bounds);
  const bool rep2 = RepairCaps(r.child2, bounds);
  r.repaired = rep1 || rep2;
  // A single empty child is replaced by its head parent; counted as a repair.
  if (r.child1.stages.empty()) {
    r.child1 = p1;
    r.repaired = true;
  }
  if (r.child2.stages.empty()) {
    r.child2 = p2;
    r.repaired = true;
  }
  return r;
}

CrossoverResult Crossover(const GraphPipeline& p1, const GraphPipeline& p2, Rng& rng,
                          const ParamBounds& bounds) {
  const int x1 = UniformInt(rng, 0, p1.size());
  const int x2 = UniformInt(rng, 0, p2.size());
  return CrossoverAt(p1, p2, x1, x2, bounds);
}

double FixedSlotToUnit(int slot, double value) {
  const ParamBounds& bounds = DefaultBounds();
  if (slot % 3 == 0) return std::clamp(value / bounds.max_iters, 0.0, 1.0);
  return StrengthToUnit(FixedGenome::kKinds[static_cast<size_t>(slot / 3)], value, bounds);
}

double FixedSlotFromUnit(int slot, double unit) {
  const ParamBounds& bounds = DefaultBounds();
  if (slot % 3 == 0) return std::clamp(unit, 0.0, 1.0) * bounds.max_iters;
  return StrengthFromUnit(FixedGenome::kKinds[static_cast<size_t>(slot / 3)], unit, bounds);
}

FixedGenome MutateFixed(const FixedGenome& g, Rng& rng, double sigma, double slot_prob) {
  FixedGenome out = g;
  if (!(sigma > 0.0)) return out;
  for (int i = 0; i < FixedGenome::kSlots; ++i) {
    if (Uniform01(rng) >= slot_prob) continue;
    out.slots[i] = FixedSlotFromUnit(i, FixedSlotToUnit(i, g.slots[i]) + Gaussian(rng, sigma));
  }
  out.Clamp();
  return out;
}

std::pair<FixedGenome, FixedGenome> CrossoverFixed(const FixedGenome& a, const FixedGenome& b,
                                                   Rng& rng) {
  const int cut = 3 * UniformInt(rng, 1, FixedGenome::kStages - 1);
  FixedGenome c1 = a, c2 = b;
  for (int i = cut; i < FixedGenome::kSlots; ++i) std::swap(c1.slots[i], c2.slots[i]);
  return {c1, c2};
}

GraphPipeline GenomePipeline(const Genome& genome) {
  if (const auto* p = std::get_if<GraphPipeline>(&genome)) return *p;
  try {
    return FixedToPipeline(std::get<FixedGenome>(genome));
  } catch (const InvalidPipeline&) {
    return {};
  }
}

}  // namespace autotm
