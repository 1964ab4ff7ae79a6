#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "autotm/errors.h"
#include "autotm/evolution.h"

namespace autotm {
namespace {

std::vector<double> RandomPoint(int dim, Rng& rng) {
  std::vector<double> x(static_cast<size_t>(dim));
  for (auto& v : x) v = Uniform01(rng);
  return x;
}

// Returns an empty vector when the GP cannot guide the next proposal.
std::vector<double> ProposeByEi(const std::vector<BoStep>& steps, int dim, const BoConfig& config,
                                Rng& rng) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& s : steps) {
    if (std::isfinite(s.value)) {
      xs.push_back(s.x);
      ys.push_back(s.value);
    }
  }
  if (xs.size() < 2) return {};
  GaussianProcess gp(config.gp);
  try {
    gp.Fit(xs, ys);
  } catch (const Error& e) {
    spdlog::warn("GP fit failed: {}", e.what());
    return {};
  }
  if (gp.degenerate()) return {};
  const double best = *std::max_element(ys.begin(), ys.end());
  auto ei = [&](const std::vector<double>& x) {
    return ExpectedImprovement(gp.Predict(x), best, config.xi);
  };

  std::vector<std::pair<double, std::vector<double>>> probes;
  probes.reserve(static_cast<size_t>(config.candidates));
  for (int i = 0; i < config.candidates; ++i) {
    std::vector<double> x = RandomPoint(dim, rng);
    const double v = ei(x);
    probes.emplace_back(v, std::move(x));
  }
  const size_t starts = std::min(probes.size(), static_cast<size_t>(config.multistart));
  std::partial_sort(probes.begin(), probes.begin() + static_cast<std::ptrdiff_t>(starts),
                    probes.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::normal_distribution<double> normal(0.0, 1.0);
  double best_ei = -1.0;
  std::vector<double> best_x;
  for (size_t s = 0; s < starts; ++s) {
    auto [value, x] = probes[s];
    double step = 0.1;
    for (int it = 0; it < config.local_steps; ++it) {
      std::vector<double> y = x;
      for (auto& v : y) v = std::clamp(v + step * normal(rng), 0.0, 1.0);
      const double vy = ei(y);
      if (vy > value) {
        value = vy;
        x = std::move(y);
      } else {
        step *= 0.85;
      }
    }
    if (value > best_ei) {
      best_ei = value;
      best_x = std::move(x);
    }
  }
  return best_x;
}

}  // namespace

std::string CheckBoConfig(const BoConfig& c) {
  if (c.budget < 1) return "budget must be >= 1";
  if (c.n_init < 1 || c.n_init > c.budget) return "n_init must be in [1, budget]";
  if (c.candidates < 1 || c.multistart < 1 || c.local_steps < 0) {
    return "acquisition search sizes must be positive";
  }
  if (c.xi < 0.0) return "xi must be >= 0";
  return {};
}

std::vector<std::vector<double>> LatinHypercube(int n, int dim, Rng& rng) {
  std::vector<std::vector<double>> points(static_cast<size_t>(n),
                                          std::vector<double>(static_cast<size_t>(dim)));
  std::vector<int> perm(static_cast<size_t>(n));
  for (int d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[UniformInt(rng, 0, i)]);
    for (int i = 0; i < n; ++i) {
      points[i][d] = (perm[i] + Uniform01(rng)) / static_cast<double>(n);
    }
  }
  return points;
}

double ExpectedImprovement(const Prediction& p, double best, double xi) {
  const double gain = p.mean - best - xi;
  if (!(p.stddev > 1e-12)) return std::max(gain, 0.0);
  const double z = gain / p.stddev;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return gain * cdf + p.stddev * pdf;
}

BoTrace MaximizeBox(const std::function<double(const std::vector<double>&)>& objective, int dim,
                    const BoConfig& config) {
  if (const std::string problem = CheckBoConfig(config); !problem.empty()) {
    throw ConfigError("bo", problem);
  }
  if (dim < 1) throw InvalidDimensions("box dimension must be >= 1");
  Rng rng(DeriveSeed({config.seed, 3}));
  BoTrace trace;
  trace.best = -std::numeric_limits<double>::infinity();
  auto evaluate = [&](std::vector<double> x, bool fallback) {
    const double v = objective(x);
    if (std::isfinite(v) && v > trace.best) {
      trace.best = v;
      trace.best_x = x;
    }
    trace.steps.push_back({std::move(x), v, fallback});
  };
  for (auto& x : LatinHypercube(config.n_init, dim, rng)) evaluate(std::move(x), false);
  while (static_cast<int>(trace.steps.size()) < config.budget) {
    std::vector<double> x = ProposeByEi(trace.steps, dim, config, rng);
    const bool fallback = x.empty();
    if (fallback) {
      ++trace.random_fallbacks;
      x = RandomPoint(dim, rng);
    }
    evaluate(std::move(x), fallback);
  }
  return trace;
}

RunResult RunBo(Evaluator& evaluator, const BoConfig& config, Representation representation) {
  if (representation != Representation::kFixed) {
    throw RepresentationUnsupported("Bayesian optimization requires the fixed representation");
  }
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  Individual best;
  int index = 0;
  auto objective = [&](const std::vector<double>& unit) {
    FixedGenome genome;
    for (int i = 0; i < FixedGenome::kSlots; ++i) genome.slots[i] = FixedSlotFromUnit(i, unit[i]);
    Individual ind;
    ind.genome = genome;
    ind.eval_seed = EvalSeed(config.seed, 0, index++);
    const auto outcomes = evaluator.EvaluateBatch({{GenomePipeline(ind.genome), ind.eval_seed}});
    ++result.total_true_evals;
    if (!outcomes[0].ok) {
      spdlog::warn("individual failed: {}", outcomes[0].error);
      return -std::numeric_limits<double>::infinity();
    }
    ind.fitness = outcomes[0].fitness;
    if (std::isfinite(*ind.fitness) && (!best.fitness || *ind.fitness > *best.fitness)) best = ind;
    return *ind.fitness;
  };
  const BoTrace trace = MaximizeBox(objective, FixedGenome::kSlots, config);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  // One row for the initial design, then one per proposal.
  double running = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  int finite = 0;
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    const double v = trace.steps[i].value;
    if (std::isfinite(v)) {
      running = std::max(running, v);
      sum += v;
      ++finite;
    }
    if (static_cast<int>(i) + 1 < config.n_init) continue;
    const bool init_row = static_cast<int>(i) + 1 == config.n_init;
    result.history.push_back({static_cast<int>(result.history.size()), running,
                              finite > 0 ? sum / finite : std::numeric_limits<double>::quiet_NaN(),
                              init_row ? config.n_init : 1, 0, elapsed});
  }
  result.best = best;
  result.random_fallbacks = trace.random_fallbacks;
  return result;
}

}  // namespace autotm
