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

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double FitnessOf(const Individual& ind) { return ind.fitness.value_or(kNegInf); }

bool ValidProb(double p) { return p >= 0.0 && p <= 1.0; }

class Clock {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double MeanFinite(const std::vector<Individual>& pop) {
  double sum = 0.0;
  int n = 0;
  for (const auto& ind : pop) {
    const double f = FitnessOf(ind);
    if (std::isfinite(f)) {
      sum += f;
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

// Tracks the best truly evaluated individual of a run.
class BestTracker {
 public:
  void Offer(const Individual& ind) {
    if (ind.source != FitnessSource::kTrueEval || !ind.fitness) return;
    if (!std::isfinite(*ind.fitness)) return;
    if (!best_.fitness || *ind.fitness > *best_.fitness) best_ = ind;
  }
  double value() const { return best_.fitness.value_or(kNegInf); }
  const Individual& best() const { return best_; }

 private:
  Individual best_;
};

void ApplyTrueOutcome(Individual& ind, const EvalOutcome& outcome) {
  ind.source = FitnessSource::kTrueEval;
  if (outcome.ok) {
    ind.fitness = outcome.fitness;
  } else {
    ind.fitness = kNegInf;
    ind.error = outcome.error;
    spdlog::warn("individual failed: {}", outcome.error);
  }
}

// Evaluates the individuals in `pop` from index `first` on.
GenerationCounts EvaluateFrom(std::vector<Individual>& pop, size_t first, Evaluator& evaluator,
                              SurrogateState* surrogate) {
  std::vector<EvalRequest> batch;
  for (size_t i = first; i < pop.size(); ++i) {
    batch.push_back({GenomePipeline(pop[i].genome), pop[i].eval_seed});
  }
  GenerationCounts counts;
  if (batch.empty()) return counts;
  if (surrogate == nullptr) {
    const auto outcomes = evaluator.EvaluateBatch(batch);
    for (size_t k = 0; k < outcomes.size(); ++k) ApplyTrueOutcome(pop[first + k], outcomes[k]);
    counts.true_evals = static_cast<int>(outcomes.size());
    return counts;
  }
  const auto scored = SurrogateEvaluateGeneration(batch, *surrogate, evaluator, &counts);
  for (size_t k = 0; k < scored.size(); ++k) {
    Individual& ind = pop[first + k];
    ind.fitness = scored[k].fitness;
    ind.source = scored[k].source;
    ind.error = scored[k].error;
  }
  return counts;
}

Genome RandomGenome(Rng& rng, Representation rep, int min_len, int max_len) {
  if (rep == Representation::kGraph) return RandomPipeline(rng, min_len, max_len);
  return FixedGenome::Random(rng);
}

size_t Tournament(const std::vector<Individual>& pop, int size, Rng& rng) {
  size_t winner = static_cast<size_t>(UniformInt(rng, 0, static_cast<int>(pop.size()) - 1));
  for (int k = 1; k < size; ++k) {
    const auto c = static_cast<size_t>(UniformInt(rng, 0, static_cast<int>(pop.size()) - 1));
    const double fc = FitnessOf(pop[c]);
    const double fw = FitnessOf(pop[winner]);
    if (fc > fw || (fc == fw && c < winner)) winner = c;
  }
  return winner;
}

GraphPipeline MutateGraph(const GraphPipeline& p, const GaConfig& config, Rng& rng) {
  GraphPipeline out = p;
  if (Uniform01(rng) < config.mutation.add) out = MutateAddStage(out, rng).pipeline;
  if (Uniform01(rng) < config.mutation.remove) out = MutateRemoveStage(out, rng).pipeline;
  if (Uniform01(rng) < config.mutation.swap) out = MutateSwapStages(out, rng).pipeline;
  if (Uniform01(rng) < config.mutation.params) {
    out = MutateStageParams(out, rng, config.param_sigma).pipeline;
  }
  return out;
}

std::pair<Genome, Genome> Breed(const Genome& a, const Genome& b, const GaConfig& config,
                                Rng& rng) {
  const bool cross = Uniform01(rng) < config.crossover_prob;
  if (const auto* pa = std::get_if<GraphPipeline>(&a)) {
    const auto& pb = std::get<GraphPipeline>(b);
    GraphPipeline c1 = *pa, c2 = pb;
    if (cross) {
      CrossoverResult r = Crossover(*pa, pb, rng);
      c1 = std::move(r.child1);
      c2 = std::move(r.child2);
    }
    return {MutateGraph(c1, config, rng), MutateGraph(c2, config, rng)};
  }
  FixedGenome c1 = std::get<FixedGenome>(a), c2 = std::get<FixedGenome>(b);
  if (cross) std::tie(c1, c2) = CrossoverFixed(c1, c2, rng);
  const double slot_prob = 1.0 / FixedGenome::kStages;
  if (Uniform01(rng) < config.mutation.params) c1 = MutateFixed(c1, rng, config.param_sigma, slot_prob);
  if (Uniform01(rng) < config.mutation.params) c2 = MutateFixed(c2, rng, config.param_sigma, slot_prob);
  return {c1, c2};
}

}  // namespace

uint64_t EvalSeed(uint64_t run_seed, int generation, int index) {
  return DeriveSeed({run_seed, static_cast<uint64_t>(generation), static_cast<uint64_t>(index)});
}

std::string CheckGaConfig(const GaConfig& c) {
  if (c.population_size < 2) return "population_size must be >= 2";
  if (c.generations < 0) return "generations must be >= 0";
  if (!ValidProb(c.crossover_prob) || !ValidProb(c.mutation.add) ||
      !ValidProb(c.mutation.remove) || !ValidProb(c.mutation.swap) ||
      !ValidProb(c.mutation.params)) {
    return "probabilities must be in [0, 1]";
  }
  if (c.param_sigma < 0.0) return "param_sigma must be >= 0";
  if (c.tournament_size < 1) return "tournament_size must be >= 1";
  if (c.elitism < 0 || c.elitism >= c.population_size) {
    return "elitism must be in [0, population_size)";
  }
  if (c.early_stop_patience < 1) return "early_stop_patience must be >= 1";
  if (c.min_delta < 0.0) return "min_delta must be >= 0";
  if (c.max_true_evals < 0) return "max_true_evals must be >= 0";
  if (c.init_min_stages < 1 || c.init_max_stages < c.init_min_stages ||
      c.init_max_stages > DefaultBounds().total_cap) {
    return "initial stage range is invalid";
  }
  if (c.surrogate) {
    const std::string problem = CheckSurrogateConfig(*c.surrogate, c.population_size);
    if (!problem.empty()) return "surrogate: " + problem;
  }
  return {};
}

RunResult RunGa(Evaluator& evaluator, const GaConfig& config, Representation representation) {
  if (const std::string problem = CheckGaConfig(config); !problem.empty()) {
    throw ConfigError("ga", problem);
  }
  const Clock clock;
  Rng rng(DeriveSeed({config.seed, 1}));
  std::optional<SurrogateState> surrogate;
  if (config.surrogate) {
    surrogate.emplace();
    surrogate->config = *config.surrogate;
    surrogate->seed = DeriveSeed({config.seed, 2});
  }
  SurrogateState* sstate = surrogate ? &*surrogate : nullptr;
  const bool budgeted = config.max_true_evals > 0;
  RunResult result;
  BestTracker tracker;

  auto record = [&](int generation, const std::vector<Individual>& pop,
                    const GenerationCounts& counts) {
    for (const auto& ind : pop) tracker.Offer(ind);
    result.total_true_evals += counts.true_evals;
    result.history.push_back({generation, tracker.value(), MeanFinite(pop), counts.true_evals,
                              counts.surrogate_evals, clock.Seconds()});
    spdlog::info("generation {}: best {:.6f} mean {:.6f} true {} surrogate {}", generation,
                 tracker.value(), result.history.back().mean, counts.true_evals,
                 counts.surrogate_evals);
  };
  auto remaining = [&]() { return config.max_true_evals - result.total_true_evals; };

  std::vector<Individual> pop;
  int initial = config.population_size;
  if (budgeted) initial = static_cast<int>(std::min<int64_t>(initial, config.max_true_evals));
  for (int i = 0; i < initial; ++i) {
    Individual ind;
    ind.genome = RandomGenome(rng, representation, config.init_min_stages, config.init_max_stages);
    ind.eval_seed = EvalSeed(config.seed, 0, i);
    pop.push_back(std::move(ind));
  }
  record(0, pop, EvaluateFrom(pop, 0, evaluator, sstate));

  double reference = tracker.value();
  int stall = 0;
  for (int gen = 1; gen <= config.generations; ++gen) {
    if (budgeted && remaining() <= 0) break;
    // Elites first, ordered by fitness then position.
    std::vector<size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return FitnessOf(pop[a]) > FitnessOf(pop[b]); });
    std::vector<Individual> next;
    const int elites = std::min(config.elitism, static_cast<int>(pop.size()));
    for (int e = 0; e < elites; ++e) next.push_back(pop[order[static_cast<size_t>(e)]]);

    int offspring = config.population_size - elites;
    if (budgeted && sstate == nullptr) {
      offspring = static_cast<int>(std::min<int64_t>(offspring, remaining()));
    }
    std::vector<Genome> children;
    while (static_cast<int>(children.size()) < offspring) {
      const size_t a = Tournament(pop, config.tournament_size, rng);
      const size_t b = Tournament(pop, config.tournament_size, rng);
      auto [c1, c2] = Breed(pop[a].genome, pop[b].genome, config, rng);
      children.push_back(std::move(c1));
      if (static_cast<int>(children.size()) < offspring) children.push_back(std::move(c2));
    }
    for (auto& genome : children) {
      Individual ind;
      ind.genome = std::move(genome);
      ind.eval_seed = EvalSeed(config.seed, gen, static_cast<int>(next.size()));
      next.push_back(std::move(ind));
    }
    pop = std::move(next);
    record(gen, pop, EvaluateFrom(pop, static_cast<size_t>(elites), evaluator, sstate));

    if (tracker.value() > reference + config.min_delta) {
      reference = tracker.value();
      stall = 0;
    } else if (++stall >= config.early_stop_patience) {
      result.early_stopped = true;
      spdlog::info("early stop after generation {}", gen);
      break;
    }
  }
  result.best = tracker.best();
  if (surrogate) result.surrogate_data = std::move(surrogate->dataset);
  return result;
}

RunResult RunRandomSearch(Evaluator& evaluator, const RandomSearchConfig& config,
                          Representation representation) {
  if (config.budget < 1 || config.batch_size < 1) {
    throw ConfigError("random_search", "budget and batch_size must be >= 1");
  }
  const Clock clock;
  Rng rng(DeriveSeed({config.seed, 4}));
  RunResult result;
  BestTracker tracker;
  for (int batch = 0; result.total_true_evals < config.budget; ++batch) {
    const int64_t n = std::min<int64_t>(config.batch_size, config.budget - result.total_true_evals);
    std::vector<Individual> pop;
    for (int64_t i = 0; i < n; ++i) {
      Individual ind;
      ind.genome = RandomGenome(rng, representation, config.init_min_stages, config.init_max_stages);
      ind.eval_seed = EvalSeed(config.seed, batch, static_cast<int>(i));
      pop.push_back(std::move(ind));
    }
    const GenerationCounts counts = EvaluateFrom(pop, 0, evaluator, nullptr);
    for (const auto& ind : pop) tracker.Offer(ind);
    result.total_true_evals += counts.true_evals;
    result.history.push_back(
        {batch, tracker.value(), MeanFinite(pop), counts.true_evals, 0, clock.Seconds()});
  }
  result.best = tracker.best();
  return result;
}

}  // namespace autotm
