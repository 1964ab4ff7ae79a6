#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "autotm/errors.h"
#include "autotm/evolution.h"
#include "test_support.h"

namespace autotm {
namespace {

using testing::ToyEvaluator;

GaConfig SmallGa(uint64_t seed) {
  GaConfig c;
  c.population_size = 8;
  c.generations = 6;
  c.early_stop_patience = 100;
  c.seed = seed;
  return c;
}

bool SameHistory(const RunResult& a, const RunResult& b) {
  if (a.history.size() != b.history.size()) return false;
  for (size_t i = 0; i < a.history.size(); ++i) {
    const auto& x = a.history[i];
    const auto& y = b.history[i];
    if (x.generation != y.generation || x.best != y.best || x.true_evals != y.true_evals ||
        x.surrogate_evals != y.surrogate_evals) {
      return false;
    }
    if (!(x.mean == y.mean || (std::isnan(x.mean) && std::isnan(y.mean)))) return false;
  }
  return true;
}

TEST(GaTest, DeterministicForSeed) {
  for (Representation r : {Representation::kGraph, Representation::kFixed}) {
    ToyEvaluator e1, e2, e3;
    const RunResult a = RunGa(e1, SmallGa(3), r);
    const RunResult b = RunGa(e2, SmallGa(3), r);
    const RunResult c = RunGa(e3, SmallGa(4), r);
    EXPECT_TRUE(SameHistory(a, b));
    EXPECT_EQ(e1.seeds, e2.seeds);
    EXPECT_EQ(GenomePipeline(a.best.genome), GenomePipeline(b.best.genome));
    EXPECT_NE(e1.seeds, e3.seeds);
  }
}

TEST(GaTest, HistoryAndBestAreConsistent) {
  ToyEvaluator e;
  const RunResult r = RunGa(e, SmallGa(5), Representation::kGraph);
  ASSERT_EQ(r.history.size(), 7u);
  EXPECT_EQ(r.history[0].true_evals, 8);
  for (size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_EQ(r.history[i].true_evals, 7);  // one elite carried over
    EXPECT_GE(r.history[i].best, r.history[i - 1].best);
  }
  EXPECT_EQ(r.total_true_evals, 8 + 6 * 7);
  EXPECT_EQ(e.executions(), r.total_true_evals);
  ASSERT_TRUE(r.best.fitness.has_value());
  EXPECT_EQ(*r.best.fitness, r.history.back().best);
  EXPECT_EQ(*r.best.fitness, ToyEvaluator::Score(GenomePipeline(r.best.genome)));
}

TEST(GaTest, MinimalPopulationAndZeroGenerations) {
  ToyEvaluator e;
  GaConfig c = SmallGa(6);
  c.population_size = 2;
  c.generations = 0;
  const RunResult r = RunGa(e, c, Representation::kGraph);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.total_true_evals, 2);
}

TEST(GaTest, BudgetAndEarlyStop) {
  ToyEvaluator e;
  GaConfig c = SmallGa(7);
  c.generations = 100;
  c.max_true_evals = 30;
  const RunResult r = RunGa(e, c, Representation::kGraph);
  EXPECT_EQ(r.total_true_evals, 30);

  ToyEvaluator e2;
  GaConfig stop = SmallGa(7);
  stop.generations = 200;
  stop.early_stop_patience = 2;
  stop.min_delta = 1e9;  // no generation can improve by this much
  const RunResult s = RunGa(e2, stop, Representation::kGraph);
  EXPECT_TRUE(s.early_stopped);
  EXPECT_EQ(s.history.size(), 3u);
}

TEST(GaTest, InvalidConfigThrows) {
  ToyEvaluator e;
  GaConfig c = SmallGa(1);
  c.population_size = 1;
  EXPECT_THROW(RunGa(e, c, Representation::kGraph), ConfigError);
  c = SmallGa(1);
  c.elitism = 8;
  EXPECT_THROW(RunGa(e, c, Representation::kGraph), ConfigError);
  c = SmallGa(1);
  c.crossover_prob = 1.5;
  EXPECT_THROW(RunGa(e, c, Representation::kGraph), ConfigError);
}

TEST(GaTest, FullPromotionMatchesNoSurrogate) {
  ToyEvaluator plain_eval, surrogate_eval;
  GaConfig plain = SmallGa(8);
  plain.population_size = 10;
  GaConfig with = plain;
  with.surrogate = SurrogateConfig{};
  with.surrogate->promote_fraction = 1.0;
  const RunResult a = RunGa(plain_eval, plain, Representation::kGraph);
  const RunResult b = RunGa(surrogate_eval, with, Representation::kGraph);
  EXPECT_TRUE(SameHistory(a, b));
  EXPECT_EQ(plain_eval.seeds, surrogate_eval.seeds);
  ASSERT_TRUE(b.surrogate_data.has_value());
  EXPECT_EQ(b.surrogate_data->size(), b.total_true_evals);
}

TEST(GaTest, PartialPromotionSavesEvaluations) {
  ToyEvaluator e;
  GaConfig c = SmallGa(9);
  c.population_size = 10;
  c.surrogate = SurrogateConfig{};
  c.surrogate->promote_fraction = 0.3;
  const RunResult r = RunGa(e, c, Representation::kGraph);
  EXPECT_EQ(r.history[0].true_evals, 10);
  // Generation 1 onwards: 9 offspring, ceil(2.7) = 3 promoted.
  for (size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_EQ(r.history[i].true_evals, 3);
    EXPECT_EQ(r.history[i].surrogate_evals, 6);
  }
}

TEST(RandomSearchTest, SpendsBudgetExactly) {
  ToyEvaluator e;
  RandomSearchConfig c;
  c.budget = 23;
  c.batch_size = 10;
  const RunResult r = RunRandomSearch(e, c, Representation::kFixed);
  EXPECT_EQ(r.total_true_evals, 23);
  ASSERT_EQ(r.history.size(), 3u);
  EXPECT_EQ(r.history[2].true_evals, 3);
}

TEST(BoTest, InitialDesignOnlyWhenBudgetEqualsInit) {
  BoConfig c;
  c.budget = 6;
  c.n_init = 6;
  int calls = 0;
  const BoTrace t = MaximizeBox([&](const std::vector<double>& x) { ++calls; return -x[0]; }, 3, c);
  EXPECT_EQ(calls, 6);
  EXPECT_EQ(t.steps.size(), 6u);
  EXPECT_EQ(t.random_fallbacks, 0);
}

TEST(BoTest, DeterministicAndImproves) {
  BoConfig c;
  c.budget = 20;
  c.n_init = 5;
  c.candidates = 200;
  c.seed = 3;
  auto f = [](const std::vector<double>& x) {
    return -((x[0] - 0.3) * (x[0] - 0.3) + (x[1] - 0.7) * (x[1] - 0.7));
  };
  const BoTrace a = MaximizeBox(f, 2, c);
  const BoTrace b = MaximizeBox(f, 2, c);
  ASSERT_EQ(a.steps.size(), 20u);
  for (size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].x, b.steps[i].x);
  double init_best = -INFINITY;
  for (int i = 0; i < 5; ++i) init_best = std::max(init_best, a.steps[i].value);
  EXPECT_GT(a.best, init_best);
}

TEST(BoTest, ConstantObjectiveFallsBackToRandom) {
  BoConfig c;
  c.budget = 8;
  c.n_init = 4;
  const BoTrace t = MaximizeBox([](const std::vector<double>&) { return 1.0; }, 2, c);
  EXPECT_EQ(t.random_fallbacks, 4);
}

TEST(BoTest, RunBoRowsAndRepresentation) {
  ToyEvaluator e;
  BoConfig c;
  c.budget = 12;
  c.n_init = 5;
  c.candidates = 100;
  const RunResult r = RunBo(e, c, Representation::kFixed);
  EXPECT_EQ(r.total_true_evals, 12);
  ASSERT_EQ(r.history.size(), 8u);
  EXPECT_EQ(r.history[0].true_evals, 5);
  EXPECT_EQ(r.history[1].true_evals, 1);
  EXPECT_THROW(RunBo(e, c, Representation::kGraph), RepresentationUnsupported);
  c.n_init = 13;
  EXPECT_THROW(RunBo(e, c, Representation::kFixed), ConfigError);
}

TEST(ExpectedImprovementTest, ClosedForm) {
  // gain = 0.5, sigma = 1: 0.5 Phi(0.5) + phi(0.5).
  const double phi = std::exp(-0.125) / std::sqrt(2 * M_PI);
  const double cdf = 0.6914624612740131;
  EXPECT_NEAR(ExpectedImprovement({1.5, 1.0}, 1.0, 0.0), 0.5 * cdf + phi, 1e-12);
  EXPECT_NEAR(ExpectedImprovement({1.5, 1.0}, 1.0, 0.5), std::sqrt(0.5 / M_PI), 1e-12);
  EXPECT_EQ(ExpectedImprovement({2.0, 0.0}, 1.0, 0.0), 1.0);
  EXPECT_EQ(ExpectedImprovement({0.0, 0.0}, 1.0, 0.0), 0.0);
  EXPECT_GT(ExpectedImprovement({0.0, 1.0}, 1.0, 0.0), 0.0);
}

TEST(LatinHypercubeTest, OnePointPerStratum) {
  Rng rng(12);
  const int n = 17, dim = 4;
  const auto pts = LatinHypercube(n, dim, rng);
  ASSERT_EQ(pts.size(), static_cast<size_t>(n));
  for (int d = 0; d < dim; ++d) {
    std::vector<int> hits(n, 0);
    for (const auto& p : pts) {
      ASSERT_GE(p[d], 0.0);
      ASSERT_LT(p[d], 1.0);
      ++hits[static_cast<int>(p[d] * n)];
    }
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}

}  // namespace
}  // namespace autotm
