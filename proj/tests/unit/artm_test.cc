#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "autotm/artm.h"
#include "autotm/errors.h"
#include "autotm/random.h"
#include "test_support.h"

namespace autotm {
namespace {

// 3 docs over 4 words.
Corpus TinyCorpus() {
  Corpus c;
  c.vocabulary = Vocabulary({"w0", "w1", "w2", "w3"}, {2, 2, 1, 1});
  c.docs = {{"a", {{0, 2}, {1, 1}}}, {"b", {{1, 3}, {2, 1}}}, {"c", {{0, 1}, {3, 4}}}};
  c.total_tokens = 12;
  return c;
}

Corpus PlantedCorpus(uint64_t seed) {
  PlantedConfig config;
  config.num_docs = 40;
  config.doc_length = 30;
  config.seed = seed;
  return testing::PlantedDataset(config)->corpus;
}

TopicModel RandomModel(Rng& rng, int v, int t, int b, int d) {
  TopicModel m;
  m.num_background = b;
  m.phi.resize(v, t);
  m.theta.resize(t, d);
  for (int i = 0; i < v; ++i)
    for (int j = 0; j < t; ++j) m.phi(i, j) = UniformReal(rng, 0.05, 1.0);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) m.theta(i, j) = UniformReal(rng, 0.05, 1.0);
  return m;
}

TEST(InitModelTest, DeterministicAndColumnStochastic) {
  const TopicModel a = InitModel(30, 4, 1, 7, 42);
  const TopicModel b = InitModel(30, 4, 1, 7, 42);
  const TopicModel c = InitModel(30, 4, 1, 7, 43);
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_NE(a.phi, c.phi);
  for (int t = 0; t < 4; ++t) EXPECT_NEAR(a.phi.col(t).sum(), 1.0, 1e-12);
  for (int d = 0; d < 7; ++d) EXPECT_NEAR(a.theta.col(d).sum(), 1.0, 1e-12);
  EXPECT_GT(a.phi.minCoeff(), 0.0);
}

TEST(InitModelTest, RejectsBadDimensions) {
  EXPECT_THROW(InitModel(30, 0, 0, 5, 1), InvalidDimensions);
  EXPECT_THROW(InitModel(30, 3, 3, 5, 1), InvalidDimensions);
  EXPECT_THROW(InitModel(1, 3, 0, 5, 1), InvalidDimensions);
  EXPECT_THROW(InitModel(30, 3, 0, 0, 1), InvalidDimensions);
}

TEST(EStepTest, SingleTopicReturnsRawCounts) {
  const Corpus corpus = TinyCorpus();
  const EmCounters n = EStep(InitModel(4, 1, 0, 3, 5), corpus);
  for (int d = 0; d < 3; ++d) {
    double len = 0;
    for (const auto& term : corpus.docs[d].terms) len += static_cast<double>(term.count);
    EXPECT_NEAR(n.n_td(0, d), len, 1e-12);
  }
  EXPECT_NEAR(n.n_wt(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(n.n_wt(1, 0), 4.0, 1e-12);
  EXPECT_NEAR(n.n_wt(2, 0), 1.0, 1e-12);
  EXPECT_NEAR(n.n_wt(3, 0), 4.0, 1e-12);
}

TEST(EStepTest, MatchesPerTokenPosterior) {
  const Corpus corpus = TinyCorpus();
  const TopicModel m = InitModel(4, 3, 1, 3, 9);
  const EmCounters n = EStep(m, corpus);
  PhiMatrix n_wt = PhiMatrix::Zero(4, 3);
  ThetaMatrix n_td = ThetaMatrix::Zero(3, 3);
  for (int d = 0; d < 3; ++d) {
    for (const auto& term : corpus.docs[d].terms) {
      // One token at a time, as if the document were expanded.
      for (int64_t k = 0; k < term.count; ++k) {
        double z = 0;
        for (int t = 0; t < 3; ++t) z += m.phi(term.index, t) * m.theta(t, d);
        for (int t = 0; t < 3; ++t) {
          const double p = m.phi(term.index, t) * m.theta(t, d) / z;
          n_wt(term.index, t) += p;
          n_td(t, d) += p;
        }
      }
    }
  }
  EXPECT_LT((n.n_wt - n_wt).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((n.n_td - n_td).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EStepTest, ZeroDenominatorIsUniform) {
  const Corpus corpus = TinyCorpus();
  TopicModel m = InitModel(4, 2, 0, 3, 1);
  m.phi.row(3).setZero();
  const EmCounters n = EStep(m, corpus);
  EXPECT_NEAR(n.n_wt(3, 0), 2.0, 1e-12);
  EXPECT_NEAR(n.n_wt(3, 1), 2.0, 1e-12);
}

TEST(EStepTest, ShapeMismatchThrows) {
  EXPECT_THROW(EStep(InitModel(5, 2, 0, 3, 1), TinyCorpus()), DimensionMismatch);
  EXPECT_THROW(LogLikelihood(InitModel(4, 2, 0, 2, 1), TinyCorpus()), DimensionMismatch);
}

TEST(RegularizerTest, LogPriorMStepTermsAreConstant) {
  Rng rng(1);
  const TopicModel m = RandomModel(rng, 6, 4, 1, 3);
  const RegularizerSpec spec{RegKind::kSmoothing, TopicGroup::kSpecific, 0.7, 0.3};
  const RegularizerGradient terms = MStepTerms(spec, m);
  for (int w = 0; w < 6; ++w) {
    EXPECT_EQ(terms.d_phi(w, 0), 0.0);
    for (int t = 1; t < 4; ++t) EXPECT_EQ(terms.d_phi(w, t), 0.7);
  }
  for (int d = 0; d < 3; ++d) {
    EXPECT_EQ(terms.d_theta(0, d), 0.0);
    for (int t = 1; t < 4; ++t) EXPECT_EQ(terms.d_theta(t, d), 0.3);
  }
}

TEST(RegularizerTest, DecorrelationOnIdenticalColumns) {
  TopicModel m;
  m.num_background = 0;
  m.phi.resize(3, 2);
  m.phi << 0.5, 0.5, 0.3, 0.3, 0.2, 0.2;
  m.theta = ThetaMatrix::Constant(2, 1, 0.5);
  const double a = 2.0;
  const RegularizerGradient g =
      ComputeRegularizerGradient({RegKind::kDecorrelation, TopicGroup::kSpecific, a, 0.0}, m);
  for (int w = 0; w < 3; ++w) {
    for (int t = 0; t < 2; ++t) EXPECT_NEAR(g.d_phi(w, t), -a * m.phi(w, t), 1e-15);
  }
  EXPECT_EQ(g.d_theta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RegularizerTest, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  const std::vector<RegularizerSpec> specs = {
      {RegKind::kSmoothing, TopicGroup::kBackground, 0.4, 0.9},
      {RegKind::kSparsing, TopicGroup::kSpecific, -0.6, -0.2},
      {RegKind::kDecorrelation, TopicGroup::kSpecific, 3.0, 0.0},
      {RegKind::kDecorrelation, TopicGroup::kBackground, 1.0, 0.0},
  };
  for (int trial = 0; trial < 5; ++trial) {
    const TopicModel m = RandomModel(rng, 5, 4, 2, 3);
    for (const auto& spec : specs) {
      const RegularizerGradient g = ComputeRegularizerGradient(spec, m);
      for (int w = 0; w < 5; ++w) {
        for (int t = 0; t < 4; ++t) {
          TopicModel plus = m, minus = m;
          const double h = 1e-6;
          plus.phi(w, t) += h;
          minus.phi(w, t) -= h;
          const double fd = (RegularizerValue(spec, plus) - RegularizerValue(spec, minus)) / (2 * h);
          EXPECT_NEAR(g.d_phi(w, t), fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
      }
      for (int t = 0; t < 4; ++t) {
        for (int d = 0; d < 3; ++d) {
          TopicModel plus = m, minus = m;
          const double h = 1e-6;
          plus.theta(t, d) += h;
          minus.theta(t, d) -= h;
          const double fd = (RegularizerValue(spec, plus) - RegularizerValue(spec, minus)) / (2 * h);
          EXPECT_NEAR(g.d_theta(t, d), fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }
}

TEST(RegularizerTest, SignChecks) {
  EXPECT_TRUE(CheckRegularizer({RegKind::kSmoothing, TopicGroup::kBackground, 1, 0}).empty());
  EXPECT_FALSE(CheckRegularizer({RegKind::kSmoothing, TopicGroup::kBackground, -1, 0}).empty());
  EXPECT_FALSE(CheckRegularizer({RegKind::kSparsing, TopicGroup::kSpecific, 0, 0.5}).empty());
  EXPECT_FALSE(CheckRegularizer({RegKind::kDecorrelation, TopicGroup::kSpecific, -1, 0}).empty());
  EXPECT_EQ(ParseRegKind(RegKindName(RegKind::kSparsing)), RegKind::kSparsing);
  EXPECT_THROW(ParseRegKind("dropout"), ConfigError);
}

TEST(MStepTest, SingleTopicClosedForm) {
  const Corpus corpus = TinyCorpus();
  const TopicModel m = InitModel(4, 1, 0, 3, 3);
  const TopicModel next = MStep(EStep(m, corpus), m, {});
  // phi = word frequencies over the whole corpus.
  const double expected[] = {3.0 / 12, 4.0 / 12, 1.0 / 12, 4.0 / 12};
  for (int w = 0; w < 4; ++w) EXPECT_NEAR(next.phi(w, 0), expected[w], 1e-12);
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(next.theta(0, d), 1.0, 1e-12);
}

TEST(MStepTest, SmoothingAddsConstantBeforeNormalizing) {
  const Corpus corpus = TinyCorpus();
  const TopicModel m = InitModel(4, 1, 0, 3, 3);
  const TopicModel next =
      MStep(EStep(m, corpus), m, {{RegKind::kSmoothing, TopicGroup::kSpecific, 1.0, 0.0}});
  const double expected[] = {4.0 / 16, 5.0 / 16, 2.0 / 16, 5.0 / 16};
  for (int w = 0; w < 4; ++w) EXPECT_NEAR(next.phi(w, 0), expected[w], 1e-12);
}

TEST(MStepTest, HeavySparsingResetsColumns) {
  const Corpus corpus = PlantedCorpus(2);
  const TopicModel m = InitModel(corpus.vocab_size(), 3, 1, corpus.num_docs(), 1);
  const TopicModel next =
      MStep(EStep(m, corpus), m, {{RegKind::kSparsing, TopicGroup::kSpecific, -1e6, -1e6}});
  // Both specific phi columns and every theta column lose all mass except
  // the background row, so only phi columns reset.
  EXPECT_EQ(next.reset_events, 2);
  for (int t = 1; t < 3; ++t) {
    for (int w = 0; w < corpus.vocab_size(); ++w) {
      EXPECT_DOUBLE_EQ(next.phi(w, t), 1.0 / corpus.vocab_size());
    }
  }
  EXPECT_NEAR(next.theta.row(0).minCoeff(), 1.0, 1e-12);
}

TEST(MStepTest, SparsingIncreasesZeros) {
  const Corpus corpus = PlantedCorpus(3);
  const TopicModel m = InitModel(corpus.vocab_size(), 5, 1, corpus.num_docs(), 4);
  const TopicModel plain = TrainPasses(m, corpus, 5, {});
  const TopicModel sparse =
      TrainPasses(m, corpus, 5, {{RegKind::kSparsing, TopicGroup::kSpecific, -0.5, -0.5}});
  EXPECT_GT(Sparsity(sparse.phi), Sparsity(plain.phi));
  EXPECT_GT(Sparsity(sparse.theta), Sparsity(plain.theta));
}

TEST(LogLikelihoodTest, MatchesDoubleLoop) {
  const Corpus corpus = PlantedCorpus(5);
  const TopicModel m = InitModel(corpus.vocab_size(), 4, 1, corpus.num_docs(), 8);
  double ll = 0;
  for (int d = 0; d < corpus.num_docs(); ++d) {
    for (const auto& term : corpus.docs[d].terms) {
      double p = 0;
      for (int t = 0; t < m.num_topics(); ++t) p += m.phi(term.index, t) * m.theta(t, d);
      ll += static_cast<double>(term.count) * std::log(p);
    }
  }
  EXPECT_NEAR(LogLikelihood(m, corpus), ll, 1e-9 * std::abs(ll));
}

TEST(LogLikelihoodTest, UnregularizedEmIsMonotone) {
  const Corpus corpus = PlantedCorpus(6);
  TrainOptions options;
  options.background_smoothing = 0.0;
  double prev = -INFINITY;
  int calls = 0;
  options.on_pass = [&](int pass, const TopicModel& model) {
    EXPECT_EQ(pass, ++calls);
    const double ll = LogLikelihood(model, corpus);
    EXPECT_GE(ll, prev - 1e-9 * std::abs(ll));
    prev = ll;
  };
  TrainPasses(InitModel(corpus.vocab_size(), 4, 1, corpus.num_docs(), 2), corpus, 15, {},
              options);
  EXPECT_EQ(calls, 15);
}

TEST(SparsityTest, Examples) {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_DOUBLE_EQ(Sparsity(m), 0.75);
  EXPECT_DOUBLE_EQ(Sparsity(Eigen::MatrixXd::Ones(3, 3)), 0.0);
  EXPECT_DOUBLE_EQ(Sparsity(Eigen::MatrixXd(0, 0)), 0.0);
}

TEST(TopTokensTest, MatchesFullSort) {
  Rng rng(3);
  TopicModel m = RandomModel(rng, 50, 3, 0, 1);
  // Force some ties.
  m.phi(10, 1) = m.phi(20, 1) = 2.0;
  for (int t = 0; t < 3; ++t) {
    std::vector<int> order(50);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return m.phi(a, t) > m.phi(b, t); });
    order.resize(7);
    EXPECT_EQ(TopTokenIndices(m, t, 7), order);
  }
  EXPECT_EQ(TopTokenIndices(m, 1, 2), (std::vector<int>{10, 20}));
  EXPECT_EQ(TopTokenIndices(m, 0, 500).size(), 50u);
  EXPECT_THROW(TopTokenIndices(m, 3, 5), DimensionMismatch);
}

TEST(TopTokensTest, FormatTopWords) {
  TopicModel m;
  m.num_background = 1;
  m.phi.resize(3, 2);
  m.phi << 0.5, 0.1, 0.3, 0.2, 0.2, 0.7;
  m.theta = ThetaMatrix::Constant(2, 1, 0.5);
  const Vocabulary v({"x", "y", "z"}, {1, 1, 1});
  EXPECT_EQ(FormatTopWords(m, v, 2), "0 [bg]\tx\t0.5\n0 [bg]\ty\t0.3\n1\tz\t0.7\n1\ty\t0.2\n");
  EXPECT_THROW(FormatTopWords(m, v, 0), ConfigError);
}

TEST(ModelIoTest, RoundTripIsExact) {
  testing::TempDir dir("model_io");
  TopicModel m = InitModel(17, 4, 1, 6, 99);
  m.phi(3, 2) = 0.0;
  SaveModel(dir.path() / "m.bin", m);
  const TopicModel loaded = LoadModel(dir.path() / "m.bin");
  EXPECT_EQ(loaded.phi, m.phi);
  EXPECT_EQ(loaded.theta, m.theta);
  EXPECT_EQ(loaded.num_background, 1);
  EXPECT_EQ(loaded.seed, 99u);
  testing::WriteFile(dir.path() / "bad.bin", "XXXX0000");
  EXPECT_THROW(LoadModel(dir.path() / "bad.bin"), FormatError);
}

}  // namespace
}  // namespace autotm
