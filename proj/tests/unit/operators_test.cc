#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "autotm/errors.h"
#include "autotm/evolution.h"

namespace autotm {
namespace {

// Distinct stages so positions can be traced after an operator.
GraphPipeline Tagged(int n, int offset = 1) {
  GraphPipeline p;
  for (int i = 0; i < n; ++i) p.stages.push_back({RegKind::kSmoothing, offset + i, 1.0, 1.0});
  return p;
}

std::vector<int> Tags(const GraphPipeline& p) {
  std::vector<int> out;
  for (const auto& s : p.stages) out.push_back(s.n_iters);
  return out;
}

double ChiSquareUniform(const std::vector<int>& counts) {
  double total = 0;
  for (int c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  return chi2;
}

TEST(AddStageTest, InsertsOneValidStage) {
  Rng rng(1);
  const GraphPipeline p = Tagged(3);
  for (int i = 0; i < 100; ++i) {
    const MutationResult r = MutateAddStage(p, rng);
    ASSERT_FALSE(r.identity);
    EXPECT_EQ(r.pipeline.size(), 4);
    EXPECT_TRUE(Validate(r.pipeline).empty());
  }
}

TEST(AddStageTest, IdentityAtTotalCapAndUsesOpenKind) {
  Rng rng(2);
  GraphPipeline full;
  for (RegKind k : {RegKind::kSmoothing, RegKind::kSparsing, RegKind::kDecorrelation}) {
    for (int i = 0; i < 10; ++i) full.stages.push_back({k, 1, 0.0, 0.0});
  }
  EXPECT_TRUE(MutateAddStage(full, rng).identity);
  GraphPipeline smooth_full = Tagged(10);
  for (int i = 0; i < 50; ++i) {
    const MutationResult r = MutateAddStage(smooth_full, rng);
    EXPECT_EQ(r.pipeline.CountKind(RegKind::kSmoothing), 10);
  }
}

TEST(RemoveStageTest, SingleStageIsIdentity) {
  Rng rng(3);
  EXPECT_TRUE(MutateRemoveStage(Tagged(1), rng).identity);
}

TEST(RemoveStageTest, RemovalIndexIsUniform) {
  Rng rng(4);
  const GraphPipeline p = Tagged(5);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const std::vector<int> tags = Tags(MutateRemoveStage(p, rng).pipeline);
    ASSERT_EQ(tags.size(), 4u);
    int removed = 0;
    while (removed < 4 && tags[removed] == removed + 1) ++removed;
    ++counts[removed];
  }
  // 4 degrees of freedom, p = 0.001.
  EXPECT_LT(ChiSquareUniform(counts), 18.47);
}

TEST(SwapStagesTest, SwapsTwoDistinctPositions) {
  Rng rng(5);
  EXPECT_TRUE(MutateSwapStages(Tagged(1), rng).identity);
  const GraphPipeline p = Tagged(4);
  for (int i = 0; i < 100; ++i) {
    const std::vector<int> tags = Tags(MutateSwapStages(p, rng).pipeline);
    int moved = 0;
    for (int j = 0; j < 4; ++j) moved += tags[j] != j + 1;
    EXPECT_EQ(moved, 2);
  }
}

TEST(StageParamsTest, ZeroSigmaIsIdentity) {
  Rng rng(6);
  const MutationResult r = MutateStageParams(ExamplePipeline(), rng, 0.0);
  EXPECT_TRUE(r.identity);
  EXPECT_EQ(r.pipeline, ExamplePipeline());
}

TEST(StageParamsTest, ChangesOneStageWithinBounds) {
  Rng rng(7);
  const GraphPipeline p = ExamplePipeline();
  for (int i = 0; i < 200; ++i) {
    const MutationResult r = MutateStageParams(p, rng, 0.3);
    ASSERT_EQ(r.pipeline.size(), p.size());
    EXPECT_TRUE(Validate(r.pipeline).empty());
    int changed = 0;
    for (int j = 0; j < p.size(); ++j) {
      EXPECT_EQ(r.pipeline.stages[j].kind, p.stages[j].kind);
      changed += !(r.pipeline.stages[j] == p.stages[j]);
    }
    EXPECT_LE(changed, 1);
  }
}

TEST(CrossoverTest, HeadTailExample) {
  const GraphPipeline p1 = Tagged(4, 1);   // 1 2 3 4
  const GraphPipeline p2 = Tagged(3, 11);  // 11 12 13
  const CrossoverResult r = CrossoverAt(p1, p2, 1, 2);
  EXPECT_EQ(Tags(r.child1), (std::vector<int>{1, 13}));
  EXPECT_EQ(Tags(r.child2), (std::vector<int>{11, 12, 2, 3, 4}));
  EXPECT_FALSE(r.repaired);
}

TEST(CrossoverTest, EndCuts) {
  const GraphPipeline p1 = Tagged(2, 1);
  const GraphPipeline p2 = Tagged(2, 11);
  const CrossoverResult swap = CrossoverAt(p1, p2, 0, 0);
  EXPECT_EQ(swap.child1, p2);
  EXPECT_EQ(swap.child2, p1);
  const CrossoverResult concat = CrossoverAt(p1, p2, 2, 0);
  EXPECT_EQ(Tags(concat.child1), (std::vector<int>{1, 2, 11, 12}));
  // child2 = p2[0, 0) ++ p1[2, 2) is empty and falls back to p2.
  EXPECT_EQ(concat.child2, p2);
  EXPECT_TRUE(concat.repaired);
  const CrossoverResult head_empty = CrossoverAt(p1, p2, 0, 2);
  EXPECT_EQ(head_empty.child1, p1);
  EXPECT_EQ(Tags(head_empty.child2), (std::vector<int>{11, 12, 1, 2}));
  EXPECT_TRUE(CrossoverAt(GraphPipeline{}, GraphPipeline{}, 0, 0).returned_parents);
  EXPECT_THROW(CrossoverAt(p1, p2, 3, 0), ConfigError);
}

TEST(CrossoverTest, LengthIsConserved) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const GraphPipeline a = RandomPipeline(rng, 1, 6);
    const GraphPipeline b = RandomPipeline(rng, 1, 6);
    const CrossoverResult r = Crossover(a, b, rng);
    EXPECT_TRUE(Validate(r.child1).empty());
    EXPECT_TRUE(Validate(r.child2).empty());
    if (!r.repaired && !r.returned_parents) {
      EXPECT_EQ(r.child1.size() + r.child2.size(), a.size() + b.size());
      EXPECT_EQ(r.child1.size(), r.cut1 + b.size() - r.cut2);
    }
  }
}

TEST(RepairCapsTest, DropsTrailingOverCapStages) {
  GraphPipeline p = Tagged(12);
  p.stages.insert(p.stages.begin(), {RegKind::kSparsing, 99, -1.0, -1.0});
  EXPECT_TRUE(RepairCaps(p));
  EXPECT_EQ(Tags(p), (std::vector<int>{99, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  EXPECT_FALSE(RepairCaps(p));
}

TEST(FixedOperatorsTest, MutationStaysInBox) {
  Rng rng(9);
  FixedGenome g = FixedGenome::Random(rng);
  EXPECT_EQ(MutateFixed(g, rng, 0.0, 1.0), g);
  EXPECT_EQ(MutateFixed(g, rng, 0.5, 0.0), g);
  for (int i = 0; i < 300; ++i) {
    g = MutateFixed(g, rng, 0.5, 0.5);
    for (int s = 0; s < FixedGenome::kSlots; ++s) {
      EXPECT_GE(g.slots[s], FixedGenome::SlotLower(s));
      EXPECT_LE(g.slots[s], FixedGenome::SlotUpper(s));
    }
  }
}

TEST(FixedOperatorsTest, CrossoverSwapsWholeStages) {
  Rng rng(10);
  FixedGenome a, b;
  for (int s = 0; s < FixedGenome::kSlots; ++s) {
    a.slots[s] = 1;
    b.slots[s] = 2;
  }
  std::map<int, int> cuts;
  for (int i = 0; i < 300; ++i) {
    const auto [c1, c2] = CrossoverFixed(a, b, rng);
    int cut = 0;
    while (cut < FixedGenome::kSlots && c1.slots[cut] == 1) ++cut;
    EXPECT_EQ(cut % 3, 0);
    EXPECT_GT(cut, 0);
    EXPECT_LT(cut, FixedGenome::kSlots);
    for (int s = 0; s < FixedGenome::kSlots; ++s) {
      EXPECT_EQ(c1.slots[s], s < cut ? 1 : 2);
      EXPECT_EQ(c2.slots[s], s < cut ? 2 : 1);
    }
    ++cuts[cut];
  }
  EXPECT_EQ(cuts.size(), 3u);
}

TEST(FixedOperatorsTest, UnitMappingRoundTrips) {
  for (int s = 0; s < FixedGenome::kSlots; ++s) {
    for (double u : {0.0, 0.25, 0.5, 1.0}) {
      EXPECT_NEAR(FixedSlotToUnit(s, FixedSlotFromUnit(s, u)), u, 1e-12) << s;
    }
  }
  EXPECT_NEAR(FixedSlotFromUnit(4, 0.5), std::sqrt(1e-3 * 1e5), 1e-9);
}

TEST(RepresentationTest, Names) {
  EXPECT_EQ(ParseRepresentation("graph"), Representation::kGraph);
  EXPECT_EQ(RepresentationName(Representation::kFixed), "fixed");
  EXPECT_THROW(ParseRepresentation("tree"), ConfigError);
}

}  // namespace
}  // namespace autotm
