#include <gtest/gtest.h>

#include "fourplan/recovery.hpp"

namespace fourplan {
namespace {

HeuristicParams generator_params() {
  HeuristicParams p;
  p.w_centre = 1.0;
  p.w = {0.8, 0.4, 1.5, 4.0};
  p.C = 1.2;
  return p;
}

TEST(Stimuli, ShapeAndLegality) {
  const auto records = random_stimuli(300, 5);
  ASSERT_EQ(records.size(), 300u);
  for (const auto& r : records) {
    const BoardState root = r.board();
    ASSERT_FALSE(is_terminal(root));
    ASSERT_GE(root.piece_count(), 4);
    ASSERT_LE(root.piece_count(), 16);
    const TreeMetrics m = measure(*r.tree);
    ASSERT_GE(m.breadth, 2);
    ASSERT_LE(m.breadth, 6);
    ASSERT_GE(m.max_depth, 1);
    ASSERT_LE(m.max_depth, 4);
    ASSERT_TRUE(validate_against_board(*r.tree, root).ok());
  }
}

TEST(Simulate, DegenerateDistributionAlwaysPicksFavourite) {
  TurnRecord r;
  r.fen = "9/9/9/9";
  r.tree = parse_trees(R"({"trees": [["0,0"], ["1,4"]]})");
  r.chosen_move = Coord{0, 0};
  HeuristicParams p;
  p.w_centre = 1000.0;
  const auto out = simulate_choices(std::vector<TurnRecord>(500, r), p, ModelVariant::Myopic, 3);
  for (const auto& s : out) EXPECT_EQ(s.chosen_move, (Coord{1, 4}));
}

TEST(Simulate, UniformPairFrequency) {
  TurnRecord r;
  r.fen = "9/9/9/9";
  r.tree = parse_trees(R"({"trees": [["0,0"], ["3,8"]]})");
  const auto out = simulate_choices(std::vector<TurnRecord>(10000, r), generator_params(), ModelVariant::FullTree, 4);
  int first = 0;
  for (const auto& s : out) first += *s.chosen_move == Coord{0, 0};
  EXPECT_NEAR(first / 10000.0, 0.5, 0.02);
}

TEST(Simulate, Deterministic) {
  const auto stim = random_stimuli(100, 6);
  const auto a = simulate_choices(stim, generator_params(), ModelVariant::FullTree, 9);
  const auto b = simulate_choices(stim, generator_params(), ModelVariant::FullTree, 9);
  const auto c = simulate_choices(stim, generator_params(), ModelVariant::FullTree, 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].chosen_move, b[i].chosen_move);
    differs = differs || a[i].chosen_move != c[i].chosen_move;
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(random_stimuli(50, 6)[49].fen, random_stimuli(50, 6)[49].fen);
}

TEST(Recovery, BothConditionsRecovered) {
  const auto stim = random_stimuli(500, 31);
  const auto [full, myopic] = recovery_test(stim, generator_params(), generator_params(), 32);
  EXPECT_EQ(full.generator, ModelVariant::FullTree);
  EXPECT_GT(full.delta, 0.0);
  EXPECT_TRUE(full.recovered);
  EXPECT_LT(myopic.delta, 0.0);
  EXPECT_TRUE(myopic.recovered);
  EXPECT_EQ(full.n, 500);
  EXPECT_DOUBLE_EQ(full.delta, full.nll_myopic - full.nll_fulltree);
}

TEST(Recovery, SelfConsistentRefit) {
  const auto stim = random_stimuli(300, 41);
  HeuristicParams gen = generator_params();
  gen.gamma = 1.0;
  const auto data = simulate_choices(stim, gen, ModelVariant::FullTree, 42);
  const FitResult fit = fit_model(data, ModelVariant::FullTree, 43);
  EXPECT_LE(fit.nll_per_sample, dataset_nll(data, gen, ModelVariant::FullTree) + 1e-6);
}

TEST(Recovery, DeterministicOutcome) {
  const auto stim = random_stimuli(60, 51);
  FitOptions opts;
  opts.n_restarts = 3;
  const auto a = recovery_test(stim, generator_params(), generator_params(), 52, opts);
  const auto b = recovery_test(stim, generator_params(), generator_params(), 52, opts);
  EXPECT_EQ(a.first.delta, b.first.delta);
  EXPECT_EQ(a.second.delta, b.second.delta);
  EXPECT_EQ(to_json(a.first, "m").dump(), to_json(b.first, "m").dump());
}

}  // namespace
}  // namespace fourplan
