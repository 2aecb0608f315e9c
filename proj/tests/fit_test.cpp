#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fourplan/fit.hpp"
#include "fourplan/recovery.hpp"

namespace fourplan {
namespace {

TurnRecord make_record(const std::string& fen, const char* tree, std::optional<Coord> chosen,
                       const std::string& model = "m") {
  TurnRecord r;
  r.game_id = "g";
  r.fen = fen;
  r.player = parse_fen(fen).to_move();
  r.chosen_move = chosen;
  if (tree) r.tree = parse_trees(tree, fen);
  r.model_name = model;
  return r;
}

TEST(Filter, ReasonsAndPriority) {
  const std::string empty = "9/9/9/9";
  const char* two = R"({"trees": [["1,4"], ["0,0"]]})";
  EXPECT_EQ(exclusion_reason(make_record(empty, R"({"trees": [["1,4"]]})", Coord{1, 4})),
            ExclusionReason::DegenerateTree);
  EXPECT_EQ(exclusion_reason(make_record(empty, two, Coord{2, 2})), ExclusionReason::ChosenNotInTree);
  EXPECT_EQ(exclusion_reason(make_record(empty, nullptr, Coord{2, 2})), ExclusionReason::NoTree);
  EXPECT_EQ(exclusion_reason(make_record(empty, nullptr, std::nullopt)), ExclusionReason::InvalidMove);
  EXPECT_EQ(exclusion_reason(make_record("W8/9/9/9", two, Coord{0, 0})), ExclusionReason::InvalidMove);
  EXPECT_EQ(exclusion_reason(make_record(empty, two, Coord{0, 0})), std::nullopt);
}

TEST(Filter, MinimumTurnsPerModel) {
  std::vector<TurnRecord> records;
  const char* two = R"({"trees": [["1,4"], ["0,0"]]})";
  for (int i = 0; i < 19; ++i) records.push_back(make_record("9/9/9/9", two, Coord{1, 4}, "small"));
  for (int i = 0; i < 20; ++i) records.push_back(make_record("9/9/9/9", two, Coord{0, 0}, "big"));
  records.push_back(make_record("9/9/9/9", nullptr, Coord{0, 0}, "big"));
  const FilterResult f = filter_dataset(records);
  EXPECT_FALSE(f.model_ok.at("small"));
  EXPECT_TRUE(f.model_ok.at("big"));
  EXPECT_EQ(f.kept.size(), 39u);
  ASSERT_EQ(f.excluded.size(), 1u);
  EXPECT_EQ(f.excluded[0].second, ExclusionReason::NoTree);
  EXPECT_TRUE(filter_dataset(f.kept).excluded.empty());
}

TEST(Nll, UniformPairIsLn2) {
  // Corner cells mirrored through the centre are equally central, and a lone
  // piece forms no pattern, so any parameters tie the two candidates.
  const char* tree = R"({"trees": [["0,0"], ["3,8"]]})";
  const std::vector<TurnRecord> records = {make_record("9/9/9/9", tree, Coord{0, 0}),
                                           make_record("9/9/9/9", tree, Coord{3, 8})};
  HeuristicParams p;
  p.w_centre = 0.37;
  p.w = {1, 2, 3, 4};
  for (auto v : {ModelVariant::FullTree, ModelVariant::Myopic, ModelVariant::Discount}) {
    EXPECT_NEAR(dataset_nll(records, p, v), std::log(2.0), 1e-15);
  }
}

TEST(Nll, LargeValueGap) {
  const double gap = centre_weight(Coord{1, 4}) - centre_weight(Coord{0, 0});
  HeuristicParams p;
  p.w_centre = 20.0 / gap;
  const std::vector<TurnRecord> records = {
      make_record("9/9/9/9", R"({"trees": [["1,4"], ["0,0"]]})", Coord{1, 4})};
  const double nll = dataset_nll(records, p, ModelVariant::Myopic);
  EXPECT_NEAR(nll, std::log1p(std::exp(-20.0)), 1e-20);
  EXPECT_NEAR(nll, 2.06e-9, 0.01e-9);
}

TEST(Nll, NoTreeWithZeroWeightsIsUniform) {
  const HeuristicParams zero;
  EXPECT_NEAR(dataset_nll({make_record("9/9/9/9", nullptr, Coord{2, 5})}, zero, ModelVariant::NoTree),
              std::log(36.0), 1e-14);
  EXPECT_NEAR(dataset_nll({make_record("1WBB5/2BW1W3/1W1BW4/9", nullptr, Coord{3, 0})}, zero,
                          ModelVariant::NoTree),
              std::log(27.0), 1e-14);
}

TEST(Nll, ChosenMustBeACandidate) {
  const std::vector<TurnRecord> records = {
      make_record("9/9/9/9", R"({"trees": [["1,4"], ["0,0"]]})", Coord{2, 2})};
  EXPECT_THROW(dataset_nll(records, HeuristicParams{}, ModelVariant::FullTree), ChosenNotCandidate);
}

std::vector<TurnRecord> stimuli(int n, std::uint64_t seed) { return random_stimuli(n, seed); }

HeuristicParams generator_params() {
  HeuristicParams p;
  p.w_centre = 1.0;
  p.w = {0.8, 0.4, 1.5, 4.0};
  p.C = 1.2;
  return p;
}

TEST(Nll, DiscountEndpointsMatchExactly) {
  const auto records = stimuli(200, 3);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    HeuristicParams p = generator_params();
    p.w_centre = uniform(rng, -2, 2);
    p.C = uniform(rng, 0.25, 5);
    p.gamma = 0.0;
    EXPECT_EQ(dataset_nll(records, p, ModelVariant::Discount), dataset_nll(records, p, ModelVariant::Myopic));
    p.gamma = 1.0;
    EXPECT_EQ(dataset_nll(records, p, ModelVariant::Discount), dataset_nll(records, p, ModelVariant::FullTree));
  }
}

TEST(Fit, ParameterVectorMapping) {
  HeuristicParams p = generator_params();
  p.gamma = 0.3;
  const auto x = vector_from_params(p, ModelVariant::Discount);
  ASSERT_EQ(x.size(), 7u);
  const HeuristicParams q = params_from_vector(x, ModelVariant::Discount);
  EXPECT_DOUBLE_EQ(q.C, p.C);
  EXPECT_EQ(q.gamma, 0.3);
  EXPECT_EQ(params_from_vector(vector_from_params(p, ModelVariant::FullTree), ModelVariant::FullTree).gamma, 1.0);
  EXPECT_EQ(params_from_vector(vector_from_params(p, ModelVariant::Myopic), ModelVariant::Myopic).gamma, 0.0);
  const BoxBounds box = parameter_bounds(ModelVariant::Discount);
  EXPECT_DOUBLE_EQ(std::exp(box.lower[5]), 0.25);
  EXPECT_DOUBLE_EQ(std::exp(box.upper[5]), 5.0);
  for (int k = 0; k < 50; ++k) {
    const auto s = restart_start(ModelVariant::Discount, 9, k);
    for (int i = 0; i < 5; ++i) EXPECT_LE(std::abs(s[i]), 1.0);
    EXPECT_GE(s[5], box.lower[5]);
    EXPECT_LE(s[5], box.upper[5]);
    EXPECT_GE(s[6], 0.0);
    EXPECT_LE(s[6], 1.0);
  }
}

class SyntheticFit : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    records_ = new std::vector<TurnRecord>(
        simulate_choices(stimuli(500, 11), generator_params(), ModelVariant::Myopic, 12));
    fit_ = new FitResult(fit_model(*records_, ModelVariant::Myopic, 7));
  }
  static void TearDownTestSuite() {
    delete records_;
    delete fit_;
  }
  static std::vector<TurnRecord>* records_;
  static FitResult* fit_;
};
std::vector<TurnRecord>* SyntheticFit::records_ = nullptr;
FitResult* SyntheticFit::fit_ = nullptr;

TEST_F(SyntheticFit, NoWorseThanGenerator) {
  const double gen = dataset_nll(*records_, generator_params(), ModelVariant::Myopic);
  EXPECT_LE(fit_->nll_per_sample, gen + 1e-6);
  EXPECT_EQ(fit_->n_samples, 500);
  EXPECT_EQ(fit_->restarts.size(), 20u);
  EXPECT_GE(fit_->accuracy, 0.0);
  EXPECT_LE(fit_->accuracy, 1.0);
}

TEST_F(SyntheticFit, BestRestartIsMinimum) {
  for (const auto& r : fit_->restarts) {
    if (std::isfinite(r.nll)) {
      EXPECT_LE(fit_->nll_per_sample, r.nll);
    }
  }
  EXPECT_EQ(fit_->restarts[fit_->best_restart].nll, fit_->nll_per_sample);
  EXPECT_EQ(dataset_nll(*records_, fit_->params, ModelVariant::Myopic), fit_->nll_per_sample);
}

TEST_F(SyntheticFit, BitIdenticalRefit) {
  const FitResult again = fit_model(*records_, ModelVariant::Myopic, 7);
  EXPECT_EQ(to_json(again).dump(), to_json(*fit_).dump());
  EXPECT_EQ(format_fit_report(again), format_fit_report(*fit_));
}

TEST_F(SyntheticFit, GradientVanishesAtInteriorOptimum) {
  const CompiledDataset data = compile_dataset(*records_, ModelVariant::Myopic);
  auto f = [&](const std::vector<double>& x) {
    return dataset_nll(data, params_from_vector(x, ModelVariant::Myopic));
  };
  const auto x = vector_from_params(fit_->params, ModelVariant::Myopic);
  const BoxBounds box = parameter_bounds(ModelVariant::Myopic);
  const auto g = finite_difference_gradient(f, x, box, LbfgsbOptions{});
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool interior = x[i] > box.lower[i] + 1e-6 && x[i] < box.upper[i] - 1e-6;
    if (interior) {
      EXPECT_LT(std::abs(g[i]), 1e-4) << "coordinate " << i;
    }
  }
}

TEST_F(SyntheticFit, JsonRoundTrip) {
  const FitResult back = fit_result_from_json(nlohmann::json::parse(to_json(*fit_).dump()));
  EXPECT_EQ(back.params, fit_->params);
  EXPECT_EQ(back.nll_per_sample, fit_->nll_per_sample);
  EXPECT_EQ(back.variant, fit_->variant);
  EXPECT_EQ(back.restarts.size(), fit_->restarts.size());
  EXPECT_EQ(back.dataset_digest, fit_->dataset_digest);
}

TEST(Fit, SingleTurnObjectiveDecreasesStrictly) {
  const std::vector<TurnRecord> records = {
      make_record("1WBB5/2BW1W3/1W1BW4/9", R"({"trees": [["3,3", ["2,2"]], ["1,4"], ["0,4", ["1,6"]]]})",
                  Coord{0, 4})};
  const CompiledDataset data = compile_dataset(records, ModelVariant::FullTree);
  auto f = [&](const std::vector<double>& x) {
    return dataset_nll(data, params_from_vector(x, ModelVariant::FullTree));
  };
  const auto r = minimize_box(f, restart_start(ModelVariant::FullTree, 1, 0), parameter_bounds(ModelVariant::FullTree));
  ASSERT_GE(r.f_history.size(), 2u);
  for (std::size_t i = 1; i < r.f_history.size(); ++i) ASSERT_LT(r.f_history[i], r.f_history[i - 1]);
  EXPECT_LT(r.f, r.f_history.front());
  const FitResult fit = fit_model(records, ModelVariant::FullTree, 1);
  EXPECT_LT(fit.nll_per_sample, 0.05);
}

TEST(Fit, DiscountRecoversHighGammaOnFullTreeData) {
  HeuristicParams gen = generator_params();
  gen.gamma = 1.0;
  const auto records = simulate_choices(stimuli(500, 21), gen, ModelVariant::FullTree, 22);
  const FitResult fit = fit_model(records, ModelVariant::Discount, 23);
  EXPECT_GE(fit.params.gamma, 0.9);
}

TEST(Fit, Errors) {
  EXPECT_THROW(fit_model({}, ModelVariant::Myopic, 1), InsufficientSamples);
}

TEST(Records, JsonLineRoundTrip) {
  const auto records = stimuli(20, 4);
  std::stringstream buf;
  write_records(buf, records);
  buf << R"({"game_id": "g", "white": "a", "black": "b", "result": "Draw"})" << "\n\n";
  const auto back = read_records(buf);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].fen, records[i].fen);
    EXPECT_EQ(back[i].chosen_move, records[i].chosen_move);
    EXPECT_EQ(back[i].tree->roots, records[i].tree->roots);
  }
  EXPECT_EQ(dataset_digest(back), dataset_digest(records));
}

TEST(Records, UnusableFieldsBecomeAbsent) {
  const TurnRecord r = record_from_line(
      R"({"game_id":"g","turn_index":0,"fen":"9/9/9/9","player":"White","chosen_move":"9,9","raw_response":"","tree":{"trees":[]},"model_name":"m"})");
  EXPECT_FALSE(r.chosen_move);
  EXPECT_FALSE(r.tree);
  EXPECT_EQ(r.tree_error, "EmptyForest");
  EXPECT_THROW(record_from_line(R"({"fen":"9/9/9/9","player":"Black"})"), MalformedRecord);
  EXPECT_THROW(record_from_line("not json"), MalformedRecord);
}

}  // namespace
}  // namespace fourplan
