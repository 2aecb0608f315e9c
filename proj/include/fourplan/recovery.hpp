#pragma once

// Synthetic choices drawn from a fitted choice model, and the two-condition
// model-recovery test (FullTree-generated versus Myopic-generated data).

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fourplan/board.hpp"
#include "fourplan/fit.hpp"
#include "fourplan/policy.hpp"
#include "fourplan/records.hpp"
#include "fourplan/util.hpp"

namespace fourplan {

struct StimulusOptions {
  int min_pieces = 4;
  int max_pieces = 16;
  int min_breadth = 2;
  int max_breadth = 6;
  int min_depth = 1;
  int max_depth = 4;
  /// Children per internal node below the first ply.
  int min_children = 1;
  int max_children = 3;
};

namespace detail {

inline BoardState random_position(Rng& rng, const StimulusOptions& opts) {
  for (;;) {
    BoardState s;
    const int k = uniform_int(rng, opts.min_pieces, opts.max_pieces);
    bool ok = true;
    for (int i = 0; i < k && ok; ++i) {
      const auto moves = legal_moves(s);
      s = apply_move(s, moves[uniform_int(rng, 0, static_cast<int>(moves.size()) - 1)]);
      ok = !is_terminal(s);
    }
    if (ok) return s;
  }
}

/// Up to `n` distinct empty cells, in draw order.
inline std::vector<Coord> distinct_moves(Rng& rng, const BoardState& s, int n) {
  std::vector<Coord> pool = legal_moves(s);
  std::vector<Coord> out;
  while (static_cast<int>(out.size()) < n && !pool.empty()) {
    const int j = uniform_int(rng, 0, static_cast<int>(pool.size()) - 1);
    out.push_back(pool[j]);
    pool.erase(pool.begin() + j);
  }
  return out;
}

inline void grow_stimulus(Rng& rng, TreeNode& node, const BoardState& state, int depth,
                          int target_depth, const StimulusOptions& opts) {
  if (depth >= target_depth || is_terminal(state)) return;
  const int n = uniform_int(rng, opts.min_children, opts.max_children);
  for (Coord m : distinct_moves(rng, state, n)) {
    node.children.push_back({m, {}});
    grow_stimulus(rng, node.children.back(), apply_move(state, m), depth + 1, target_depth, opts);
  }
}

}  // namespace detail

/// Random non-terminal positions with random legal trees. Every turn's tree
/// has a breadth in [min_breadth, max_breadth] and every path runs to the
/// turn's drawn depth unless the game ends first. chosen_move is the first
/// root until a simulation replaces it.
inline std::vector<TurnRecord> random_stimuli(int n, std::uint64_t seed,
                                              const StimulusOptions& opts = {}) {
  Rng rng(derive_seed(seed, "stimuli"));
  std::vector<TurnRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const BoardState root = detail::random_position(rng, opts);
    const int breadth = uniform_int(rng, opts.min_breadth, opts.max_breadth);
    const int depth = uniform_int(rng, opts.min_depth, opts.max_depth);
    SearchTree tree;
    tree.source_fen = to_fen(root);
    for (Coord m : detail::distinct_moves(rng, root, breadth)) {
      tree.roots.push_back({m, {}});
      detail::grow_stimulus(rng, tree.roots.back(), apply_move(root, m), 1, depth, opts);
    }
    TurnRecord r;
    r.game_id = "synthetic";
    r.turn_index = i;
    r.fen = to_fen(root);
    r.player = root.to_move();
    r.chosen_move = tree.roots.front().move;
    r.tree = std::move(tree);
    r.model_name = "synthetic";
    out.push_back(std::move(r));
  }
  return out;
}

/// Replaces every chosen_move with a draw from the model's choice
/// distribution. One stream per call, consumed in record order.
inline std::vector<TurnRecord> simulate_choices(std::vector<TurnRecord> records,
                                                const HeuristicParams& params,
                                                ModelVariant variant, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "simulate/" + std::string(to_string(variant))));
  for (auto& r : records) {
    const SearchTree* tree = r.tree ? &*r.tree : nullptr;
    const ChoiceDistribution d = choice_distribution(r.board(), tree, params, variant);
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t pick = d.probs.size() - 1;
    for (std::size_t k = 0; k < d.probs.size(); ++k) {
      acc += d.probs[k];
      if (u < acc) {
        pick = k;
        break;
      }
    }
    r.chosen_move = d.candidates[pick];
  }
  return records;
}

struct RecoveryOutcome {
  ModelVariant generator = ModelVariant::FullTree;
  /// Per-sample NLL of the refitted Myopic model minus that of the refitted
  /// FullTree model on the synthetic data.
  double delta = 0.0;
  bool recovered = false;
  int n = 0;
  std::uint64_t seed = 0;
  double nll_myopic = 0.0;
  double nll_fulltree = 0.0;
};

inline RecoveryOutcome recovery_condition(const std::vector<TurnRecord>& records,
                                          const HeuristicParams& generating,
                                          ModelVariant generator, std::uint64_t seed,
                                          const FitOptions& fit_opts = {}) {
  const std::string tag = "recovery/" + std::string(to_string(generator));
  const auto synthetic = simulate_choices(records, generating, generator, derive_seed(seed, tag + "/simulate"));
  const FitResult full = fit_model(synthetic, ModelVariant::FullTree, derive_seed(seed, tag + "/fit"), fit_opts);
  const FitResult myopic = fit_model(synthetic, ModelVariant::Myopic, derive_seed(seed, tag + "/fit"), fit_opts);
  RecoveryOutcome out;
  out.generator = generator;
  out.n = static_cast<int>(records.size());
  out.seed = seed;
  out.nll_fulltree = full.nll_per_sample;
  out.nll_myopic = myopic.nll_per_sample;
  out.delta = myopic.nll_per_sample - full.nll_per_sample;
  out.recovered = generator == ModelVariant::FullTree ? out.delta > 0 : out.delta < 0;
  return out;
}

/// Condition 1 generates from FullTree, condition 2 from Myopic; both refit
/// each variant from fresh restarts.
inline std::pair<RecoveryOutcome, RecoveryOutcome> recovery_test(
    const std::vector<TurnRecord>& records, const HeuristicParams& fitted_full,
    const HeuristicParams& fitted_myopic, std::uint64_t seed, const FitOptions& fit_opts = {}) {
  HeuristicParams full = fitted_full;
  full.gamma = 1.0;
  HeuristicParams myopic = fitted_myopic;
  myopic.gamma = 0.0;
  return {recovery_condition(records, full, ModelVariant::FullTree, seed, fit_opts),
          recovery_condition(records, myopic, ModelVariant::Myopic, seed, fit_opts)};
}

inline nlohmann::ordered_json to_json(const RecoveryOutcome& o, const std::string& model_name = {}) {
  nlohmann::ordered_json j;
  j["model_name"] = model_name;
  j["condition"] = o.generator == ModelVariant::FullTree ? 1 : 2;
  j["generator"] = std::string(to_string(o.generator));
  j["delta"] = o.delta;
  j["recovered"] = o.recovered;
  j["n"] = o.n;
  j["seed"] = o.seed;
  j["nll_myopic"] = o.nll_myopic;
  j["nll_fulltree"] = o.nll_fulltree;
  return j;
}

}  // namespace fourplan
