#pragma once

// Choice models: back up heuristic values through an extracted tree and turn
// the candidates' values into a softmax choice distribution.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"
#include "fourplan/heuristic.hpp"
#include "fourplan/tree.hpp"

namespace fourplan {

/// Backup rule. FullTree is minimax over the whole tree, Myopic scores the
/// depth-1 states only, Discount blends the two with gamma, NoTree scores
/// every legal move and ignores the tree.
enum class ModelVariant { FullTree, Myopic, Discount, NoTree };

inline constexpr std::array<ModelVariant, 4> kAllVariants = {
    ModelVariant::FullTree, ModelVariant::Myopic, ModelVariant::Discount, ModelVariant::NoTree};

inline std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::FullTree: return "fulltree";
    case ModelVariant::Myopic: return "myopic";
    case ModelVariant::Discount: return "discount";
    case ModelVariant::NoTree: return "notree";
  }
  return "fulltree";
}

inline std::optional<ModelVariant> variant_from_string(std::string_view s) {
  for (auto v : kAllVariants) {
    if (s == to_string(v)) return v;
  }
  if (s == "full-tree" || s == "full") return ModelVariant::FullTree;
  if (s == "no-tree") return ModelVariant::NoTree;
  return std::nullopt;
}

inline bool uses_tree(ModelVariant v) { return v != ModelVariant::NoTree; }

enum class IllegalPathPolicy {
  /// Treat the offending node as a leaf valued at the last legal state.
  Truncate,
  Throw,
};

struct PolicyOptions {
  IllegalPathPolicy illegal_paths = IllegalPathPolicy::Truncate;
};

struct PolicyDiagnostics {
  int truncated_nodes = 0;
};

namespace detail {

inline double backup(const TreeNode& node, const BoardState& before, int depth,
                     Player mover, const HeuristicParams& params, ModelVariant variant,
                     const PolicyOptions& opts, PolicyDiagnostics* diag) {
  const auto after = before.try_place(node.move);
  if (!after) {
    if (opts.illegal_paths == IllegalPathPolicy::Throw) {
      throw IllegalPath("move " + to_string(node.move) + " at depth " + std::to_string(depth) +
                        " targets an occupied cell");
    }
    if (diag) ++diag->truncated_nodes;
    return evaluate(before, params, mover);
  }
  const double h = evaluate(*after, params, mover);
  if (node.is_leaf() || variant == ModelVariant::Myopic || variant == ModelVariant::NoTree) {
    return h;
  }
  // Odd depth: the opponent moves next and minimises.
  const bool minimise = depth % 2 == 1;
  double ext = minimise ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
  for (const auto& child : node.children) {
    const double v = backup(child, *after, depth + 1, mover, params, variant, opts, diag);
    ext = minimise ? std::min(ext, v) : std::max(ext, v);
  }
  if (variant == ModelVariant::FullTree) return ext;
  return (1.0 - params.gamma) * h + params.gamma * ext;
}

}  // namespace detail

/// Backed-up value of a depth-1 node. `root` is the position before the
/// node's move; the heuristic always takes root.to_move() as "self".
inline double backup_value(const TreeNode& node, const BoardState& root,
                           const HeuristicParams& params, ModelVariant variant,
                           const PolicyOptions& opts = {}, PolicyDiagnostics* diag = nullptr) {
  return detail::backup(node, root, 1, root.to_move(), params, variant, opts, diag);
}

struct ChoiceDistribution {
  std::vector<Coord> candidates;
  std::vector<double> probs;
  std::vector<double> log_probs;

  /// Index of `move` among the candidates, or -1.
  int index_of(Coord move) const {
    auto it = std::find(candidates.begin(), candidates.end(), move);
    return it == candidates.end() ? -1 : static_cast<int>(it - candidates.begin());
  }
};

/// log(sum exp(v)) split as top + tail, where top is the largest value and
/// tail = log1p(sum of the other terms relative to it). Keeping the parts
/// apart lets v - top be formed exactly before the small tail is removed.
struct LogSumExp {
  double top;
  double tail;
};

inline LogSumExp log_sum_exp(const std::vector<double>& values) {
  const auto top_it = std::max_element(values.begin(), values.end());
  const double top = *top_it;
  double rest = 0.0;
  for (auto it = values.begin(); it != values.end(); ++it) {
    if (it != top_it) rest += std::exp(*it - top);
  }
  return {top, std::log1p(rest)};
}

/// Softmax computed through log-sum-exp so large values cannot overflow.
inline ChoiceDistribution softmax(std::vector<Coord> candidates, const std::vector<double>& values) {
  ChoiceDistribution d;
  d.candidates = std::move(candidates);
  const LogSumExp z = log_sum_exp(values);
  d.log_probs.reserve(values.size());
  d.probs.reserve(values.size());
  for (double v : values) {
    d.log_probs.push_back((v - z.top) - z.tail);
    d.probs.push_back(std::exp(d.log_probs.back()));
  }
  return d;
}

/// Candidates are the tree's depth-1 moves in mention order, or every legal
/// move in row-major order for NoTree.
inline ChoiceDistribution choice_distribution(const BoardState& root, const SearchTree* tree,
                                              const HeuristicParams& params, ModelVariant variant,
                                              const PolicyOptions& opts = {},
                                              PolicyDiagnostics* diag = nullptr) {
  std::vector<Coord> candidates;
  std::vector<double> values;
  if (variant == ModelVariant::NoTree) {
    if (is_terminal(root)) throw NoCandidates("terminal position has no legal moves");
    for (const Coord m : legal_moves(root)) {
      candidates.push_back(m);
      values.push_back(evaluate(*root.try_place(m), params, root.to_move()));
    }
  } else {
    if (!tree || tree->roots.empty()) throw NoCandidates("tree-based model needs a non-empty tree");
    for (const auto& node : tree->roots) {
      candidates.push_back(node.move);
      values.push_back(backup_value(node, root, params, variant, opts, diag));
    }
  }
  return softmax(std::move(candidates), values);
}

/// Most probable candidate; ties go to the earliest one.
inline Coord predict_move(const ChoiceDistribution& d) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.probs.size(); ++i) {
    if (d.log_probs[i] > d.log_probs[best]) best = i;
  }
  return d.candidates[best];
}

// ---------------------------------------------------------------------------
// Precompiled turns. Features do not depend on the parameters, so the fitter
// extracts them once per node and re-runs only the linear evaluation and the
// backup on every objective call. Results are bit-identical to the recursive
// path above.

struct CompiledNode {
  NodeFeatures features;
  int parent = -1;  // -1 for depth-1 nodes
  int depth = 1;
  bool leaf = true;
};

struct CompiledTurn {
  std::vector<Coord> candidates;
  /// Preorder; candidate k's node is nodes[candidate_nodes[k]].
  std::vector<CompiledNode> nodes;
  std::vector<int> candidate_nodes;
  int truncated_nodes = 0;
};

namespace detail {

inline void compile_node(const TreeNode& node, const BoardState& before, int depth, int parent,
                         Player mover, CompiledTurn& out) {
  const int self = static_cast<int>(out.nodes.size());
  const auto after = before.try_place(node.move);
  if (!after) {
    ++out.truncated_nodes;
    out.nodes.push_back({node_features(before, mover), parent, depth, true});
    return;
  }
  out.nodes.push_back({node_features(*after, mover), parent, depth, node.is_leaf()});
  for (const auto& child : node.children) compile_node(child, *after, depth + 1, self, mover, out);
}

}  // namespace detail

inline CompiledTurn compile_turn(const BoardState& root, const SearchTree* tree, ModelVariant variant) {
  CompiledTurn turn;
  const Player mover = root.to_move();
  if (variant == ModelVariant::NoTree) {
    if (is_terminal(root)) throw NoCandidates("terminal position has no legal moves");
    for (const Coord m : legal_moves(root)) {
      turn.candidates.push_back(m);
      turn.candidate_nodes.push_back(static_cast<int>(turn.nodes.size()));
      turn.nodes.push_back({node_features(*root.try_place(m), mover), -1, 1, true});
    }
    return turn;
  }
  if (!tree || tree->roots.empty()) throw NoCandidates("tree-based model needs a non-empty tree");
  for (const auto& r : tree->roots) {
    turn.candidates.push_back(r.move);
    turn.candidate_nodes.push_back(static_cast<int>(turn.nodes.size()));
    if (variant == ModelVariant::Myopic) {
      // Deeper nodes never influence the myopic value.
      TreeNode stub{r.move, {}};
      detail::compile_node(stub, root, 1, -1, mover, turn);
    } else {
      detail::compile_node(r, root, 1, -1, mover, turn);
    }
  }
  return turn;
}

/// Backed-up candidate values of a compiled turn. `scratch` is reused across
/// calls to avoid allocation in the fitting loop.
inline void candidate_values(const CompiledTurn& turn, const HeuristicParams& params,
                             ModelVariant variant, std::vector<double>& scratch,
                             std::vector<double>& values) {
  const std::size_t n = turn.nodes.size();
  values.resize(turn.candidates.size());
  if (variant == ModelVariant::Myopic || variant == ModelVariant::NoTree) {
    for (std::size_t k = 0; k < turn.candidates.size(); ++k) {
      values[k] = evaluate(turn.nodes[turn.candidate_nodes[k]].features, params);
    }
    return;
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  scratch.resize(2 * n);
  double* ext = scratch.data();
  double* value = scratch.data() + n;
  for (std::size_t i = 0; i < n; ++i) ext[i] = turn.nodes[i].depth % 2 == 1 ? inf : -inf;
  for (std::size_t i = n; i-- > 0;) {
    const CompiledNode& node = turn.nodes[i];
    double v;
    if (node.leaf) {
      v = evaluate(node.features, params);
    } else if (variant == ModelVariant::FullTree) {
      v = ext[i];
    } else {
      v = (1.0 - params.gamma) * evaluate(node.features, params) + params.gamma * ext[i];
    }
    value[i] = v;
    if (node.parent >= 0) {
      double& e = ext[node.parent];
      e = turn.nodes[node.parent].depth % 2 == 1 ? std::min(e, v) : std::max(e, v);
    }
  }
  for (std::size_t k = 0; k < turn.candidates.size(); ++k) values[k] = value[turn.candidate_nodes[k]];
}

/// log P(candidate k) under the softmax of `values`.
inline double log_softmax_at(const std::vector<double>& values, std::size_t k) {
  const LogSumExp z = log_sum_exp(values);
  return (values[k] - z.top) - z.tail;
}

}  // namespace fourplan
