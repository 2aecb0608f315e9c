#pragma once

// Search trees in the nested-list extraction format:
//   {"trees": Node[]}   Node := ["r,c", Node, Node, ...]
// Depth-1 nodes are the mover's candidate moves; sides alternate by depth.

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"

namespace fourplan {

struct TreeNode {
  Coord move;
  std::vector<TreeNode> children;

  bool is_leaf() const { return children.empty(); }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct SearchTree {
  std::vector<TreeNode> roots;
  /// FEN of the position the tree was searched from; empty when unknown.
  std::string source_fen;

  friend bool operator==(const SearchTree&, const SearchTree&) = default;
};

struct TreeParseOptions {
  /// Also accept "(r,c)" and "r, c" spellings.
  bool accept_tuple_coords = false;
};

namespace detail {

inline Coord parse_tree_coord(const nlohmann::json& v, const TreeParseOptions& opts) {
  if (!v.is_string()) throw MalformedDocument("node label must be a \"r,c\" string");
  const std::string raw = v.get<std::string>();
  if (!opts.accept_tuple_coords) return parse_coord(raw);
  std::string s;
  for (char ch : raw) {
    if (ch != ' ' && ch != '(' && ch != ')') s.push_back(ch);
  }
  return parse_coord(s);
}

/// Appends `node` to `siblings`, merging into an earlier sibling with the
/// same move so that every move appears once per parent in first-mention order.
inline void merge_into(std::vector<TreeNode>& siblings, TreeNode node) {
  auto it = std::find_if(siblings.begin(), siblings.end(),
                         [&](const TreeNode& n) { return n.move == node.move; });
  if (it == siblings.end()) {
    siblings.push_back(std::move(node));
    return;
  }
  for (auto& child : node.children) merge_into(it->children, std::move(child));
}

inline TreeNode parse_node(const nlohmann::json& v, const TreeParseOptions& opts) {
  if (!v.is_array() || v.empty()) {
    throw MalformedDocument("every node must be a non-empty array [\"r,c\", ...]");
  }
  TreeNode node{parse_tree_coord(v[0], opts), {}};
  for (std::size_t i = 1; i < v.size(); ++i) merge_into(node.children, parse_node(v[i], opts));
  return node;
}

inline void write_node(std::string& out, const TreeNode& n) {
  out += "[\"";
  out += to_string(n.move);
  out += '"';
  for (const auto& c : n.children) {
    out += ", ";
    write_node(out, c);
  }
  out += ']';
}

inline nlohmann::json node_to_json(const TreeNode& n) {
  auto arr = nlohmann::json::array();
  arr.push_back(to_string(n.move));
  for (const auto& c : n.children) arr.push_back(node_to_json(c));
  return arr;
}

}  // namespace detail

/// Parses an already-decoded extraction document. Throws MalformedDocument,
/// BadCoordinate, or EmptyForest.
inline SearchTree parse_trees(const nlohmann::json& doc, std::string source_fen = {},
                              const TreeParseOptions& opts = {}) {
  if (!doc.is_object() || !doc.contains("trees") || !doc.at("trees").is_array()) {
    throw MalformedDocument("expected an object {\"trees\": [...]}");
  }
  SearchTree tree;
  tree.source_fen = std::move(source_fen);
  for (const auto& node : doc.at("trees")) {
    detail::merge_into(tree.roots, detail::parse_node(node, opts));
  }
  if (tree.roots.empty()) throw EmptyForest("extraction document has no trees");
  return tree;
}

inline SearchTree parse_trees(std::string_view text, std::string source_fen = {},
                              const TreeParseOptions& opts = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(std::string("extraction document is not valid JSON: ") + e.what());
  }
  return parse_trees(doc, std::move(source_fen), opts);
}

inline SearchTree parse_trees(const char* text, std::string source_fen = {},
                              const TreeParseOptions& opts = {}) {
  return parse_trees(std::string_view(text), std::move(source_fen), opts);
}

inline SearchTree parse_trees(const std::string& text, std::string source_fen = {},
                              const TreeParseOptions& opts = {}) {
  return parse_trees(std::string_view(text), std::move(source_fen), opts);
}

/// Canonical document text, e.g. {"trees": [["2,4", ["1,3"], ["2,2"]], ["0,3"]]}
inline std::string serialize_trees(const SearchTree& tree) {
  std::string out = "{\"trees\": [";
  for (std::size_t i = 0; i < tree.roots.size(); ++i) {
    if (i) out += ", ";
    detail::write_node(out, tree.roots[i]);
  }
  out += "]}";
  return out;
}

inline nlohmann::json trees_to_json(const SearchTree& tree) {
  nlohmann::json doc;
  doc["trees"] = nlohmann::json::array();
  for (const auto& r : tree.roots) doc["trees"].push_back(detail::node_to_json(r));
  return doc;
}

struct TreeMetrics {
  int size = 0;
  int max_depth = 0;
  int breadth = 0;
  /// per_depth[d - 1] is the number of nodes at depth d.
  std::vector<int> per_depth;

  int nodes_at(int depth) const {
    return depth >= 1 && depth <= static_cast<int>(per_depth.size()) ? per_depth[depth - 1] : 0;
  }
  double breadth_depth_ratio() const {
    return max_depth > 0 ? static_cast<double>(breadth) / max_depth : 0.0;
  }
};

namespace detail {

inline void tally(const TreeNode& n, int depth, TreeMetrics& m) {
  if (static_cast<int>(m.per_depth.size()) < depth) m.per_depth.resize(depth, 0);
  ++m.per_depth[depth - 1];
  ++m.size;
  m.max_depth = std::max(m.max_depth, depth);
  for (const auto& c : n.children) tally(c, depth + 1, m);
}

}  // namespace detail

/// Counts explicit move nodes only; the implicit root position is not a node.
inline TreeMetrics measure(const SearchTree& tree) {
  TreeMetrics m;
  for (const auto& r : tree.roots) detail::tally(r, 1, m);
  m.breadth = static_cast<int>(tree.roots.size());
  return m;
}

struct TreeIssue {
  std::vector<Coord> path;  // moves from the root down to the offending node
  int depth = 0;
  std::string kind;         // "occupied"
};

struct ValidationReport {
  std::vector<TreeIssue> issues;
  /// Nodes below an illegal move, which cannot be replayed.
  int unchecked_nodes = 0;

  bool ok() const { return issues.empty(); }
};

namespace detail {

inline int subtree_size(const TreeNode& n) {
  int s = 1;
  for (const auto& c : n.children) s += subtree_size(c);
  return s;
}

inline void validate_node(const TreeNode& n, const BoardState& before,
                          std::vector<Coord>& path, ValidationReport& report) {
  path.push_back(n.move);
  if (auto after = before.try_place(n.move)) {
    for (const auto& c : n.children) validate_node(c, *after, path, report);
  } else {
    report.issues.push_back({path, static_cast<int>(path.size()), "occupied"});
    report.unchecked_nodes += subtree_size(n) - 1;
  }
  path.pop_back();
}

}  // namespace detail

/// Replays every path from `root` with alternating sides and reports nodes
/// whose cell is already taken at that point. Never throws.
inline ValidationReport validate_against_board(const SearchTree& tree, const BoardState& root) {
  ValidationReport report;
  std::vector<Coord> path;
  for (const auto& r : tree.roots) detail::validate_node(r, root, path, report);
  return report;
}

}  // namespace fourplan
