#pragma once

// Paragraph-level editing of reasoning traces: split a trace at blank lines,
// attach per-paragraph labels, and remove or restore paragraphs according to
// a pruning strategy.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"
#include "fourplan/util.hpp"

namespace fourplan {

inline constexpr double kMaxRemovalFraction = 0.85;

struct Paragraph {
  std::size_t offset = 0;
  std::string text;
  /// The blank-line run that follows the paragraph (empty for the last one
  /// when the trace has no trailing newlines).
  std::string separator;
};

struct SplitTrace {
  /// Blank lines before the first paragraph.
  std::string leading;
  std::vector<Paragraph> paragraphs;

  std::string reconstruct() const {
    std::string out = leading;
    for (const auto& p : paragraphs) out += p.text + p.separator;
    return out;
  }
};

namespace detail {

inline bool blank_line(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); });
}

}  // namespace detail

/// Paragraphs are separated by one or more blank (whitespace-only) lines.
/// A single newline stays inside its paragraph.
inline SplitTrace split_paragraphs(std::string_view trace) {
  // Cut the trace into lines, keeping each line's terminator.
  struct Line {
    std::size_t begin, end;
    bool blank;
  };
  std::vector<Line> lines;
  for (std::size_t pos = 0; pos < trace.size();) {
    const auto nl = trace.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? trace.size() : nl + 1;
    std::string_view body = trace.substr(pos, end - pos);
    if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    lines.push_back({pos, end, detail::blank_line(body)});
    pos = end;
  }
  SplitTrace out;
  std::size_t i = 0;
  while (i < lines.size() && lines[i].blank) ++i;
  out.leading = std::string(trace.substr(0, i < lines.size() ? lines[i].begin : trace.size()));
  while (i < lines.size()) {
    Paragraph p;
    p.offset = lines[i].begin;
    std::size_t text_end = lines[i].end;
    ++i;
    while (i < lines.size() && !lines[i].blank) text_end = lines[i++].end;
    // The paragraph's own final newline belongs to the separator.
    std::size_t cut = text_end;
    if (cut > p.offset && trace[cut - 1] == '\n') --cut;
    p.text = std::string(trace.substr(p.offset, cut - p.offset));
    std::size_t sep_end = text_end;
    while (i < lines.size() && lines[i].blank) sep_end = lines[i++].end;
    p.separator = std::string(trace.substr(cut, sep_end - cut));
    out.paragraphs.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels.

enum class ParagraphType {
  Preamble,
  BranchStart,
  BranchAnalysis,
  BranchConclusion,
  Comparison,
  FinalDecision,
  Meta,
};

inline std::string_view to_string(ParagraphType t) {
  switch (t) {
    case ParagraphType::Preamble: return "PREAMBLE";
    case ParagraphType::BranchStart: return "BRANCH_START";
    case ParagraphType::BranchAnalysis: return "BRANCH_ANALYSIS";
    case ParagraphType::BranchConclusion: return "BRANCH_CONCLUSION";
    case ParagraphType::Comparison: return "COMPARISON";
    case ParagraphType::FinalDecision: return "FINAL_DECISION";
    case ParagraphType::Meta: return "META";
  }
  return "META";
}

inline std::optional<ParagraphType> paragraph_type_from_string(std::string_view s) {
  for (auto t : {ParagraphType::Preamble, ParagraphType::BranchStart, ParagraphType::BranchAnalysis,
                 ParagraphType::BranchConclusion, ParagraphType::Comparison, ParagraphType::FinalDecision,
                 ParagraphType::Meta}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

inline bool is_branch_type(ParagraphType t) {
  return t == ParagraphType::BranchStart || t == ParagraphType::BranchAnalysis ||
         t == ParagraphType::BranchConclusion;
}

struct Mention {
  Coord coord;
  int depth = 1;
  friend bool operator==(const Mention&, const Mention&) = default;
};

struct ParagraphLabel {
  int para = 0;
  ParagraphType type = ParagraphType::Preamble;
  std::optional<Coord> branch_root;
  std::vector<Mention> mentions;
  friend bool operator==(const ParagraphLabel&, const ParagraphLabel&) = default;
};

inline ParagraphLabel label_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw MalformedDocument("label must be an object");
  ParagraphLabel l;
  try {
    l.para = j.at("para").get<int>();
    const auto type = paragraph_type_from_string(j.at("type").get<std::string>());
    if (!type) throw MalformedDocument("unknown paragraph type " + j.at("type").dump());
    l.type = *type;
    if (j.contains("branch_root") && !j.at("branch_root").is_null()) {
      l.branch_root = parse_coord(j.at("branch_root").get<std::string>());
    }
    if (j.contains("mentions")) {
      for (const auto& m : j.at("mentions")) {
        Mention x{parse_coord(m.at("coord").get<std::string>()), m.at("depth").get<int>()};
        if (x.depth < 1) throw MalformedDocument("mention depth must be at least 1");
        l.mentions.push_back(x);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedDocument(std::string("bad label field: ") + e.what());
  }
  const bool wants_root = is_branch_type(l.type);
  if (wants_root != l.branch_root.has_value()) {
    throw MalformedDocument("paragraph " + std::to_string(l.para) + " of type " +
                            std::string(to_string(l.type)) +
                            (wants_root ? " needs a branch_root" : " must not have a branch_root"));
  }
  return l;
}

inline nlohmann::ordered_json to_json(const ParagraphLabel& l) {
  nlohmann::ordered_json j;
  j["para"] = l.para;
  j["type"] = std::string(to_string(l.type));
  j["branch_root"] = l.branch_root ? nlohmann::ordered_json(to_string(*l.branch_root)) : nlohmann::ordered_json(nullptr);
  j["mentions"] = nlohmann::ordered_json::array();
  for (const auto& m : l.mentions) j["mentions"].push_back({{"coord", to_string(m.coord)}, {"depth", m.depth}});
  return j;
}

/// Accepts a JSON array of labels or one label object per line. Paragraph
/// indices must run contiguously from 0.
inline std::vector<ParagraphLabel> parse_labels(std::string_view text) {
  std::vector<ParagraphLabel> out;
  std::string_view trimmed = text;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
  try {
    if (!trimmed.empty() && trimmed.front() == '[') {
      for (const auto& j : nlohmann::json::parse(trimmed)) out.push_back(label_from_json(j));
    } else {
      std::istringstream in{std::string(text)};
      std::string line;
      while (std::getline(in, line)) {
        if (detail::blank_line(line)) continue;
        out.push_back(label_from_json(nlohmann::json::parse(line)));
      }
    }
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(std::string("label file is not valid JSON: ") + e.what());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.para < b.para; });
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].para != static_cast<int>(i)) {
      throw MalformedDocument("paragraph indices must run contiguously from 0");
    }
  }
  return out;
}

inline std::vector<ParagraphLabel> read_labels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open label file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_labels(buf.str());
}

// ---------------------------------------------------------------------------
// Strategies.

enum class EditKind { RemoveFinalDecision, RemoveFinalPlusBranch, AddBackDepth1, AddBackDepth1And2 };

inline std::string_view to_string(EditKind k) {
  switch (k) {
    case EditKind::RemoveFinalDecision: return "remove-final";
    case EditKind::RemoveFinalPlusBranch: return "remove-branch";
    case EditKind::AddBackDepth1: return "add-back-depth1";
    case EditKind::AddBackDepth1And2: return "add-back-depth12";
  }
  return "remove-final";
}

inline std::optional<EditKind> edit_kind_from_string(std::string_view s) {
  for (auto k : {EditKind::RemoveFinalDecision, EditKind::RemoveFinalPlusBranch, EditKind::AddBackDepth1,
                 EditKind::AddBackDepth1And2}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

struct EditStrategy {
  EditKind kind = EditKind::RemoveFinalDecision;
  /// Branch root for every kind except RemoveFinalDecision.
  std::optional<Coord> target;
};

struct Span {
  std::size_t offset = 0;
  std::size_t length = 0;
  bool removed = false;
};

struct EditResult {
  std::string original;
  std::string edited;
  EditStrategy strategy;
  std::vector<int> removed_paragraphs;
  /// Contiguous pieces of the original in order; removed neighbours merged.
  std::vector<Span> spans;
  double removal_fraction = 0.0;
  bool rejected = false;

  std::string reconstruct() const {
    std::string out;
    for (const auto& s : spans) out += original.substr(s.offset, s.length);
    return out;
  }
};

/// Whether `text` names `c` as "r,c", "r, c" or "m r c".
inline bool text_mentions(std::string_view text, Coord c) {
  const std::string r = std::to_string(c.row);
  const std::string k = std::to_string(c.col);
  const std::regex pattern("(^|[^0-9])(" + r + "\\s*,\\s*" + k + "|m " + r + " " + k + ")([^0-9]|$)");
  return std::regex_search(text.begin(), text.end(), pattern);
}

/// Paragraphs the strategy removes, as a per-paragraph mask.
inline std::vector<bool> removal_mask(const SplitTrace& trace, const std::vector<ParagraphLabel>& labels,
                                      const EditStrategy& strategy) {
  const std::size_t n = trace.paragraphs.size();
  if (labels.size() < n) {
    throw UnlabeledParagraph("paragraph " + std::to_string(labels.size()) + " has no label");
  }
  if (labels.size() > n) {
    throw MalformedDocument("labels cover " + std::to_string(labels.size()) + " paragraphs but the trace has " +
                            std::to_string(n));
  }
  std::vector<bool> mask(n, false);
  for (std::size_t i = 0; i < n; ++i) mask[i] = labels[i].type == ParagraphType::FinalDecision;
  if (strategy.kind == EditKind::RemoveFinalDecision) return mask;

  if (!strategy.target) throw ConfigError(std::string(to_string(strategy.kind)) + " needs a target branch");
  const Coord t = *strategy.target;
  bool known = false;
  for (const auto& l : labels) known = known || l.branch_root == t;
  if (!known) throw UnknownTarget("no paragraph belongs to branch " + to_string(t));

  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = labels[i];
    if (l.branch_root == t) mask[i] = true;
    if (l.type == ParagraphType::Comparison) {
      const bool listed = std::any_of(l.mentions.begin(), l.mentions.end(), [&](const Mention& m) { return m.coord == t; });
      if (listed || text_mentions(trace.paragraphs[i].text, t)) mask[i] = true;
    }
  }
  if (strategy.kind == EditKind::RemoveFinalPlusBranch) return mask;

  const int max_depth = strategy.kind == EditKind::AddBackDepth1 ? 1 : 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = labels[i];
    if (!is_branch_type(l.type) || l.branch_root != t || l.mentions.empty()) continue;
    const bool shallow = std::all_of(l.mentions.begin(), l.mentions.end(),
                                     [&](const Mention& m) { return m.depth <= max_depth; });
    if (shallow) mask[i] = false;
  }
  return mask;
}

namespace detail {

inline std::string collapse_whitespace(std::string s) {
  static const std::regex many_newlines("\n([ \t]*\n){2,}");
  s = std::regex_replace(s, many_newlines, "\n\n");
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

}  // namespace detail

/// Removes the strategy's paragraphs. A paragraph leaves together with the
/// blank lines after it. The result is rejected when more than 85% of the
/// original characters would go.
inline EditResult apply_strategy(std::string_view trace, const std::vector<ParagraphLabel>& labels,
                                 const EditStrategy& strategy) {
  const SplitTrace split = split_paragraphs(trace);
  const std::vector<bool> mask = removal_mask(split, labels, strategy);
  EditResult out;
  out.original = std::string(trace);
  out.strategy = strategy;
  auto add_span = [&](std::size_t offset, std::size_t length, bool removed) {
    if (length == 0) return;
    if (!out.spans.empty() && out.spans.back().removed == removed) {
      out.spans.back().length += length;
    } else {
      out.spans.push_back({offset, length, removed});
    }
  };
  add_span(0, split.leading.size(), false);
  std::size_t removed_chars = 0;
  std::string kept;
  kept += split.leading;
  for (std::size_t i = 0; i < split.paragraphs.size(); ++i) {
    const auto& p = split.paragraphs[i];
    const std::size_t len = p.text.size() + p.separator.size();
    add_span(p.offset, len, mask[i]);
    if (mask[i]) {
      out.removed_paragraphs.push_back(static_cast<int>(i));
      removed_chars += len;
    } else {
      kept += p.text + p.separator;
    }
  }
  out.removal_fraction = trace.empty() ? 0.0 : static_cast<double>(removed_chars) / static_cast<double>(trace.size());
  out.rejected = out.removal_fraction > kMaxRemovalFraction;
  out.edited = out.rejected ? std::string() : detail::collapse_whitespace(kept);
  return out;
}

/// The unchosen branch with the most paragraphs; ties go to the branch that
/// starts first.
inline std::optional<Coord> largest_unchosen_branch(const std::vector<ParagraphLabel>& labels, Coord chosen) {
  std::map<Coord, std::pair<int, int>> size_and_first;
  for (const auto& l : labels) {
    if (!l.branch_root || *l.branch_root == chosen) continue;
    auto [it, fresh] = size_and_first.try_emplace(*l.branch_root, 0, l.para);
    ++it->second.first;
    it->second.second = std::min(it->second.second, l.para);
  }
  std::optional<Coord> best;
  int best_size = 0, best_first = 0;
  for (const auto& [root, sf] : size_and_first) {
    if (!best || sf.first > best_size || (sf.first == best_size && sf.second < best_first)) {
      best = root;
      best_size = sf.first;
      best_first = sf.second;
    }
  }
  return best;
}

inline nlohmann::ordered_json to_json(const EditResult& r) {
  nlohmann::ordered_json j;
  j["strategy"] = std::string(to_string(r.strategy.kind));
  j["target"] = r.strategy.target ? nlohmann::ordered_json(to_string(*r.strategy.target)) : nlohmann::ordered_json(nullptr);
  j["original"] = r.original;
  j["edited"] = r.rejected ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.edited);
  j["removal_fraction"] = r.removal_fraction;
  j["rejected"] = r.rejected;
  j["removed_paragraphs"] = r.removed_paragraphs;
  return j;
}

// ---------------------------------------------------------------------------
// Outcomes of re-running an agent on edited traces.

struct RerunOutcome {
  Coord original_move;
  Coord new_move;
  /// First-ply candidates of the original tree.
  std::set<Coord> candidates;
};

struct ChangeRates {
  std::optional<double> rate;
  /// Among changed moves, the share that landed on another original candidate.
  std::optional<double> in_tree_rate;
  int n = 0;
  int changed = 0;
};

inline ChangeRates change_rate(const std::vector<RerunOutcome>& outcomes) {
  ChangeRates out;
  out.n = static_cast<int>(outcomes.size());
  if (outcomes.empty()) return out;
  int in_tree = 0;
  for (const auto& o : outcomes) {
    if (o.new_move == o.original_move) continue;
    ++out.changed;
    if (o.candidates.count(o.new_move)) ++in_tree;
  }
  out.rate = static_cast<double>(out.changed) / out.n;
  if (out.changed > 0) out.in_tree_rate = static_cast<double>(in_tree) / out.changed;
  return out;
}

}  // namespace fourplan
