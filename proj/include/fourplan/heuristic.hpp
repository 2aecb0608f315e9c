#pragma once

// Linear spatial-pattern value function over a board, plus the flat
// key-value parameter file.

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"
#include "fourplan/util.hpp"

namespace fourplan {

inline constexpr double kCentreRow = 1.5;
inline constexpr double kCentreCol = 4.0;
inline constexpr double kMinOffensiveBias = 0.25;
inline constexpr double kMaxOffensiveBias = 5.00;

/// Pattern census for one player.
struct FeatureCounts {
  double centre = 0.0;  // sum of inverse distances to the board centre
  int connected2 = 0;
  int unconnected2 = 0;
  int three = 0;
  int four = 0;

  std::array<double, 4> patterns() const {
    return {static_cast<double>(connected2), static_cast<double>(unconnected2),
            static_cast<double>(three), static_cast<double>(four)};
  }
  friend bool operator==(const FeatureCounts&, const FeatureCounts&) = default;
};

struct HeuristicParams {
  double w_centre = 0.0;
  /// connected two, unconnected two, three, four
  std::array<double, 4> w{0.0, 0.0, 0.0, 0.0};
  /// Offensive bias; multiplies the mover's own pattern counts.
  double C = 1.0;
  /// Discount for deeper backed-up values; only the discount model reads it.
  double gamma = 0.0;

  double& w_conn2() { return w[0]; }
  double& w_unconn2() { return w[1]; }
  double& w_three() { return w[2]; }
  double& w_four() { return w[3]; }
  double w_four() const { return w[3]; }

  friend bool operator==(const HeuristicParams&, const HeuristicParams&) = default;
};

inline double centre_weight(Coord c) {
  const double dr = c.row - kCentreRow;
  const double dc = c.col - kCentreCol;
  return 1.0 / std::sqrt(dr * dr + dc * dc);
}

/// Counts each of the 45 windows that holds no opponent piece once, by the
/// number of the player's pieces in it. A pair is "connected" when the two
/// pieces sit next to each other along the window's line.
inline FeatureCounts count_features(const BoardState& s, Player player) {
  const Cell own = cell_of(player);
  const Cell opp = cell_of(opponent(player));
  FeatureCounts f;
  for (int i = 0; i < kCells; ++i) {
    if (s.at_index(i) == own) f.centre += centre_weight(Coord::from_index(i));
  }
  for (const auto& w : window_indices()) {
    int mine = 0;
    int first = -1;
    int last = -1;
    bool blocked = false;
    for (int k = 0; k < 4; ++k) {
      const Cell c = s.at_index(w[k]);
      if (c == opp) {
        blocked = true;
        break;
      }
      if (c == own) {
        if (first < 0) first = k;
        last = k;
        ++mine;
      }
    }
    if (blocked) continue;
    switch (mine) {
      case 2:
        if (last - first == 1) {
          ++f.connected2;
        } else {
          ++f.unconnected2;
        }
        break;
      case 3: ++f.three; break;
      case 4: ++f.four; break;
      default: break;
    }
  }
  return f;
}

/// Feature census of a state from a fixed perspective; evaluating these is
/// all the fitter needs, so they are computed once per tree node.
struct NodeFeatures {
  double centre_diff = 0.0;
  std::array<double, 4> self{};
  std::array<double, 4> opp{};
};

inline NodeFeatures node_features(const BoardState& s, Player mover) {
  const FeatureCounts self = count_features(s, mover);
  const FeatureCounts opp = count_features(s, opponent(mover));
  return NodeFeatures{self.centre - opp.centre, self.patterns(), opp.patterns()};
}

inline double evaluate(const NodeFeatures& f, const HeuristicParams& p) {
  double h = p.w_centre * f.centre_diff;
  for (int i = 0; i < 4; ++i) h += p.w[i] * (p.C * f.self[i] - f.opp[i]);
  return h;
}

/// Heuristic value of `s` for `mover`; C scales only the mover's pattern
/// counts, never the centre term.
inline double evaluate(const BoardState& s, const HeuristicParams& p, Player mover) {
  return evaluate(node_features(s, mover), p);
}

// ---------------------------------------------------------------------------
// Parameter files: one "key = value" per line, '#' starts a comment.

inline constexpr std::array<const char*, 7> kParamKeys = {
    "w_centre", "w_conn2", "w_unconn2", "w_three", "w_four", "C", "gamma"};

inline std::string format_params(const HeuristicParams& p) {
  std::ostringstream out;
  out << "w_centre = " << format_double(p.w_centre) << "\n"
      << "w_conn2 = " << format_double(p.w[0]) << "\n"
      << "w_unconn2 = " << format_double(p.w[1]) << "\n"
      << "w_three = " << format_double(p.w[2]) << "\n"
      << "w_four = " << format_double(p.w[3]) << "\n"
      << "C = " << format_double(p.C) << "\n"
      << "gamma = " << format_double(p.gamma) << "\n";
  return out.str();
}

inline void check_param_bounds(const HeuristicParams& p) {
  if (!(p.C >= kMinOffensiveBias && p.C <= kMaxOffensiveBias)) {
    throw ConfigError("C = " + format_double(p.C) + " outside [0.25, 5]");
  }
  if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) {
    throw ConfigError("gamma = " + format_double(p.gamma) + " outside [0, 1]");
  }
}

inline HeuristicParams parse_params(const std::string& text) {
  std::map<std::string, double> values;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto sep = line.find_first_of("=:");
    std::string key = line.substr(0, sep);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    if (key.empty() && sep == std::string::npos) continue;
    if (sep == std::string::npos) {
      throw ConfigError("parameter line " + std::to_string(lineno) + " has no '='");
    }
    bool known = false;
    for (const char* k : kParamKeys) known = known || key == k;
    if (!known) throw ConfigError("unknown parameter '" + key + "'");
    double v = 0.0;
    if (!parse_double(std::string_view(line).substr(sep + 1), v)) {
      throw ConfigError("parameter '" + key + "' is not a decimal number");
    }
    values[key] = v;
  }
  for (const char* k : kParamKeys) {
    if (std::string(k) != "gamma" && !values.count(k)) {
      throw ConfigError(std::string("missing parameter '") + k + "'");
    }
  }
  HeuristicParams p;
  p.w_centre = values["w_centre"];
  p.w = {values["w_conn2"], values["w_unconn2"], values["w_three"], values["w_four"]};
  p.C = values["C"];
  p.gamma = values.count("gamma") ? values["gamma"] : 0.0;
  check_param_bounds(p);
  return p;
}

inline HeuristicParams load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open parameter file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_params(buf.str());
}

}  // namespace fourplan
