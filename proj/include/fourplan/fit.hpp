#pragma once

// Dataset exclusion rules, the choice-model likelihood and multi-restart
// bounded maximum-likelihood fitting.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"
#include "fourplan/heuristic.hpp"
#include "fourplan/lbfgsb.hpp"
#include "fourplan/policy.hpp"
#include "fourplan/records.hpp"
#include "fourplan/util.hpp"

namespace fourplan {

/// Models with fewer surviving turns than this are not fitted.
inline constexpr int kMinTurnsPerModel = 20;

enum class ExclusionReason { InvalidMove, NoTree, DegenerateTree, ChosenNotInTree };

inline std::string_view to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::InvalidMove: return "InvalidMove";
    case ExclusionReason::NoTree: return "NoTree";
    case ExclusionReason::DegenerateTree: return "DegenerateTree";
    case ExclusionReason::ChosenNotInTree: return "ChosenNotInTree";
  }
  return "InvalidMove";
}

/// First matching reason in priority order, or nullopt if the turn is usable.
inline std::optional<ExclusionReason> exclusion_reason(const TurnRecord& r) {
  if (!r.chosen_move) return ExclusionReason::InvalidMove;
  const BoardState board = r.board();
  if (is_terminal(board) || !board.try_place(*r.chosen_move)) return ExclusionReason::InvalidMove;
  if (!r.tree) return ExclusionReason::NoTree;
  if (r.tree->roots.size() < 2) return ExclusionReason::DegenerateTree;
  for (const auto& node : r.tree->roots) {
    if (node.move == *r.chosen_move) return std::nullopt;
  }
  return ExclusionReason::ChosenNotInTree;
}

struct FilterResult {
  std::vector<TurnRecord> kept;
  std::vector<std::pair<TurnRecord, ExclusionReason>> excluded;
  /// Every model name seen; false when fewer than kMinTurnsPerModel survive.
  std::map<std::string, bool> model_ok;
  std::map<std::string, int> kept_per_model;
};

inline FilterResult filter_dataset(const std::vector<TurnRecord>& records) {
  FilterResult out;
  for (const auto& r : records) {
    out.kept_per_model.try_emplace(r.model_name, 0);
    if (auto reason = exclusion_reason(r)) {
      out.excluded.emplace_back(r, *reason);
    } else {
      out.kept.push_back(r);
      ++out.kept_per_model[r.model_name];
    }
  }
  for (const auto& [name, n] : out.kept_per_model) out.model_ok[name] = n >= kMinTurnsPerModel;
  return out;
}

/// Records compiled once for repeated likelihood evaluation.
struct CompiledDataset {
  ModelVariant variant = ModelVariant::Myopic;
  std::vector<CompiledTurn> turns;
  std::vector<int> chosen;  // candidate index of the chosen move per turn
};

inline CompiledDataset compile_dataset(const std::vector<TurnRecord>& records, ModelVariant variant) {
  CompiledDataset out;
  out.variant = variant;
  out.turns.reserve(records.size());
  for (const auto& r : records) {
    const BoardState root = r.board();
    const SearchTree* tree = r.tree ? &*r.tree : nullptr;
    CompiledTurn turn = compile_turn(root, tree, variant);
    int chosen = -1;
    if (r.chosen_move) {
      for (std::size_t k = 0; k < turn.candidates.size(); ++k) {
        if (turn.candidates[k] == *r.chosen_move) chosen = static_cast<int>(k);
      }
    }
    if (chosen < 0) {
      throw ChosenNotCandidate("turn " + r.game_id + "/" + std::to_string(r.turn_index) +
                               ": chosen move is not a candidate");
    }
    out.turns.push_back(std::move(turn));
    out.chosen.push_back(chosen);
  }
  return out;
}

/// Mean negative log-likelihood of the chosen moves. Terms are summed in
/// record order.
inline double dataset_nll(const CompiledDataset& data, const HeuristicParams& params) {
  if (data.turns.empty()) return 0.0;
  std::vector<double> scratch, values;
  double total = 0.0;
  for (std::size_t t = 0; t < data.turns.size(); ++t) {
    candidate_values(data.turns[t], params, data.variant, scratch, values);
    total -= log_softmax_at(values, static_cast<std::size_t>(data.chosen[t]));
  }
  return total / static_cast<double>(data.turns.size());
}

inline double dataset_nll(const std::vector<TurnRecord>& records, const HeuristicParams& params,
                          ModelVariant variant) {
  return dataset_nll(compile_dataset(records, variant), params);
}

/// Fraction of turns whose most probable candidate is the chosen move.
inline double dataset_accuracy(const CompiledDataset& data, const HeuristicParams& params) {
  if (data.turns.empty()) return 0.0;
  std::vector<double> scratch, values;
  int hits = 0;
  for (std::size_t t = 0; t < data.turns.size(); ++t) {
    candidate_values(data.turns[t], params, data.variant, scratch, values);
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
      if (values[k] > values[best]) best = k;
    }
    hits += static_cast<int>(best) == data.chosen[t] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.turns.size());
}

/// Stable fingerprint of the stimulus/choice content of a dataset.
inline std::string dataset_digest(const std::vector<TurnRecord>& records) {
  std::uint64_t h = fnv1a("");
  for (const auto& r : records) {
    h = fnv1a(r.fen, h);
    h = fnv1a(r.chosen_move ? to_string(*r.chosen_move) : "-", h);
    h = fnv1a(r.tree ? serialize_trees(*r.tree) : "-", h);
    h = fnv1a("\n", h);
  }
  std::ostringstream s;
  s << std::hex << h;
  return s.str();
}

struct FitOptions {
  int n_restarts = 20;
  LbfgsbOptions optimizer{};
};

struct RestartInfo {
  double nll = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string stop_reason;
};

struct FitResult {
  ModelVariant variant = ModelVariant::Myopic;
  HeuristicParams params;
  double nll_per_sample = std::numeric_limits<double>::quiet_NaN();
  double accuracy = 0.0;
  int n_samples = 0;
  std::vector<RestartInfo> restarts;
  std::uint64_t seed = 0;
  int best_restart = -1;
  std::string model_name;
  std::string dataset_digest;
  FitOptions options;
};

// Parameter vector layout: w_centre, w_conn2, w_unconn2, w_three, w_four,
// log C, and gamma for the discount model only.
inline int parameter_count(ModelVariant v) { return v == ModelVariant::Discount ? 7 : 6; }

inline HeuristicParams params_from_vector(const std::vector<double>& x, ModelVariant v) {
  HeuristicParams p;
  p.w_centre = x[0];
  p.w = {x[1], x[2], x[3], x[4]};
  p.C = std::exp(x[5]);
  switch (v) {
    case ModelVariant::Discount: p.gamma = x[6]; break;
    case ModelVariant::FullTree: p.gamma = 1.0; break;
    default: p.gamma = 0.0; break;
  }
  return p;
}

inline std::vector<double> vector_from_params(const HeuristicParams& p, ModelVariant v) {
  std::vector<double> x = {p.w_centre, p.w[0], p.w[1], p.w[2], p.w[3], std::log(p.C)};
  if (v == ModelVariant::Discount) x.push_back(p.gamma);
  return x;
}

inline BoxBounds parameter_bounds(ModelVariant v) {
  BoxBounds box = BoxBounds::unbounded(static_cast<std::size_t>(parameter_count(v)));
  box.lower[5] = std::log(kMinOffensiveBias);
  box.upper[5] = std::log(kMaxOffensiveBias);
  if (v == ModelVariant::Discount) {
    box.lower[6] = 0.0;
    box.upper[6] = 1.0;
  }
  return box;
}

/// Restart k starts from weights ~ U[-1, 1], log C ~ U[log 0.25, log 5] and
/// gamma ~ U[0, 1], drawn from derive_seed(seed, "fit/<variant>/restart/<k>").
inline std::vector<double> restart_start(ModelVariant v, std::uint64_t seed, int k) {
  Rng rng(derive_seed(seed, "fit/" + std::string(to_string(v)) + "/restart/" + std::to_string(k)));
  std::vector<double> x(static_cast<std::size_t>(parameter_count(v)));
  for (int i = 0; i < 5; ++i) x[i] = uniform(rng, -1.0, 1.0);
  x[5] = uniform(rng, std::log(kMinOffensiveBias), std::log(kMaxOffensiveBias));
  if (v == ModelVariant::Discount) x[6] = uniform01(rng);
  return x;
}

inline FitResult fit_model(const std::vector<TurnRecord>& records, ModelVariant variant,
                           std::uint64_t seed, const FitOptions& opts = {}) {
  if (records.empty()) throw InsufficientSamples("cannot fit an empty dataset");
  const CompiledDataset data = compile_dataset(records, variant);
  const BoxBounds box = parameter_bounds(variant);
  auto objective = [&](const std::vector<double>& x) {
    return dataset_nll(data, params_from_vector(x, variant));
  };

  FitResult out;
  out.variant = variant;
  out.seed = seed;
  out.n_samples = static_cast<int>(records.size());
  out.model_name = records.front().model_name;
  out.dataset_digest = dataset_digest(records);
  out.options = opts;
  std::vector<double> best_x;
  for (int k = 0; k < opts.n_restarts; ++k) {
    const LbfgsbResult r = minimize_box(objective, restart_start(variant, seed, k), box, opts.optimizer);
    out.restarts.push_back({r.f, r.iterations, r.stop_reason});
    if (std::isfinite(r.f) && (out.best_restart < 0 || r.f < out.nll_per_sample)) {
      out.best_restart = k;
      out.nll_per_sample = r.f;
      best_x = r.x;
    }
  }
  if (out.best_restart < 0) {
    throw OptimizationDiverged("every restart ended with a non-finite likelihood");
  }
  out.params = params_from_vector(best_x, variant);
  out.accuracy = dataset_accuracy(data, out.params);
  return out;
}

// ---------------------------------------------------------------------------
// FitResult files: a flat key-value report and a JSON record.

inline nlohmann::ordered_json to_json(const HeuristicParams& p) {
  nlohmann::ordered_json j;
  j["w_centre"] = p.w_centre;
  j["w_conn2"] = p.w[0];
  j["w_unconn2"] = p.w[1];
  j["w_three"] = p.w[2];
  j["w_four"] = p.w[3];
  j["C"] = p.C;
  j["gamma"] = p.gamma;
  return j;
}

inline HeuristicParams params_from_json(const nlohmann::json& j) {
  const auto& src = j.contains("params") ? j.at("params") : j;
  HeuristicParams p;
  try {
    p.w_centre = src.at("w_centre").get<double>();
    p.w = {src.at("w_conn2").get<double>(), src.at("w_unconn2").get<double>(),
           src.at("w_three").get<double>(), src.at("w_four").get<double>()};
    p.C = src.at("C").get<double>();
    p.gamma = src.value("gamma", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad parameter record: ") + e.what());
  }
  check_param_bounds(p);
  return p;
}

/// Key-value text or a JSON document (a bare parameter object or a FitResult).
inline HeuristicParams load_params_any(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open parameter file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return params_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("bad parameter JSON: ") + e.what());
    }
  }
  return parse_params(text);
}

inline nlohmann::ordered_json to_json(const FitResult& f) {
  nlohmann::ordered_json j;
  j["model_name"] = f.model_name;
  j["variant"] = std::string(to_string(f.variant));
  j["params"] = to_json(f.params);
  j["nll_per_sample"] = f.nll_per_sample;
  j["accuracy"] = f.accuracy;
  j["n_samples"] = f.n_samples;
  j["seed"] = f.seed;
  j["best_restart"] = f.best_restart;
  j["dataset_digest"] = f.dataset_digest;
  auto restarts = nlohmann::ordered_json::array();
  for (const auto& r : f.restarts) {
    nlohmann::ordered_json rj;
    rj["nll"] = std::isfinite(r.nll) ? nlohmann::ordered_json(r.nll) : nlohmann::ordered_json(nullptr);
    rj["iterations"] = r.iterations;
    rj["stop_reason"] = r.stop_reason;
    restarts.push_back(rj);
  }
  j["restarts"] = restarts;
  nlohmann::ordered_json o;
  o["n_restarts"] = f.options.n_restarts;
  o["max_iterations"] = f.options.optimizer.max_iterations;
  o["f_tol"] = f.options.optimizer.f_tol;
  o["pg_tol"] = f.options.optimizer.pg_tol;
  o["fd_rel_step"] = f.options.optimizer.fd_rel_step;
  o["fd_min_step"] = f.options.optimizer.fd_min_step;
  o["memory"] = f.options.optimizer.memory;
  j["options"] = o;
  return j;
}

inline FitResult fit_result_from_json(const nlohmann::json& j) {
  FitResult f;
  try {
    f.model_name = j.value("model_name", std::string{});
    const auto v = variant_from_string(j.at("variant").get<std::string>());
    if (!v) throw ConfigError("unknown variant in fit record");
    f.variant = *v;
    f.params = params_from_json(j.at("params"));
    f.nll_per_sample = j.at("nll_per_sample").get<double>();
    f.accuracy = j.at("accuracy").get<double>();
    f.n_samples = j.at("n_samples").get<int>();
    f.seed = j.value("seed", std::uint64_t{0});
    f.best_restart = j.value("best_restart", -1);
    f.dataset_digest = j.value("dataset_digest", std::string{});
    if (j.contains("restarts")) {
      for (const auto& r : j.at("restarts")) {
        RestartInfo info;
        info.nll = r.at("nll").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                         : r.at("nll").get<double>();
        info.iterations = r.value("iterations", 0);
        info.stop_reason = r.value("stop_reason", std::string{});
        f.restarts.push_back(info);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad fit record: ") + e.what());
  }
  return f;
}

inline std::string format_fit_report(const FitResult& f) {
  std::ostringstream out;
  out << "model_name = " << f.model_name << "\n"
      << "variant = " << to_string(f.variant) << "\n"
      << format_params(f.params)
      << "nll_per_sample = " << format_double(f.nll_per_sample) << "\n"
      << "accuracy = " << format_double(f.accuracy) << "\n"
      << "n_samples = " << f.n_samples << "\n"
      << "seed = " << f.seed << "\n"
      << "n_restarts = " << f.restarts.size() << "\n"
      << "best_restart = " << f.best_restart << "\n"
      << "dataset_digest = " << f.dataset_digest << "\n";
  for (std::size_t k = 0; k < f.restarts.size(); ++k) {
    out << "restart_" << k << "_nll = " << format_double(f.restarts[k].nll) << "\n";
  }
  return out.str();
}

}  // namespace fourplan
