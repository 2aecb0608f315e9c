#pragma once

// Per-model search-effort summaries, model comparison metrics, OLS with
// permutation p-values, and weight normalisation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fourplan/errors.hpp"
#include "fourplan/fit.hpp"
#include "fourplan/policy.hpp"
#include "fourplan/records.hpp"
#include "fourplan/tree.hpp"
#include "fourplan/util.hpp"

namespace fourplan {

struct ModelSummary {
  std::string model_name;
  int games = 0;
  int wins = 0;
  int draws = 0;
  int losses = 0;
  /// (wins + 0.5 draws) / games; absent without games.
  std::optional<double> winning_rate;
  /// Turns with a parsed tree; the tree means below average over these.
  int n_turns = 0;
  std::optional<double> mean_tree_size;
  std::optional<double> mean_breadth;
  std::optional<double> mean_max_depth;
  /// mean_breadth / mean_max_depth.
  std::optional<double> breadth_depth_ratio;
  /// per_depth_means[d - 1] is the mean number of nodes at depth d.
  std::vector<double> per_depth_means;
};

inline std::optional<double> winning_rate(int wins, int draws, int games) {
  if (games <= 0) return std::nullopt;
  return (wins + 0.5 * draws) / games;
}

/// `records` are the model's turns; games where it played neither side are
/// ignored.
inline ModelSummary summarize_model(const std::string& model_name,
                                    const std::vector<TurnRecord>& records,
                                    const std::vector<GameResult>& games) {
  ModelSummary s;
  s.model_name = model_name;
  for (const auto& g : games) {
    const bool white = g.white == model_name;
    const bool black = g.black == model_name;
    if (!white && !black) continue;
    ++s.games;
    if (g.result == Outcome::Draw) {
      ++s.draws;
    } else if ((g.result == Outcome::White && white) || (g.result == Outcome::Black && black)) {
      ++s.wins;
    } else {
      ++s.losses;
    }
  }
  s.winning_rate = winning_rate(s.wins, s.draws, s.games);

  double size = 0, breadth = 0, depth = 0;
  std::vector<double> per_depth;
  for (const auto& r : records) {
    if (!r.tree) continue;
    const TreeMetrics m = measure(*r.tree);
    ++s.n_turns;
    size += m.size;
    breadth += m.breadth;
    depth += m.max_depth;
    if (per_depth.size() < m.per_depth.size()) per_depth.resize(m.per_depth.size(), 0.0);
    for (std::size_t d = 0; d < m.per_depth.size(); ++d) per_depth[d] += m.per_depth[d];
  }
  if (s.n_turns > 0) {
    const double n = s.n_turns;
    s.mean_tree_size = size / n;
    s.mean_breadth = breadth / n;
    s.mean_max_depth = depth / n;
    if (*s.mean_max_depth > 0) s.breadth_depth_ratio = *s.mean_breadth / *s.mean_max_depth;
    for (double& v : per_depth) v /= n;
    s.per_depth_means = std::move(per_depth);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Variant comparison.

/// Per-sample NLL gap of the full-tree model over the myopic model.
inline double depth_harm(double nll_fulltree, double nll_myopic) { return nll_fulltree - nll_myopic; }

/// Per-sample NLL gap of the no-tree model over the myopic model.
inline double candidate_gain(double nll_notree, double nll_myopic) { return nll_notree - nll_myopic; }

struct ComparisonReport {
  std::string model_name;
  double depth_harm = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> candidate_gain;
  /// Over turns where the Myopic and FullTree argmax predictions differ.
  int myopic_only = 0;
  int fulltree_only = 0;
  int disagreements = 0;
  int n_samples = 0;
  std::map<ModelVariant, double> nll;
  std::map<ModelVariant, double> accuracy;
};

/// Needs FullTree and Myopic fits; NoTree adds the candidate gain and
/// Discount is reported when present. Every fit must come from `records`.
inline ComparisonReport compare_variants(const std::map<ModelVariant, FitResult>& fits,
                                         const std::vector<TurnRecord>& records) {
  const std::string digest = dataset_digest(records);
  for (const auto& [variant, fit] : fits) {
    if (fit.dataset_digest != digest || fit.n_samples != static_cast<int>(records.size())) {
      throw MismatchedDatasets("fit for " + std::string(to_string(variant)) +
                               " was computed on a different dataset");
    }
  }
  const auto full = fits.find(ModelVariant::FullTree);
  const auto myopic = fits.find(ModelVariant::Myopic);
  if (full == fits.end() || myopic == fits.end()) {
    throw MismatchedDatasets("comparison needs both fulltree and myopic fits");
  }
  ComparisonReport rep;
  rep.model_name = myopic->second.model_name;
  rep.n_samples = static_cast<int>(records.size());
  for (const auto& [variant, fit] : fits) {
    rep.nll[variant] = fit.nll_per_sample;
    rep.accuracy[variant] = fit.accuracy;
  }
  rep.depth_harm = depth_harm(full->second.nll_per_sample, myopic->second.nll_per_sample);
  if (auto nt = fits.find(ModelVariant::NoTree); nt != fits.end()) {
    rep.candidate_gain = candidate_gain(nt->second.nll_per_sample, myopic->second.nll_per_sample);
  }

  const CompiledDataset full_data = compile_dataset(records, ModelVariant::FullTree);
  const CompiledDataset myopic_data = compile_dataset(records, ModelVariant::Myopic);
  std::vector<double> scratch, vf, vm;
  auto argmax = [](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k) {
      if (v[k] > v[best]) best = k;
    }
    return static_cast<int>(best);
  };
  for (std::size_t t = 0; t < records.size(); ++t) {
    candidate_values(full_data.turns[t], full->second.params, ModelVariant::FullTree, scratch, vf);
    candidate_values(myopic_data.turns[t], myopic->second.params, ModelVariant::Myopic, scratch, vm);
    const int pf = argmax(vf);
    const int pm = argmax(vm);
    if (pf == pm) continue;
    ++rep.disagreements;
    if (pm == myopic_data.chosen[t]) ++rep.myopic_only;
    if (pf == full_data.chosen[t]) ++rep.fulltree_only;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Normalised weights.

struct NormalizedWeights {
  double w_centre = 0, w_conn2 = 0, w_unconn2 = 0, w_three = 0, w_four = 1;
  double C = 1, gamma = 0;
};

inline NormalizedWeights normalize_weights(const HeuristicParams& p) {
  const double f = p.w[3];
  if (f == 0.0) throw ZeroFourWeight("cannot normalise by a zero four-in-a-row weight");
  return {p.w_centre / f, p.w[0] / f, p.w[1] / f, p.w[2] / f, 1.0, p.C, p.gamma};
}

// ---------------------------------------------------------------------------
// Regression.

struct RegressionColumn {
  std::string name;
  std::vector<double> values;
};

struct RegressOptions {
  int permutations = 10000;
  std::uint64_t seed = 0;
  /// Row weights for weighted least squares; empty means unweighted.
  std::vector<double> weights;
};

struct RegressionResult {
  /// "intercept" first, then the predictors in the given order.
  std::vector<std::string> names;
  std::vector<double> beta;
  std::vector<double> std_error;
  std::vector<double> t;
  /// Two-sided permutation p-values, (count + 1) / (permutations + 1).
  std::vector<double> p_value;
  int n = 0;
  int permutations = 0;
  double r_squared = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct OlsSolver {
  Eigen::MatrixXd X;
  Eigen::MatrixXd H;        // (X'X)^-1 X'
  Eigen::VectorXd xtx_diag; // diagonal of (X'X)^-1

  explicit OlsSolver(Eigen::MatrixXd design) : X(std::move(design)) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw SingularDesign("design matrix is rank deficient");
    const Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(
        Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    H = xtx_inv * X.transpose();
    xtx_diag = xtx_inv.diagonal();
  }

  /// t statistic of coefficient j for response y; +-inf on an exact fit.
  double t_stat(const Eigen::VectorXd& y, Eigen::Index j, Eigen::VectorXd* beta_out = nullptr,
                double* se_out = nullptr) const {
    const Eigen::VectorXd beta = H * y;
    const double rss = (y - X * beta).squaredNorm();
    const double dof = static_cast<double>(X.rows() - X.cols());
    const double se = std::sqrt(rss / dof * xtx_diag(j));
    if (beta_out) *beta_out = beta;
    if (se_out) *se_out = se;
    if (se == 0.0) {
      if (beta(j) == 0.0) return 0.0;
      return beta(j) > 0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
    }
    return beta(j) / se;
  }
};

}  // namespace detail

/// OLS (or WLS) with an intercept. p-values come from the Freedman-Lane
/// scheme: residuals of the model without predictor j are permuted and added
/// back to its fitted values, and |t_j| is compared with the observed one.
inline RegressionResult regress(const std::vector<double>& y, const std::vector<RegressionColumn>& X,
                                const RegressOptions& opts = {}) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(X.size()) + 1;
  for (const auto& c : X) {
    if (static_cast<Eigen::Index>(c.values.size()) != n) {
      throw MismatchedDatasets("predictor " + c.name + " has a different length from y");
    }
  }
  if (!opts.weights.empty() && static_cast<Eigen::Index>(opts.weights.size()) != n) {
    throw MismatchedDatasets("weights have a different length from y");
  }
  if (n <= k) throw InsufficientSamples("regression needs more observations than coefficients");

  Eigen::MatrixXd design(n, k);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sw = opts.weights.empty() ? 1.0 : std::sqrt(opts.weights[i]);
    yv(i) = sw * y[i];
    design(i, 0) = sw;
    for (Eigen::Index j = 1; j < k; ++j) design(i, j) = sw * X[j - 1].values[i];
  }
  const detail::OlsSolver full(design);

  RegressionResult res;
  res.n = static_cast<int>(n);
  res.permutations = opts.permutations;
  res.names.push_back("intercept");
  for (const auto& c : X) res.names.push_back(c.name);
  Eigen::VectorXd beta;
  double se0 = 0;
  (void)full.t_stat(yv, 0, &beta, &se0);
  const double rss = (yv - design * beta).squaredNorm();
  const double ybar = yv.mean();
  const double tss = (yv.array() - ybar).square().sum();
  res.r_squared = tss > 0 ? 1.0 - rss / tss : std::numeric_limits<double>::quiet_NaN();

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < k; ++j) {
    double se = 0;
    const double t_obs = full.t_stat(yv, j, nullptr, &se);
    res.beta.push_back(beta(j));
    res.std_error.push_back(se);
    res.t.push_back(t_obs);

    Eigen::MatrixXd reduced(n, k - 1);
    for (Eigen::Index c = 0, out = 0; c < k; ++c) {
      if (c != j) reduced.col(out++) = design.col(c);
    }
    Eigen::VectorXd fitted = Eigen::VectorXd::Zero(n);
    if (k > 1) {
      const detail::OlsSolver red(reduced);
      fitted = reduced * (red.H * yv);
    }
    const Eigen::VectorXd resid = yv - fitted;

    Rng rng(derive_seed(opts.seed, "regress/permutation/" + res.names[j]));
    for (Eigen::Index i = 0; i < n; ++i) perm[i] = i;
    const double threshold = std::abs(t_obs) * (1.0 - 1e-12);
    int count = 0;
    Eigen::VectorXd ystar(n);
    for (int b = 0; b < opts.permutations; ++b) {
      for (Eigen::Index i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[uniform_int(rng, 0, static_cast<int>(i))]);
      }
      for (Eigen::Index i = 0; i < n; ++i) ystar(i) = fitted(i) + resid(perm[i]);
      if (std::abs(full.t_stat(ystar, j)) >= threshold) ++count;
    }
    res.p_value.push_back(static_cast<double>(count + 1) / (opts.permutations + 1));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Tables and plot descriptions.

namespace detail {

inline std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace detail

inline std::string summaries_csv(const std::vector<ModelSummary>& rows) {
  std::ostringstream out;
  out << "model_name,games,wins,draws,losses,winning_rate,n_turns,mean_tree_size,mean_breadth,"
         "mean_max_depth,breadth_depth_ratio,per_depth_means\n";
  for (const auto& s : rows) {
    out << s.model_name << ',' << s.games << ',' << s.wins << ',' << s.draws << ',' << s.losses << ','
        << detail::opt_field(s.winning_rate) << ',' << s.n_turns << ','
        << detail::opt_field(s.mean_tree_size) << ',' << detail::opt_field(s.mean_breadth) << ','
        << detail::opt_field(s.mean_max_depth) << ',' << detail::opt_field(s.breadth_depth_ratio) << ',';
    for (std::size_t d = 0; d < s.per_depth_means.size(); ++d) {
      if (d) out << ';';
      out << format_double(s.per_depth_means[d]);
    }
    out << '\n';
  }
  return out.str();
}

inline std::string variants_csv(const std::vector<ComparisonReport>& reports) {
  std::ostringstream out;
  out << "model_name,variant,nll_per_sample,accuracy\n";
  for (const auto& r : reports) {
    for (const auto& [variant, nll] : r.nll) {
      out << r.model_name << ',' << to_string(variant) << ',' << format_double(nll) << ','
          << format_double(r.accuracy.at(variant)) << '\n';
    }
  }
  return out.str();
}

inline std::string comparison_csv(const std::vector<ComparisonReport>& reports) {
  std::ostringstream out;
  out << "model_name,n_samples,depth_harm,candidate_gain,myopic_only,fulltree_only,disagreements\n";
  for (const auto& r : reports) {
    out << r.model_name << ',' << r.n_samples << ',' << format_double(r.depth_harm) << ','
        << detail::opt_field(r.candidate_gain) << ',' << r.myopic_only << ',' << r.fulltree_only << ','
        << r.disagreements << '\n';
  }
  return out.str();
}

inline std::string weights_csv(const std::vector<std::pair<std::string, NormalizedWeights>>& rows) {
  std::ostringstream out;
  out << "model_name,w_centre,w_conn2,w_unconn2,w_three,w_four,C,gamma\n";
  for (const auto& [name, w] : rows) {
    out << name << ',' << format_double(w.w_centre) << ',' << format_double(w.w_conn2) << ','
        << format_double(w.w_unconn2) << ',' << format_double(w.w_three) << ','
        << format_double(w.w_four) << ',' << format_double(w.C) << ',' << format_double(w.gamma) << '\n';
  }
  return out.str();
}

inline std::string regression_csv(const RegressionResult& r) {
  std::ostringstream out;
  out << "term,beta,std_error,t,p_value\n";
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    out << r.names[i] << ',' << format_double(r.beta[i]) << ',' << format_double(r.std_error[i]) << ','
        << format_double(r.t[i]) << ',' << format_double(r.p_value[i]) << '\n';
  }
  return out.str();
}

struct PlotSpec {
  std::string id;
  std::string title;
  std::string kind;  // "scatter", "bar" or "line"
  std::string table;
  std::string x;
  std::string y;
  std::string group;
};

inline nlohmann::ordered_json to_json(const PlotSpec& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["title"] = p.title;
  j["kind"] = p.kind;
  j["table"] = p.table;
  j["x"] = p.x;
  j["y"] = p.y;
  if (!p.group.empty()) j["group"] = p.group;
  return j;
}

/// Descriptions of the standard plots the tables support.
inline std::vector<PlotSpec> standard_plots() {
  return {
      {"fig2a", "Winning rate against mean tree size", "scatter", "summaries.csv", "mean_tree_size", "winning_rate", ""},
      {"fig2b", "Winning rate against breadth and depth", "scatter", "summaries.csv", "mean_breadth", "winning_rate", ""},
      {"fig2c", "Winning rate against breadth-to-depth ratio", "scatter", "summaries.csv", "breadth_depth_ratio", "winning_rate", ""},
      {"fig3c", "Negative log-likelihood per sample by variant", "bar", "variants.csv", "variant", "nll_per_sample", "model_name"},
      {"fig3d", "Prediction accuracy by variant", "bar", "variants.csv", "variant", "accuracy", "model_name"},
      {"fig3e", "Depth harm against winning rate", "scatter", "comparison.csv", "depth_harm", "model_name", ""},
      {"fig3f", "Candidate gain against winning rate", "scatter", "comparison.csv", "candidate_gain", "model_name", ""},
      {"fig3g", "Weights normalised by the four-in-a-row weight", "bar", "weights.csv", "model_name", "w_three", ""},
      {"figs1", "Mean nodes per depth", "line", "summaries.csv", "depth", "per_depth_means", "model_name"},
  };
}

}  // namespace fourplan
