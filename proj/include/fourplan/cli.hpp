#pragma once

// The fourplan command line: one subcommand per pipeline stage plus `report`,
// which runs tournament, metrics, fitting and comparison in one go.
//
// Settings come from, in increasing priority: built-in defaults, a flat JSON
// file given with --config, FOURPLAN_<KEY> environment variables, and
// command-line flags. Exit status is 0 on success, 1 on usage or
// configuration errors and 2 on data errors.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fourplan/analysis.hpp"
#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"
#include "fourplan/fit.hpp"
#include "fourplan/harness.hpp"
#include "fourplan/intervene.hpp"
#include "fourplan/records.hpp"
#include "fourplan/recovery.hpp"
#include "fourplan/tree.hpp"
#include "fourplan/util.hpp"

namespace fourplan {

struct RunConfig {
  std::uint64_t seed = 0;
  std::string dataset;
  std::string output = "fourplan-out";
  // fitting
  int restarts = 20;
  int max_iterations = 500;
  double f_tol = 1e-9;
  double pg_tol = 1e-6;
  // tournament
  std::string agents = "random,myopic,fulltree";
  int games_per_pair = 4;
  int retries = 0;
  int fulltree_depth = 3;
  int agent_timeout = 300;
  /// Heuristic parameter file for the bots; empty uses default_bot_params().
  std::string bot_params;
  // analysis
  int permutations = 10000;
  /// Regression weight column; empty means unweighted.
  std::string weights;

  FitOptions fit_options() const {
    FitOptions f;
    f.n_restarts = restarts;
    f.optimizer.max_iterations = max_iterations;
    f.optimizer.f_tol = f_tol;
    f.optimizer.pg_tol = pg_tol;
    return f;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  // nlohmann::json keeps keys sorted, which makes the dump canonical.
  nlohmann::json j;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset;
  j["output"] = c.output;
  j["restarts"] = c.restarts;
  j["max_iterations"] = c.max_iterations;
  j["f_tol"] = c.f_tol;
  j["pg_tol"] = c.pg_tol;
  j["agents"] = c.agents;
  j["games_per_pair"] = c.games_per_pair;
  j["retries"] = c.retries;
  j["fulltree_depth"] = c.fulltree_depth;
  j["agent_timeout"] = c.agent_timeout;
  j["bot_params"] = c.bot_params;
  j["permutations"] = c.permutations;
  j["weights"] = c.weights;
  return j;
}

inline void apply_config(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  const nlohmann::json known = to_json(RunConfig{});
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    c.seed = j.value("seed", c.seed);
    c.dataset = j.value("dataset", c.dataset);
    c.output = j.value("output", c.output);
    c.restarts = j.value("restarts", c.restarts);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.f_tol = j.value("f_tol", c.f_tol);
    c.pg_tol = j.value("pg_tol", c.pg_tol);
    c.agents = j.value("agents", c.agents);
    c.games_per_pair = j.value("games_per_pair", c.games_per_pair);
    c.retries = j.value("retries", c.retries);
    c.fulltree_depth = j.value("fulltree_depth", c.fulltree_depth);
    c.agent_timeout = j.value("agent_timeout", c.agent_timeout);
    c.bot_params = j.value("bot_params", c.bot_params);
    c.permutations = j.value("permutations", c.permutations);
    c.weights = j.value("weights", c.weights);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  RunConfig c;
  try {
    apply_config(c, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  return c;
}

namespace cli {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Model names made safe for use as a directory name.
inline std::string path_component(const std::string& name) {
  std::string out = name.empty() ? "unnamed" : name;
  for (char& ch : out) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline Coord parse_target(const std::string& s) {
  try {
    return parse_coord(s);
  } catch (const BadCoordinate& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Agents.

struct AgentPool {
  std::vector<std::unique_ptr<Agent>> owned;
  std::vector<Agent*> agents;
};

/// Agent specs: random, myopic, fulltree, fulltree:<depth>, or a name bound
/// to a command with --external name=command.
inline AgentPool make_agents(const std::vector<std::string>& specs, const std::vector<std::string>& externals,
                             const RunConfig& cfg, bool allow_repeats = false) {
  std::map<std::string, std::string> commands;
  for (const auto& e : externals) {
    const auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--external expects name=command, got '" + e + "'");
    commands[e.substr(0, eq)] = e.substr(eq + 1);
  }
  const HeuristicParams params = cfg.bot_params.empty() ? default_bot_params() : load_params_any(cfg.bot_params);
  AgentPool pool;
  std::set<std::string> seen;
  for (const auto& spec : specs) {
    if (!seen.insert(spec).second && !allow_repeats) throw ConfigError("agent '" + spec + "' is listed twice");
    std::unique_ptr<Agent> a;
    if (auto it = commands.find(spec); it != commands.end()) {
      a = std::make_unique<ExternalProcessAgent>(spec, it->second, cfg.agent_timeout);
    } else if (spec == "random") {
      a = std::make_unique<RandomBot>(spec);
    } else if (spec == "myopic") {
      a = std::make_unique<MyopicBot>(spec, params);
    } else if (spec == "fulltree" || spec.rfind("fulltree:", 0) == 0) {
      int depth = cfg.fulltree_depth;
      if (spec.size() > 9) {
        const auto d = detail::parse_small_int(std::string_view(spec).substr(9));
        if (!d || *d < 1) throw ConfigError("bad search depth in agent '" + spec + "'");
        depth = *d;
      }
      a = std::make_unique<FullTreeBot>(spec, params, depth);
    } else {
      throw ConfigError("unknown agent '" + spec + "'");
    }
    pool.agents.push_back(a.get());
    pool.owned.push_back(std::move(a));
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Pipeline stages shared by the subcommands.

inline std::vector<GameLog> tournament_step(const RunConfig& cfg, const std::vector<std::string>& specs,
                                            const std::vector<std::string>& externals, std::ostream& out) {
  AgentPool pool = make_agents(specs, externals, cfg);
  TournamentOptions opts;
  opts.games_per_pair = cfg.games_per_pair;
  opts.seed = cfg.seed;
  opts.retries = cfg.retries;
  TournamentResult res = run_tournament(pool.agents, opts);
  const fs::path dir = cfg.output;
  std::ostringstream merged;
  for (const auto& g : res.games) {
    std::ostringstream one;
    write_game_log(one, g);
    write_text(dir / "games" / (path_component(g.game_id) + ".jsonl"), one.str());
    merged << one.str();
  }
  write_text(dir / "games.jsonl", merged.str());
  const std::string table = standings_csv(res.standings);
  write_text(dir / "standings.csv", table);
  out << "games played: " << res.games.size() << "\n" << table;
  return std::move(res.games);
}

struct Dataset {
  std::vector<TurnRecord> records;
  std::vector<GameResult> games;
};

inline Dataset load_dataset(const std::string& path) {
  if (path.empty()) throw ConfigError("no dataset given (use --dataset or the dataset config key)");
  return {read_records_file(path), read_game_results_file(path)};
}

inline std::vector<std::string> model_names(const std::vector<TurnRecord>& records) {
  std::set<std::string> names;
  for (const auto& r : records) names.insert(r.model_name);
  return {names.begin(), names.end()};
}

inline std::vector<ModelSummary> metrics_step(const RunConfig& cfg, const Dataset& data, std::ostream& out) {
  std::set<std::string> names;
  for (const auto& r : data.records) names.insert(r.model_name);
  for (const auto& g : data.games) {
    names.insert(g.white);
    names.insert(g.black);
  }
  std::vector<ModelSummary> rows;
  for (const auto& name : names) {
    std::vector<TurnRecord> mine;
    for (const auto& r : data.records) {
      if (r.model_name == name) mine.push_back(r);
    }
    rows.push_back(summarize_model(name, mine, data.games));
  }
  const std::string table = summaries_csv(rows);
  write_text(fs::path(cfg.output) / "summaries.csv", table);
  out << table;
  return rows;
}

/// Turns of `model` that survive the exclusion rules.
inline std::vector<TurnRecord> usable_turns(const FilterResult& filtered, const std::string& model) {
  std::vector<TurnRecord> out;
  for (const auto& r : filtered.kept) {
    if (r.model_name == model) out.push_back(r);
  }
  return out;
}

inline fs::path fit_path(const fs::path& fits_dir, const std::string& model, ModelVariant v) {
  return fits_dir / path_component(model) / (std::string(to_string(v)) + ".json");
}

/// Fits each requested variant for every model with enough usable turns. The
/// per-model seed is derive_seed(seed, "model/<name>").
inline std::map<std::string, std::map<ModelVariant, FitResult>> fit_step(
    const RunConfig& cfg, const Dataset& data, const std::vector<ModelVariant>& variants,
    const std::string& only_model, std::ostream& out, std::ostream& err) {
  const FilterResult filtered = filter_dataset(data.records);
  std::map<std::string, std::map<ModelVariant, FitResult>> fits;
  for (const auto& [model, ok] : filtered.model_ok) {
    if (!only_model.empty() && model != only_model) continue;
    if (!ok) {
      err << "skipping " << model << ": " << filtered.kept_per_model.at(model) << " usable turns, need "
          << kMinTurnsPerModel << "\n";
      continue;
    }
    const auto turns = usable_turns(filtered, model);
    for (ModelVariant v : variants) {
      FitResult f = fit_model(turns, v, derive_seed(cfg.seed, "model/" + model), cfg.fit_options());
      write_text(fit_path(fs::path(cfg.output) / "fits", model, v), to_json(f).dump(2) + "\n");
      out << format_fit_report(f);
      fits[model][v] = std::move(f);
    }
  }
  if (fits.empty()) {
    throw InsufficientSamples(only_model.empty() ? "no model has enough usable turns to fit"
                                                 : "model '" + only_model + "' has no fittable turns");
  }
  return fits;
}

inline std::vector<ComparisonReport> compare_step(
    const RunConfig& cfg, const Dataset& data,
    const std::map<std::string, std::map<ModelVariant, FitResult>>& fits, std::ostream& out, std::ostream& err) {
  const FilterResult filtered = filter_dataset(data.records);
  std::vector<ComparisonReport> reports;
  std::vector<std::pair<std::string, NormalizedWeights>> weights;
  for (const auto& [model, by_variant] : fits) {
    reports.push_back(compare_variants(by_variant, usable_turns(filtered, model)));
    try {
      weights.emplace_back(model, normalize_weights(by_variant.at(ModelVariant::Myopic).params));
    } catch (const ZeroFourWeight& e) {
      err << model << ": " << e.what() << "\n";
    }
  }
  const fs::path dir = cfg.output;
  write_text(dir / "comparison.csv", comparison_csv(reports));
  write_text(dir / "variants.csv", variants_csv(reports));
  write_text(dir / "weights.csv", weights_csv(weights));
  out << comparison_csv(reports);
  return reports;
}

inline std::map<std::string, std::map<ModelVariant, FitResult>> load_fits(const fs::path& fits_dir,
                                                                          const Dataset& data) {
  std::map<std::string, std::map<ModelVariant, FitResult>> fits;
  for (const auto& model : model_names(data.records)) {
    for (ModelVariant v : kAllVariants) {
      const fs::path p = fit_path(fits_dir, model, v);
      if (!fs::exists(p)) continue;
      try {
        fits[model][v] = fit_result_from_json(nlohmann::json::parse(read_text(p.string())));
      } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord("fit file " + p.string() + " is unreadable: " + e.what());
      }
    }
  }
  if (fits.empty()) throw MismatchedDatasets("no fit files for this dataset under " + fits_dir.string());
  return fits;
}

inline std::vector<ModelVariant> parse_variants(const std::string& s) {
  if (s == "all") return {kAllVariants.begin(), kAllVariants.end()};
  std::vector<ModelVariant> out;
  for (const auto& item : split_list(s)) {
    const auto v = variant_from_string(item);
    if (!v) throw ConfigError("unknown variant '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ConfigError("no variant given");
  return out;
}

// ---------------------------------------------------------------------------
// Tables for `regress`.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("table has no column '" + name + "'");
    return static_cast<int>(it - header.begin());
  }
};

/// Plain comma-separated values with a header row and no quoting.
inline Table read_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  Table t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream s(l);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  if (t.header.empty()) throw MalformedRecord("table " + path + " is empty");
  return t;
}

// ---------------------------------------------------------------------------
// Report.

inline std::string markdown_table(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  bool first = true;
  while (std::getline(in, line)) {
    std::string row = "|";
    std::size_t cols = 0;
    for (const auto& cell : [&] {
           std::vector<std::string> cells;
           std::stringstream s(line);
           std::string c;
           while (std::getline(s, c, ',')) cells.push_back(c);
           if (!line.empty() && line.back() == ',') cells.emplace_back();
           return cells;
         }()) {
      row += " " + cell + " |";
      ++cols;
    }
    out += row + "\n";
    if (first) {
      out += "|";
      for (std::size_t i = 0; i < cols; ++i) out += " --- |";
      out += "\n";
      first = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  // The config file only supplies defaults, so it is read before the parser
  // binds environment variables and flags on top of it.
  RunConfig cfg;
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "--config" && i + 1 < argc) cfg = load_config_file(argv[i + 1]);
      if (a.rfind("--config=", 0) == 0) cfg = load_config_file(a.substr(9));
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"Planning analysis toolkit for four-in-a-row", "fourplan"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of default settings");
  auto global = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file of default settings");
    sub->add_option("--seed", cfg.seed, "Master seed")->envname("FOURPLAN_SEED")->capture_default_str();
    sub->add_option("-o,--output", cfg.output, "Output directory")->envname("FOURPLAN_OUTPUT")->capture_default_str();
    sub->add_option("--restarts", cfg.restarts, "Fitting restarts")->envname("FOURPLAN_RESTARTS")->capture_default_str();
    sub->add_option("--max-iterations", cfg.max_iterations, "Optimizer iteration cap")
        ->envname("FOURPLAN_MAX_ITERATIONS")
        ->capture_default_str();
    sub->add_option("--f-tol", cfg.f_tol, "Objective change tolerance")->envname("FOURPLAN_F_TOL")->capture_default_str();
    sub->add_option("--pg-tol", cfg.pg_tol, "Projected gradient tolerance")->envname("FOURPLAN_PG_TOL")->capture_default_str();
    sub->add_option("--agents", cfg.agents, "Comma-separated agent specs")->envname("FOURPLAN_AGENTS")->capture_default_str();
    sub->add_option("--games-per-pair", cfg.games_per_pair, "Games per pair of agents")
        ->envname("FOURPLAN_GAMES_PER_PAIR")
        ->capture_default_str();
    sub->add_option("--retries", cfg.retries, "Retries after an illegal move (0 forfeits)")
        ->envname("FOURPLAN_RETRIES")
        ->check(CLI::Range(0, 3))
        ->capture_default_str();
    sub->add_option("--fulltree-depth", cfg.fulltree_depth, "Search depth of the fulltree bot")
        ->envname("FOURPLAN_FULLTREE_DEPTH")
        ->capture_default_str();
    sub->add_option("--agent-timeout", cfg.agent_timeout, "Seconds per move for external agents")
        ->envname("FOURPLAN_AGENT_TIMEOUT")
        ->capture_default_str();
    sub->add_option("--bot-params", cfg.bot_params, "Heuristic parameter file for the bots")
        ->envname("FOURPLAN_BOT_PARAMS");
    sub->add_option("--permutations", cfg.permutations, "Permutations per regression p-value")
        ->envname("FOURPLAN_PERMUTATIONS")
        ->capture_default_str();
    sub->add_option("--weights", cfg.weights, "Regression weight column")->envname("FOURPLAN_WEIGHTS");
  };
  auto dataset_option = [&](CLI::App* sub) {
    sub->add_option("--dataset", cfg.dataset, "Turn records or game log (JSON lines)")->envname("FOURPLAN_DATASET");
  };

  std::vector<std::string> externals;

  // play
  auto* play = app.add_subcommand("play", "Play one game between two agents");
  std::string white_spec = "myopic", black_spec = "random", game_id = "game-0", prompt_player = "White";
  bool print_prompt = false;
  play->add_option("--white", white_spec, "White agent spec")->capture_default_str();
  play->add_option("--black", black_spec, "Black agent spec")->capture_default_str();
  play->add_option("--game-id", game_id)->capture_default_str();
  play->add_option("--external", externals, "Bind an agent name to a command: name=command");
  play->add_flag("--print-prompt", print_prompt, "Print the system prompt sent to agents and exit");
  play->add_option("--player", prompt_player, "Colour for --print-prompt")->capture_default_str();
  global(play);

  // tournament
  auto* tour = app.add_subcommand("tournament", "Round-robin tournament");
  bool dry_run = false;
  tour->add_option("--external", externals, "Bind an agent name to a command: name=command");
  tour->add_flag("--dry-run", dry_run, "Print the schedule without playing");
  global(tour);

  // validate-trees
  auto* validate = app.add_subcommand("validate-trees", "Check every record's tree and list exclusions");
  dataset_option(validate);
  global(validate);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Per-model effort metrics and winning rates");
  dataset_option(metrics);
  global(metrics);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit choice models per model name");
  std::string variant_list = "all", only_model;
  fit->add_option("--variant", variant_list, "fulltree, myopic, discount, notree, a comma list, or all")
      ->capture_default_str();
  fit->add_option("--model", only_model, "Fit only this model name");
  dataset_option(fit);
  global(fit);

  // compare
  auto* compare = app.add_subcommand("compare", "Compare fitted variants");
  std::string fits_dir;
  compare->add_option("--fits", fits_dir, "Directory of fit files (default <output>/fits)");
  dataset_option(compare);
  global(compare);

  // recover
  auto* recover = app.add_subcommand("recover", "Model-recovery test on synthetic choices");
  int recover_n = 500, recover_seeds = 10;
  std::string recover_model;
  recover->add_option("--n", recover_n, "Synthetic turns per condition")->capture_default_str();
  recover->add_option("--seeds", recover_seeds, "Number of seeds")->capture_default_str();
  recover->add_option("--fits", fits_dir, "Directory of fit files providing generator parameters");
  recover->add_option("--model", recover_model, "Model whose fulltree and myopic fits generate the data");
  global(recover);

  // regress
  auto* regress_cmd = app.add_subcommand("regress", "Linear regression with permutation p-values");
  std::string table_path, y_col, x_cols;
  regress_cmd->add_option("--table", table_path, "CSV table with a header row")->required();
  regress_cmd->add_option("--y", y_col, "Response column")->required();
  regress_cmd->add_option("--x", x_cols, "Comma-separated predictor columns")->required();
  global(regress_cmd);

  // prune
  auto* prune = app.add_subcommand("prune", "Remove labelled paragraphs from a reasoning trace");
  std::string trace_path, labels_path, strategy_name = "all", target_text, chosen_text;
  prune->add_option("--trace", trace_path, "Trace text file")->required();
  prune->add_option("--labels", labels_path, "Paragraph label file")->required();
  prune->add_option("--strategy", strategy_name,
                    "remove-final, remove-branch, add-back-depth1, add-back-depth12 or all")
      ->capture_default_str();
  prune->add_option("--target", target_text, "Branch root r,c");
  prune->add_option("--largest-unchosen", chosen_text,
                    "Target the largest branch other than this chosen move r,c");
  global(prune);

  // report
  auto* report = app.add_subcommand(
      "report", "Run tournament (unless --dataset is given), metrics, fit and compare, then write report.md");
  report->add_option("--external", externals, "Bind an agent name to a command: name=command");
  dataset_option(report);
  global(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const fs::path outdir = cfg.output;
  auto record_config = [&](const std::string& command) {
    nlohmann::json j = to_json(cfg);
    j["command"] = command;
    write_text(outdir / "run_config.json", j.dump(2) + "\n");
  };

  try {
    if (*play) {
      if (print_prompt) {
        const auto p = player_from_string(prompt_player);
        if (!p) throw ConfigError("--player must be White or Black");
        out << system_prompt(*p);
        return 0;
      }
      AgentPool pool = make_agents({white_spec, black_spec}, externals, cfg, true);
      GameOptions opts;
      opts.game_id = game_id;
      opts.seed = cfg.seed;
      opts.retries = cfg.retries;
      const GameLog log = run_game(*pool.agents[0], *pool.agents[1], opts);
      std::ostringstream s;
      write_game_log(s, log);
      record_config("play");
      write_text(outdir / "game.jsonl", s.str());
      out << log.game_id << ": " << to_string(log.result) << " (" << log.termination << ") after "
          << log.turns.size() << " turns\n";
    } else if (*tour) {
      const auto specs = split_list(cfg.agents);
      if (specs.size() < 2) throw ConfigError("a tournament needs at least two agents");
      if (dry_run) {
        const auto sched = schedule(specs, cfg.games_per_pair);
        std::string csv = "game_id,white,black\n";
        for (const auto& p : sched) csv += p.game_id + "," + specs[p.white] + "," + specs[p.black] + "\n";
        record_config("tournament");
        write_text(outdir / "schedule.csv", csv);
        out << "agents: " << specs.size() << "\ngames: " << sched.size() << "\n";
        return 0;
      }
      record_config("tournament");
      tournament_step(cfg, specs, externals, out);
    } else if (*validate) {
      record_config("validate-trees");
      const Dataset data = load_dataset(cfg.dataset);
      const FilterResult filtered = filter_dataset(data.records);
      nlohmann::ordered_json rep;
      rep["records"] = data.records.size();
      rep["usable"] = filtered.kept.size();
      std::map<std::string, int> reasons;
      nlohmann::ordered_json candidates = nlohmann::ordered_json::array();
      for (const auto& [r, reason] : filtered.excluded) {
        ++reasons[std::string(to_string(reason))];
        nlohmann::ordered_json c;
        c["game_id"] = r.game_id;
        c["turn_index"] = r.turn_index;
        c["model_name"] = r.model_name;
        c["reason"] = std::string(to_string(reason));
        c["tree_error"] = r.tree_error;
        candidates.push_back(c);
      }
      int illegal_records = 0, illegal_nodes = 0;
      for (const auto& r : data.records) {
        if (!r.tree) continue;
        const ValidationReport v = validate_against_board(*r.tree, r.board());
        if (!v.ok()) {
          ++illegal_records;
          illegal_nodes += static_cast<int>(v.issues.size());
        }
      }
      rep["exclusion_candidates"] = candidates;
      rep["reason_counts"] = reasons;
      rep["records_with_illegal_paths"] = illegal_records;
      rep["illegal_path_nodes"] = illegal_nodes;
      nlohmann::ordered_json models;
      for (const auto& [m, ok] : filtered.model_ok) {
        models[m] = {{"usable", filtered.kept_per_model.at(m)}, {"fittable", ok}};
      }
      rep["models"] = models;
      write_text(outdir / "validation.json", rep.dump(2) + "\n");
      out << "records: " << data.records.size() << "\nusable: " << filtered.kept.size()
          << "\nexclusion candidates: " << filtered.excluded.size() << "\n";
      for (const auto& [reason, n] : reasons) out << "  " << reason << ": " << n << "\n";
      out << "records with illegal paths: " << illegal_records << "\n";
    } else if (*metrics) {
      record_config("metrics");
      metrics_step(cfg, load_dataset(cfg.dataset), out);
    } else if (*fit) {
      const auto variants = parse_variants(variant_list);
      record_config("fit");
      fit_step(cfg, load_dataset(cfg.dataset), variants, only_model, out, err);
    } else if (*compare) {
      record_config("compare");
      const Dataset data = load_dataset(cfg.dataset);
      const fs::path dir = fits_dir.empty() ? outdir / "fits" : fs::path(fits_dir);
      compare_step(cfg, data, load_fits(dir, data), out, err);
    } else if (*recover) {
      if (recover_n < 1 || recover_seeds < 1) throw ConfigError("--n and --seeds must be positive");
      HeuristicParams full, myopic;
      if (!recover_model.empty()) {
        const fs::path dir = fits_dir.empty() ? outdir / "fits" : fs::path(fits_dir);
        auto load = [&](ModelVariant v) {
          const fs::path p = fit_path(dir, recover_model, v);
          if (!fs::exists(p)) throw ConfigError("missing fit file " + p.string());
          return fit_result_from_json(nlohmann::json::parse(read_text(p.string()))).params;
        };
        full = load(ModelVariant::FullTree);
        myopic = load(ModelVariant::Myopic);
      } else {
        full.w_centre = myopic.w_centre = 1.0;
        full.w = myopic.w = {0.8, 0.4, 1.5, 4.0};
        full.C = myopic.C = 1.2;
      }
      record_config("recover");
      std::string csv = "seed_index,seed,condition,generator,n,delta,recovered,nll_myopic,nll_fulltree\n";
      int ok1 = 0, ok2 = 0;
      for (int i = 0; i < recover_seeds; ++i) {
        const std::uint64_t s = derive_seed(cfg.seed, "recover/" + std::to_string(i));
        const auto stimuli = random_stimuli(recover_n, s);
        const auto [c1, c2] = recovery_test(stimuli, full, myopic, s, cfg.fit_options());
        ok1 += c1.recovered;
        ok2 += c2.recovered;
        for (const auto* c : {&c1, &c2}) {
          csv += std::to_string(i) + "," + std::to_string(s) + "," +
                 (c->generator == ModelVariant::FullTree ? "1" : "2") + "," + std::string(to_string(c->generator)) +
                 "," + std::to_string(c->n) + "," + format_double(c->delta) + "," +
                 (c->recovered ? "true" : "false") + "," + format_double(c->nll_myopic) + "," +
                 format_double(c->nll_fulltree) + "\n";
        }
      }
      write_text(outdir / "recovery.csv", csv);
      out << "condition 1 (fulltree data, delta > 0): " << ok1 << "/" << recover_seeds << "\n"
          << "condition 2 (myopic data, delta < 0): " << ok2 << "/" << recover_seeds << "\n";
    } else if (*regress_cmd) {
      const Table t = read_csv(table_path);
      const int yi = t.column(y_col);
      std::vector<int> xi;
      const auto xs = split_list(x_cols);
      for (const auto& x : xs) xi.push_back(t.column(x));
      const int wi = cfg.weights.empty() ? -1 : t.column(cfg.weights);
      std::vector<double> y, w;
      std::vector<RegressionColumn> X;
      for (const auto& name : xs) X.push_back({name, {}});
      int dropped = 0;
      for (const auto& row : t.rows) {
        auto cell = [&](int c, double& v) {
          return c < static_cast<int>(row.size()) && parse_double(row[static_cast<std::size_t>(c)], v);
        };
        double yv = 0, wv = 1;
        std::vector<double> xv(xi.size());
        bool ok = cell(yi, yv) && (wi < 0 || cell(wi, wv));
        for (std::size_t k = 0; k < xi.size() && ok; ++k) ok = cell(xi[k], xv[k]);
        if (!ok) {
          ++dropped;
          continue;
        }
        y.push_back(yv);
        if (wi >= 0) w.push_back(wv);
        for (std::size_t k = 0; k < xi.size(); ++k) X[k].values.push_back(xv[k]);
      }
      if (dropped) err << "dropped " << dropped << " rows with missing or non-numeric cells\n";
      RegressOptions opts;
      opts.permutations = cfg.permutations;
      opts.seed = cfg.seed;
      opts.weights = w;
      record_config("regress");
      const RegressionResult r = regress(y, X, opts);
      write_text(outdir / "regression.csv", regression_csv(r));
      out << regression_csv(r) << "n = " << r.n << ", R^2 = " << format_double(r.r_squared) << "\n";
    } else if (*prune) {
      const std::string trace = read_text(trace_path);
      const auto labels = read_labels_file(labels_path);
      std::optional<Coord> target;
      if (!target_text.empty()) target = parse_target(target_text);
      if (!chosen_text.empty()) {
        if (target) throw ConfigError("--target and --largest-unchosen are exclusive");
        target = largest_unchosen_branch(labels, parse_target(chosen_text));
        if (!target) throw UnknownTarget("no branch other than " + chosen_text);
      }
      std::vector<EditKind> kinds;
      if (strategy_name == "all") {
        kinds = {EditKind::RemoveFinalDecision};
        if (target) {
          kinds.insert(kinds.end(),
                       {EditKind::RemoveFinalPlusBranch, EditKind::AddBackDepth1, EditKind::AddBackDepth1And2});
        }
      } else {
        const auto k = edit_kind_from_string(strategy_name);
        if (!k) throw ConfigError("unknown strategy '" + strategy_name + "'");
        if (*k != EditKind::RemoveFinalDecision && !target) throw ConfigError(strategy_name + " needs --target");
        kinds = {*k};
      }
      record_config("prune");
      std::string bundle;
      for (EditKind k : kinds) {
        const EditResult r = apply_strategy(trace, labels, {k, k == EditKind::RemoveFinalDecision ? std::nullopt : target});
        bundle += to_json(r).dump() + "\n";
        if (!r.rejected) write_text(outdir / ("edited_" + std::string(to_string(k)) + ".txt"), r.edited);
        out << to_string(k) << ": removed paragraphs [";
        for (std::size_t i = 0; i < r.removed_paragraphs.size(); ++i) {
          out << (i ? "," : "") << r.removed_paragraphs[i];
        }
        out << "], fraction " << format_double(r.removal_fraction) << (r.rejected ? ", rejected" : "") << "\n";
      }
      write_text(outdir / "edits.jsonl", bundle);
    } else if (*report) {
      record_config("report");
      std::string md = "# fourplan report\n\n";
      if (cfg.dataset.empty()) {
        const auto specs = split_list(cfg.agents);
        tournament_step(cfg, specs, externals, out);
        cfg.dataset = (outdir / "games.jsonl").string();
        md += "## Standings\n\n" + markdown_table(read_text((outdir / "standings.csv").string())) + "\n";
      }
      const Dataset data = load_dataset(cfg.dataset);
      const auto summaries = metrics_step(cfg, data, out);
      const auto fits = fit_step(cfg, data, {kAllVariants.begin(), kAllVariants.end()}, "", out, err);
      const auto reports = compare_step(cfg, data, fits, out, err);
      nlohmann::ordered_json plots = nlohmann::ordered_json::array();
      for (const auto& p : standard_plots()) plots.push_back(to_json(p));
      write_text(outdir / "plots.json", plots.dump(2) + "\n");
      md += "## Effort metrics\n\n" + markdown_table(summaries_csv(summaries)) + "\n";
      md += "## Model fits\n\n" + markdown_table(variants_csv(reports)) + "\n";
      md += "## Variant comparison\n\n" + markdown_table(comparison_csv(reports)) + "\n";
      md += "## Normalised weights (myopic fits)\n\n" +
            markdown_table(read_text((outdir / "weights.csv").string())) + "\n";
      write_text(outdir / "report.md", md);
      out << "report written to " << (outdir / "report.md").string() << "\n";
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cli

inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  return cli::run(argc, argv, out, err);
}

}  // namespace fourplan
