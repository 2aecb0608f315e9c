#pragma once

// One logged turn and the line-delimited dataset file that stores them.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"
#include "fourplan/tree.hpp"

namespace fourplan {

struct TurnRecord {
  std::string game_id;
  int turn_index = 0;
  std::string fen;
  Player player = Player::White;
  std::optional<Coord> chosen_move;
  std::string raw_response;
  std::optional<SearchTree> tree;
  std::string model_name;
  /// Why `tree` is absent when the document was present but unusable
  /// ("EmptyForest", "MalformedDocument", "BadCoordinate"); empty otherwise.
  std::string tree_error;

  BoardState board() const { return parse_fen(fen, player); }
};

inline nlohmann::ordered_json to_json(const TurnRecord& r) {
  nlohmann::ordered_json j;
  j["game_id"] = r.game_id;
  j["turn_index"] = r.turn_index;
  j["fen"] = r.fen;
  j["player"] = std::string(to_string(r.player));
  j["chosen_move"] = r.chosen_move ? nlohmann::ordered_json(to_string(*r.chosen_move))
                                   : nlohmann::ordered_json(nullptr);
  j["raw_response"] = r.raw_response;
  if (r.tree) {
    j["tree"] = nlohmann::ordered_json::parse(serialize_trees(*r.tree));
  } else if (r.tree_error == "EmptyForest") {
    j["tree"] = nlohmann::ordered_json::parse(R"({"trees": []})");
  } else {
    j["tree"] = nullptr;
  }
  j["model_name"] = r.model_name;
  return j;
}

inline std::string to_json_line(const TurnRecord& r) { return to_json(r).dump(); }

/// Decodes one dataset record. A malformed tree document or chosen move does
/// not reject the record; it leaves the field absent so the exclusion filter
/// can account for it.
inline TurnRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw MalformedRecord("record must be a JSON object");
  TurnRecord r;
  try {
    r.game_id = j.value("game_id", std::string{});
    r.turn_index = j.value("turn_index", 0);
    r.fen = j.at("fen").get<std::string>();
    r.model_name = j.value("model_name", std::string{});
    r.raw_response = j.value("raw_response", std::string{});
    const auto player = player_from_string(j.at("player").get<std::string>());
    if (!player) throw MalformedRecord("player must be White or Black");
    r.player = *player;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedRecord(std::string("bad record field: ") + e.what());
  }
  try {
    (void)parse_fen(r.fen, r.player);
  } catch (const Error& e) {
    throw MalformedRecord(e.what());
  }
  if (j.contains("chosen_move") && j.at("chosen_move").is_string()) {
    try {
      r.chosen_move = parse_coord(j.at("chosen_move").get<std::string>());
    } catch (const BadCoordinate&) {
      r.chosen_move.reset();
    }
  }
  if (j.contains("tree") && !j.at("tree").is_null()) {
    try {
      r.tree = parse_trees(j.at("tree"), r.fen);
    } catch (const EmptyForest&) {
      r.tree_error = "EmptyForest";
    } catch (const BadCoordinate&) {
      r.tree_error = "BadCoordinate";
    } catch (const MalformedDocument&) {
      r.tree_error = "MalformedDocument";
    }
  }
  return r;
}

inline TurnRecord record_from_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedRecord(std::string("record is not valid JSON: ") + e.what());
  }
  return record_from_json(j);
}

/// Reads a dataset file. Lines that carry a "result" key (game-log trailers)
/// and blank lines are skipped.
inline std::vector<TurnRecord> read_records(std::istream& in) {
  std::vector<TurnRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && j.contains("result")) continue;
    try {
      out.push_back(record_from_json(j));
    } catch (const Error& e) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TurnRecord> read_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedRecord("cannot open dataset " + path);
  return read_records(in);
}

inline void write_records(std::ostream& out, const std::vector<TurnRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

/// The trailing line of a game log.
struct GameResult {
  std::string game_id;
  std::string white;
  std::string black;
  Outcome result = Outcome::Draw;
  /// "win", "draw", "forfeit:<reason>" or "error:<reason>".
  std::string termination;

  friend bool operator==(const GameResult&, const GameResult&) = default;
};

inline nlohmann::ordered_json to_json(const GameResult& g) {
  nlohmann::ordered_json j;
  j["game_id"] = g.game_id;
  j["white"] = g.white;
  j["black"] = g.black;
  j["result"] = std::string(to_string(g.result));
  j["termination"] = g.termination;
  return j;
}

inline GameResult game_result_from_json(const nlohmann::json& j) {
  GameResult g;
  try {
    g.game_id = j.value("game_id", std::string{});
    g.white = j.at("white").get<std::string>();
    g.black = j.at("black").get<std::string>();
    const std::string r = j.at("result").get<std::string>();
    if (r == "White") {
      g.result = Outcome::White;
    } else if (r == "Black") {
      g.result = Outcome::Black;
    } else if (r == "Draw") {
      g.result = Outcome::Draw;
    } else {
      throw MalformedRecord("result must be White, Black or Draw");
    }
    g.termination = j.value("termination", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw MalformedRecord(std::string("bad game result: ") + e.what());
  }
  return g;
}

/// The result trailers of a game-log stream; turn lines are skipped.
inline std::vector<GameResult> read_game_results(std::istream& in) {
  std::vector<GameResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedRecord(std::string("game log line is not valid JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("result")) out.push_back(game_result_from_json(j));
  }
  return out;
}

inline std::vector<GameResult> read_game_results_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedRecord("cannot open game log " + path);
  return read_game_results(in);
}

}  // namespace fourplan
