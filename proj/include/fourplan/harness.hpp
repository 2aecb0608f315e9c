#pragma once

// Agents, single games, round-robin tournaments and game-log files. Agents
// answer in free text that ends with <next_move>m r c</next_move>; bot agents
// also emit the candidate tree they searched inside <tree>...</tree>.

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

#include "fourplan/board.hpp"
#include "fourplan/errors.hpp"
#include "fourplan/heuristic.hpp"
#include "fourplan/records.hpp"
#include "fourplan/tree.hpp"
#include "fourplan/util.hpp"

namespace fourplan {

// ---------------------------------------------------------------------------
// Prompt text handed to agents.

inline std::string system_prompt(Player player) {
  return "Let's play a game of Four in a Row. You are playing as " + std::string(to_string(player)) +
         ". You will be given the current game state and you will need to give the next move in a "
         "standard algebraic notation specific to this game. Feel free to think about the move, only "
         "the final answer you provide in <next_move> </next_move> tags will be played.\n"
         "\n"
         "Game Rules:\n"
         "Four in a row is played on a four-by-nine grid by two players, who alternately place the "
         "marks W and B in one of the thirty-six spaces in the grid. A player wins when they get four "
         "pieces in a row horizontally, vertically or diagonally. Player W plays first.\n"
         "\n"
         "The standard game state representation is in the following format:\n"
         "The game state will be represented in FEN notation, a compact algebraic representation "
         "inspired by chess's Forsyth-Edwards Notation. Each row of the 4x9 board is encoded as a "
         "string where 'W' represents a White piece, 'B' represents a Black piece, and numbers "
         "indicate consecutive empty spaces. Rows are separated by forward slashes ('/'), reading "
         "from top to bottom. An empty board is represented as 9/9/9/9, with each '9' indicating that "
         "all nine columns in that row are empty.\n"
         "\n"
         "Standard Algebraic Notation (SAN) Explanation:\n"
         "Issue moves in the notation m <row> <col>, for example m 0 0 to place your mark in the top "
         "leftmost square and m 3 8 to place your mark in the bottom rightmost square.\n";
}

inline std::string user_prompt(const std::string& fen, Player player) {
  return "The current board state is:\nFEN: " + fen + "\n\nCurrent player: " +
         std::string(to_string(player)) + " (" + (player == Player::White ? "W" : "B") + ")\n";
}

// ---------------------------------------------------------------------------
// Responses.

struct AgentResponse {
  Coord move;
  /// Everything before the final <next_move> tag.
  std::string reasoning;
};

/// Uses the last complete <next_move>...</next_move> pair. Surrounding
/// whitespace inside the tag is ignored; the move itself must be "m r c".
/// Bounds are not checked here.
inline AgentResponse parse_agent_response(std::string_view text) {
  static constexpr std::string_view open = "<next_move>";
  static constexpr std::string_view close = "</next_move>";
  std::size_t start = std::string_view::npos;
  std::size_t end = std::string_view::npos;
  for (std::size_t pos = text.rfind(open); pos != std::string_view::npos;
       pos = pos == 0 ? std::string_view::npos : text.rfind(open, pos - 1)) {
    const auto c = text.find(close, pos + open.size());
    if (c != std::string_view::npos) {
      start = pos;
      end = c;
      break;
    }
  }
  if (start == std::string_view::npos) throw NoMoveTag("response has no <next_move>...</next_move> tag");
  std::string_view inner = text.substr(start + open.size(), end - start - open.size());
  while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.front()))) inner.remove_prefix(1);
  while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.back()))) inner.remove_suffix(1);
  const auto move = parse_move_notation(inner);
  if (!move) throw BadMoveSyntax("move '" + std::string(inner) + "' is not of the form m <row> <col>");
  return {*move, std::string(text.substr(0, start))};
}

/// The search tree embedded in <tree>...</tree>, if any. Throws the tree
/// parsing errors when the block is present but unusable.
inline std::optional<SearchTree> embedded_tree(std::string_view text, const std::string& fen) {
  const auto open = text.find("<tree>");
  if (open == std::string_view::npos) return std::nullopt;
  const auto close = text.find("</tree>", open);
  if (close == std::string_view::npos) throw MalformedDocument("unterminated <tree> block");
  return parse_trees(text.substr(open + 6, close - open - 6), fen);
}

inline std::string format_bot_response(const SearchTree& tree, Coord move) {
  std::string out = "Candidate moves considered:";
  for (const auto& r : tree.roots) out += " " + to_string(r.move);
  out += "\n<tree>" + serialize_trees(tree) + "</tree>\n<next_move>" + to_move_notation(move) +
         "</next_move>";
  return out;
}

// ---------------------------------------------------------------------------
// Agents.

struct AgentRequest {
  std::string game_id;
  int turn_index = 0;
  BoardState state;
  std::string fen;
  Player to_move = Player::White;
};

class Agent {
 public:
  explicit Agent(std::string name) : name_(std::move(name)) {}
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  const std::string& name() const { return name_; }
  /// Raw response text for one turn. `rng` is private to this agent and game.
  virtual std::string respond(const AgentRequest& request, Rng& rng) = 0;

 private:
  std::string name_;
};

class RandomBot : public Agent {
 public:
  explicit RandomBot(std::string name = "random") : Agent(std::move(name)) {}

  std::string respond(const AgentRequest& req, Rng& rng) override {
    const auto moves = legal_moves(req.state);
    const Coord pick = moves[uniform_int(rng, 0, static_cast<int>(moves.size()) - 1)];
    SearchTree tree;
    tree.roots.push_back({pick, {}});
    if (moves.size() > 1) {
      Coord other = pick;
      while (other == pick) other = moves[uniform_int(rng, 0, static_cast<int>(moves.size()) - 1)];
      tree.roots.push_back({other, {}});
      if (uniform01(rng) < 0.5) std::swap(tree.roots[0], tree.roots[1]);
    }
    return format_bot_response(tree, pick);
  }
};

/// Default bot weights: a completed four dwarfs every other feature.
inline HeuristicParams default_bot_params() {
  HeuristicParams p;
  p.w_centre = 0.2;
  p.w = {0.6, 0.3, 2.0, 100.0};
  p.C = 1.0;
  return p;
}

/// Plays the legal move with the highest heuristic value of the resulting
/// state (ties go to the earliest cell in row-major order) and reports its
/// top candidates as one-ply trees.
class MyopicBot : public Agent {
 public:
  MyopicBot(std::string name = "myopic", HeuristicParams params = default_bot_params(), int candidates = 3)
      : Agent(std::move(name)), params_(params), candidates_(candidates) {}

  std::string respond(const AgentRequest& req, Rng&) override {
    std::vector<std::pair<double, Coord>> scored;
    for (Coord m : legal_moves(req.state)) {
      scored.emplace_back(evaluate(*req.state.try_place(m), params_, req.to_move), m);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    SearchTree tree;
    const int k = std::min<int>(candidates_, static_cast<int>(scored.size()));
    for (int i = 0; i < k; ++i) tree.roots.push_back({scored[i].second, {}});
    return format_bot_response(tree, scored.front().second);
  }

 private:
  HeuristicParams params_;
  int candidates_;
};

/// Depth-limited alpha-beta minimax over every legal move, scoring leaves
/// with the heuristic from the bot's own perspective. The emitted tree holds
/// the best candidates, each followed by its principal variation.
class FullTreeBot : public Agent {
 public:
  FullTreeBot(std::string name = "fulltree", HeuristicParams params = default_bot_params(),
              int depth_limit = 3, int candidates = 3)
      : Agent(std::move(name)), params_(params), depth_(std::max(1, depth_limit)), candidates_(candidates) {}

  std::string respond(const AgentRequest& req, Rng&) override {
    struct Scored {
      double value;
      Coord move;
      std::vector<Coord> pv;
    };
    std::vector<Scored> scored;
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (Coord m : legal_moves(req.state)) {
      std::vector<Coord> pv;
      const double v = search(*req.state.try_place(m), depth_ - 1, false, -inf, inf, req.to_move, pv);
      scored.push_back({v, m, std::move(pv)});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.value > b.value; });
    SearchTree tree;
    const int k = std::min<int>(candidates_, static_cast<int>(scored.size()));
    for (int i = 0; i < k; ++i) {
      TreeNode node{scored[i].move, {}};
      TreeNode* tip = &node;
      for (Coord c : scored[i].pv) {
        tip->children.push_back({c, {}});
        tip = &tip->children.back();
      }
      tree.roots.push_back(std::move(node));
    }
    return format_bot_response(tree, scored.front().move);
  }

 private:
  double search(const BoardState& s, int depth, bool maximizing, double alpha, double beta,
                Player self, std::vector<Coord>& pv) const {
    pv.clear();
    if (depth == 0 || is_terminal(s)) return evaluate(s, params_, self);
    double best = maximizing ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity();
    std::vector<Coord> child_pv;
    for (int i = 0; i < kCells; ++i) {
      const Coord m = Coord::from_index(i);
      const auto next = s.try_place(m);
      if (!next) continue;
      const double v = search(*next, depth - 1, !maximizing, alpha, beta, self, child_pv);
      if (maximizing ? v > best : v < best) {
        best = v;
        pv.assign(1, m);
        pv.insert(pv.end(), child_pv.begin(), child_pv.end());
      }
      if (maximizing) {
        alpha = std::max(alpha, best);
      } else {
        beta = std::min(beta, best);
      }
      if (alpha >= beta) break;
    }
    return best;
  }

  HeuristicParams params_;
  int depth_;
  int candidates_;
};

/// Replays the raw responses of a stored game for one side.
class ReplayAgent : public Agent {
 public:
  ReplayAgent(std::string name, std::vector<TurnRecord> turns)
      : Agent(std::move(name)), turns_(std::move(turns)) {}

  std::string respond(const AgentRequest& req, Rng&) override {
    for (const auto& t : turns_) {
      if (t.turn_index == req.turn_index) {
        if (t.fen != req.fen) {
          throw AgentProtocolError("replayed turn " + std::to_string(req.turn_index) +
                                   " was logged from a different position");
        }
        return t.raw_response;
      }
    }
    throw AgentProtocolError("no logged response for turn " + std::to_string(req.turn_index));
  }

 private:
  std::vector<TurnRecord> turns_;
};

/// A child process speaking one JSON object per line: requests
/// {"system_prompt", "fen", "to_move"} go to its stdin and each response
/// {"text"} comes back on its stdout. The child is started on the first
/// request and kept for later moves and games.
class ExternalProcessAgent : public Agent {
 public:
  ExternalProcessAgent(std::string name, std::string command, int timeout_seconds = 300)
      : Agent(std::move(name)), command_(std::move(command)), timeout_ms_(timeout_seconds * 1000) {}

  ~ExternalProcessAgent() override { stop(); }

  std::string respond(const AgentRequest& req, Rng&) override {
    if (pid_ <= 0) start();
    nlohmann::ordered_json j;
    j["system_prompt"] = system_prompt(req.to_move);
    j["fen"] = req.fen;
    j["to_move"] = std::string(to_string(req.to_move));
    write_all(j.dump() + "\n");
    const std::string line = read_line();
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw AgentProtocolError("agent " + name() + " sent a non-JSON line: " + e.what());
    }
    if (!resp.is_object() || !resp.contains("text") || !resp.at("text").is_string()) {
      throw AgentProtocolError("agent " + name() + " response lacks a \"text\" string");
    }
    return resp.at("text").get<std::string>();
  }

 private:
  void start() {
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
      throw AgentProtocolError(std::string("cannot create pipes: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) throw AgentProtocolError(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      close(in_pipe[0]);
      close(in_pipe[1]);
      close(out_pipe[0]);
      close(out_pipe[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  }

  void stop() {
    if (to_child_ >= 0) close(to_child_);
    to_child_ = -1;
    if (pid_ > 0) {
      int status = 0;
      bool reaped = false;
      for (int i = 0; i < 50 && !reaped; ++i) {
        reaped = waitpid(pid_, &status, WNOHANG) == pid_;
        if (!reaped) usleep(10000);
      }
      if (!reaped) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
      }
    }
    pid_ = -1;
    if (from_child_ >= 0) close(from_child_);
    from_child_ = -1;
    buffer_.clear();
  }

  void write_all(const std::string& data) {
    std::size_t done = 0;
    while (done < data.size()) {
      const ssize_t n = write(to_child_, data.data() + done, data.size() - done);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        stop();
        throw AgentProtocolError("agent " + name() + " closed its input");
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
      if (left <= 0) {
        stop();
        throw AgentProtocolError("agent " + name() + " timed out");
      }
      pollfd pfd{from_child_, POLLIN, 0};
      const int ready = poll(&pfd, 1, static_cast<int>(left));
      if (ready < 0 && errno == EINTR) continue;
      if (ready <= 0) continue;
      char chunk[4096];
      const ssize_t n = read(from_child_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        stop();
        throw AgentProtocolError("agent " + name() + " exited without answering");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  int timeout_ms_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// ---------------------------------------------------------------------------
// Games.

struct GameLog {
  std::string game_id;
  std::string white;
  std::string black;
  std::vector<TurnRecord> turns;
  Outcome result = Outcome::Draw;
  std::string termination;

  GameResult summary() const { return {game_id, white, black, result, termination}; }
};

struct GameOptions {
  std::string game_id = "game";
  std::uint64_t seed = 0;
  /// Extra attempts after an illegal or unparseable answer; 0 forfeits at once.
  int retries = 0;
};

/// Plays from the empty board until the game is decided. An unparseable or
/// illegal answer forfeits the game to the opponent; the offending turn is
/// logged with its raw response and no chosen move.
inline GameLog run_game(Agent& white, Agent& black, const GameOptions& opts = {}) {
  GameLog log;
  log.game_id = opts.game_id;
  log.white = white.name();
  log.black = black.name();
  Rng white_rng(derive_seed(opts.seed, "game/" + opts.game_id + "/White"));
  Rng black_rng(derive_seed(opts.seed, "game/" + opts.game_id + "/Black"));
  BoardState state;
  for (int turn = 0;; ++turn) {
    const Outcome o = winner(state);
    if (o != Outcome::Ongoing) {
      log.result = o;
      log.termination = o == Outcome::Draw ? "draw" : "win";
      return log;
    }
    const Player mover = state.to_move();
    Agent& agent = mover == Player::White ? white : black;
    Rng& rng = mover == Player::White ? white_rng : black_rng;
    AgentRequest req{opts.game_id, turn, state, to_fen(state), mover};

    TurnRecord rec;
    rec.game_id = opts.game_id;
    rec.turn_index = turn;
    rec.fen = req.fen;
    rec.player = mover;
    rec.model_name = agent.name();
    std::string failure;
    for (int attempt = 0; attempt <= opts.retries; ++attempt) {
      failure.clear();
      rec.chosen_move.reset();
      try {
        rec.raw_response = agent.respond(req, rng);
        const AgentResponse parsed = parse_agent_response(rec.raw_response);
        if (!state.try_place(parsed.move)) {
          throw IllegalAgentMove(to_move_notation(parsed.move) + " is off the board or occupied");
        }
        rec.chosen_move = parsed.move;
      } catch (const IllegalAgentMove& e) {
        failure = std::string("IllegalAgentMove: ") + e.what();
      } catch (const NoMoveTag& e) {
        failure = std::string("AgentProtocolError: ") + e.what();
      } catch (const BadMoveSyntax& e) {
        failure = std::string("AgentProtocolError: ") + e.what();
      } catch (const AgentProtocolError& e) {
        failure = std::string("AgentProtocolError: ") + e.what();
      }
      if (failure.empty()) break;
    }
    try {
      rec.tree = embedded_tree(rec.raw_response, rec.fen);
    } catch (const EmptyForest&) {
      rec.tree_error = "EmptyForest";
    } catch (const BadCoordinate&) {
      rec.tree_error = "BadCoordinate";
    } catch (const MalformedDocument&) {
      rec.tree_error = "MalformedDocument";
    }
    log.turns.push_back(rec);
    if (!failure.empty()) {
      log.result = mover == Player::White ? Outcome::Black : Outcome::White;
      log.termination = "forfeit:" + failure;
      return log;
    }
    state = *state.try_place(*rec.chosen_move);
  }
}

inline void write_game_log(std::ostream& out, const GameLog& log) {
  for (const auto& t : log.turns) out << to_json_line(t) << '\n';
  out << to_json(log.summary()).dump() << '\n';
}

/// Splits a game-log stream into games; each game ends at its result line.
inline std::vector<GameLog> read_game_logs(std::istream& in) {
  std::vector<GameLog> out;
  GameLog current;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MalformedRecord(std::string("game log line is not valid JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("result")) {
      const GameResult g = game_result_from_json(j);
      current.game_id = g.game_id;
      current.white = g.white;
      current.black = g.black;
      current.result = g.result;
      current.termination = g.termination;
      out.push_back(std::move(current));
      current = GameLog{};
    } else {
      current.turns.push_back(record_from_json(j));
    }
  }
  return out;
}

/// Replays the logged moves from the empty board and checks every stored
/// position and the result.
inline bool replays_cleanly(const GameLog& log) {
  BoardState s;
  for (std::size_t i = 0; i < log.turns.size(); ++i) {
    const auto& t = log.turns[i];
    if (t.fen != to_fen(s) || t.player != s.to_move()) return false;
    if (!t.chosen_move) return i + 1 == log.turns.size() && log.termination.rfind("forfeit", 0) == 0;
    const auto next = s.try_place(*t.chosen_move);
    if (!next || is_terminal(s)) return false;
    s = *next;
  }
  if (log.termination.rfind("forfeit", 0) == 0) return false;
  return winner(s) == log.result;
}

// ---------------------------------------------------------------------------
// Tournaments.

struct Pairing {
  std::string game_id;
  int white = 0;
  int black = 0;
};

/// Every unordered pair plays `games_per_pair` games, the lower-indexed agent
/// taking White in even-numbered games.
inline std::vector<Pairing> schedule(const std::vector<std::string>& names, int games_per_pair) {
  std::vector<Pairing> out;
  const int n = static_cast<int>(names.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int g = 0; g < games_per_pair; ++g) {
        Pairing p;
        p.white = g % 2 == 0 ? i : j;
        p.black = g % 2 == 0 ? j : i;
        p.game_id = names[i] + "-vs-" + names[j] + "-" + std::to_string(g);
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

struct Standing {
  std::string name;
  int games = 0;
  int wins = 0;
  int draws = 0;
  int losses = 0;
  int as_white = 0;
  double score() const { return wins + 0.5 * draws; }
  double winning_rate() const { return games > 0 ? score() / games : 0.0; }
};

inline std::vector<Standing> standings(const std::vector<std::string>& names,
                                       const std::vector<GameResult>& games) {
  std::vector<Standing> out;
  for (const auto& n : names) out.push_back({n});
  auto find = [&](const std::string& n) -> Standing* {
    for (auto& s : out) {
      if (s.name == n) return &s;
    }
    return nullptr;
  };
  for (const auto& g : games) {
    Standing* w = find(g.white);
    Standing* b = find(g.black);
    if (!w || !b) continue;
    ++w->games;
    ++b->games;
    ++w->as_white;
    if (g.result == Outcome::Draw) {
      ++w->draws;
      ++b->draws;
    } else if (g.result == Outcome::White) {
      ++w->wins;
      ++b->losses;
    } else {
      ++b->wins;
      ++w->losses;
    }
  }
  return out;
}

struct TournamentResult {
  std::vector<GameLog> games;
  std::vector<Standing> standings;
};

struct TournamentOptions {
  int games_per_pair = 4;
  std::uint64_t seed = 0;
  int retries = 0;
};

inline TournamentResult run_tournament(const std::vector<Agent*>& agents, const TournamentOptions& opts = {}) {
  if (agents.size() < 2) throw ConfigError("a tournament needs at least two agents");
  std::vector<std::string> names;
  for (const Agent* a : agents) names.push_back(a->name());
  TournamentResult res;
  std::vector<GameResult> results;
  for (const auto& p : schedule(names, opts.games_per_pair)) {
    GameOptions g;
    g.game_id = p.game_id;
    g.seed = opts.seed;
    g.retries = opts.retries;
    res.games.push_back(run_game(*agents[p.white], *agents[p.black], g));
    results.push_back(res.games.back().summary());
  }
  res.standings = standings(names, results);
  return res;
}

inline std::string standings_csv(const std::vector<Standing>& rows) {
  std::string out = "name,games,wins,draws,losses,as_white,score,winning_rate\n";
  for (const auto& s : rows) {
    out += s.name + "," + std::to_string(s.games) + "," + std::to_string(s.wins) + "," +
           std::to_string(s.draws) + "," + std::to_string(s.losses) + "," + std::to_string(s.as_white) +
           "," + format_double(s.score()) + "," + format_double(s.winning_rate()) + "\n";
  }
  return out;
}

}  // namespace fourplan
