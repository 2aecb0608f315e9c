#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fourplan/harness.hpp"

namespace fourplan {
namespace {

TEST(ParseResponse, ExtractsMoveAndReasoning) {
  const auto r = parse_agent_response("...thinking...<next_move>m 1 4</next_move>");
  EXPECT_EQ(r.move, (Coord{1, 4}));
  EXPECT_EQ(r.reasoning, "...thinking...");
}

TEST(ParseResponse, MissingTag) { EXPECT_THROW(parse_agent_response("m 1 4"), NoMoveTag); }

TEST(ParseResponse, UnclosedTagIsMissing) {
  EXPECT_THROW(parse_agent_response("<next_move>m 1 4"), NoMoveTag);
}

TEST(ParseResponse, LastTagWins) {
  const auto r = parse_agent_response("<next_move>m 0 0</next_move> no wait <next_move>m 2 3</next_move>");
  EXPECT_EQ(r.move, (Coord{2, 3}));
  EXPECT_EQ(r.reasoning, "<next_move>m 0 0</next_move> no wait ");
}

TEST(ParseResponse, InnerWhitespaceIgnored) {
  EXPECT_EQ(parse_agent_response("<next_move> m 3 8\n</next_move>").move, (Coord{3, 8}));
}

TEST(ParseResponse, BadSyntax) {
  EXPECT_THROW(parse_agent_response("<next_move>1,4</next_move>"), BadMoveSyntax);
  EXPECT_THROW(parse_agent_response("<next_move>m one four</next_move>"), BadMoveSyntax);
}

TEST(ParseResponse, OutOfBoundsStillParses) {
  EXPECT_EQ(parse_agent_response("<next_move>m 9 9</next_move>").move, (Coord{9, 9}));
}

TEST(Prompt, SubstitutesColour) {
  const std::string s = system_prompt(Player::Black);
  EXPECT_NE(s.find("You are playing as Black."), std::string::npos);
  EXPECT_NE(s.find("m 3 8 to place your mark in the bottom rightmost square"), std::string::npos);
  EXPECT_EQ(user_prompt("9/9/9/9", Player::White),
            "The current board state is:\nFEN: 9/9/9/9\n\nCurrent player: White (W)\n");
}

class FixedAgent : public Agent {
 public:
  FixedAgent(std::string name, std::string text) : Agent(std::move(name)), text_(std::move(text)) {}
  std::string respond(const AgentRequest&, Rng&) override { return text_; }

 private:
  std::string text_;
};

TEST(RunGame, MyopicVersusRandomCompletes) {
  MyopicBot myopic;
  RandomBot random;
  GameOptions opts;
  opts.seed = 4;
  const GameLog log = run_game(myopic, random, opts);
  EXPECT_NE(log.result, Outcome::Ongoing);
  EXPECT_FALSE(log.turns.empty());
  EXPECT_TRUE(replays_cleanly(log));
  for (const auto& t : log.turns) {
    ASSERT_TRUE(t.tree.has_value());
    EXPECT_TRUE(validate_against_board(*t.tree, t.board()).ok());
    EXPECT_NE(t.tree->roots.end(),
              std::find_if(t.tree->roots.begin(), t.tree->roots.end(),
                           [&](const TreeNode& n) { return n.move == *t.chosen_move; }));
  }
}

TEST(RunGame, OutOfBoundsMoveForfeits) {
  FixedAgent bad("bad", "<next_move>m 9 9</next_move>");
  RandomBot random;
  const GameLog log = run_game(bad, random);
  ASSERT_EQ(log.turns.size(), 1u);
  EXPECT_EQ(log.result, Outcome::Black);
  EXPECT_EQ(log.termination.rfind("forfeit:IllegalAgentMove", 0), 0u);
  EXPECT_FALSE(log.turns[0].chosen_move.has_value());
  EXPECT_EQ(log.turns[0].raw_response, "<next_move>m 9 9</next_move>");
  EXPECT_TRUE(replays_cleanly(log));
}

TEST(RunGame, OccupiedMoveForfeits) {
  RandomBot random;
  FixedAgent bad("bad", "<next_move>m 0 0</next_move>");
  const GameLog log = run_game(bad, random);
  // White plays 0,0 legally, then repeats it on its second turn.
  ASSERT_EQ(log.turns.size(), 3u);
  EXPECT_EQ(log.result, Outcome::Black);
  EXPECT_EQ(log.termination.rfind("forfeit:IllegalAgentMove", 0), 0u);
}

TEST(RunGame, ProtocolErrorForfeits) {
  RandomBot random;
  FixedAgent mute("mute", "I refuse to answer.");
  const GameLog log = run_game(random, mute);
  EXPECT_EQ(log.result, Outcome::White);
  EXPECT_EQ(log.termination.rfind("forfeit:AgentProtocolError", 0), 0u);
}

class FlakyAgent : public Agent {
 public:
  explicit FlakyAgent(int failures) : Agent("flaky"), failures_(failures) {}
  std::string respond(const AgentRequest& req, Rng&) override {
    if (calls_++ < failures_) return "<next_move>m 9 9</next_move>";
    return "<next_move>" + to_move_notation(legal_moves(req.state).front()) + "</next_move>";
  }

 private:
  int failures_;
  int calls_ = 0;
};

TEST(RunGame, RetriesAreBounded) {
  {
    FlakyAgent flaky(3);
    RandomBot random;
    GameOptions opts;
    opts.retries = 3;
    const GameLog log = run_game(flaky, random, opts);
    EXPECT_EQ(log.termination.rfind("forfeit", 0), std::string::npos);
  }
  {
    FlakyAgent flaky(4);
    RandomBot random;
    GameOptions opts;
    opts.retries = 3;
    const GameLog log = run_game(flaky, random, opts);
    EXPECT_EQ(log.termination.rfind("forfeit:IllegalAgentMove", 0), 0u);
  }
}

TEST(RunGame, ReplayReproducesLog) {
  FullTreeBot full("fulltree", default_bot_params(), 2);
  RandomBot random;
  GameOptions opts;
  opts.game_id = "replay-me";
  opts.seed = 17;
  const GameLog original = run_game(random, full, opts);
  std::vector<TurnRecord> white, black;
  for (const auto& t : original.turns) (t.player == Player::White ? white : black).push_back(t);
  ReplayAgent w(original.white, white), b(original.black, black);
  const GameLog replay = run_game(w, b, opts);
  std::ostringstream a, c;
  write_game_log(a, original);
  write_game_log(c, replay);
  EXPECT_EQ(a.str(), c.str());
}

TEST(RunGame, DeterministicLogs) {
  RandomBot r1("r1"), r2("r2");
  GameOptions opts;
  opts.seed = 99;
  std::ostringstream a, b, c;
  write_game_log(a, run_game(r1, r2, opts));
  write_game_log(b, run_game(r1, r2, opts));
  opts.seed = 100;
  write_game_log(c, run_game(r1, r2, opts));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(GameLogFile, RoundTrip) {
  MyopicBot m;
  RandomBot r;
  GameOptions opts;
  opts.seed = 3;
  const GameLog log = run_game(m, r, opts);
  std::stringstream s;
  write_game_log(s, log);
  write_game_log(s, log);
  const auto back = read_game_logs(s);
  ASSERT_EQ(back.size(), 2u);
  std::ostringstream again;
  write_game_log(again, back[0]);
  std::ostringstream orig;
  write_game_log(orig, log);
  EXPECT_EQ(again.str(), orig.str());
  EXPECT_TRUE(replays_cleanly(back[1]));
}

TEST(Replays, TamperedLogFails) {
  MyopicBot m;
  RandomBot r;
  GameLog log = run_game(m, r);
  ASSERT_GE(log.turns.size(), 3u);
  log.turns[2].fen = "9/9/9/9";
  EXPECT_FALSE(replays_cleanly(log));
}

// Each position has a four open for the mover.
TEST(MyopicBot, CompletesAvailableFour) {
  Rng rng(1);
  const char* fens[] = {"WWW6/BB7/B8/9", "9/1BBB5/WW1W5/9", "W8/1W7/2W4BB/B8", "9/9/BBB2W3/WWW6"};
  const Coord wins[] = {{0, 3}, {2, 2}, {3, 3}, {2, 3}};
  MyopicBot bot;
  for (int i = 0; i < 4; ++i) {
    const BoardState s = parse_fen(fens[i]);
    AgentRequest req{"g", 0, s, to_fen(s), s.to_move()};
    const auto move = parse_agent_response(bot.respond(req, rng)).move;
    const BoardState after = apply_move(s, move);
    EXPECT_EQ(winner(after), s.to_move() == Player::White ? Outcome::White : Outcome::Black)
        << fens[i] << " played " << to_string(move) << " expected e.g. " << to_string(wins[i]);
  }
}

TEST(MyopicBot, CompletesFourOnRandomBoards) {
  Rng rng(8);
  MyopicBot bot;
  int checked = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    BoardState s;
    const int k = uniform_int(rng, 5, 30);
    for (int i = 0; i < k && !is_terminal(s); ++i) {
      const auto moves = legal_moves(s);
      s = apply_move(s, moves[uniform_int(rng, 0, static_cast<int>(moves.size()) - 1)]);
    }
    if (is_terminal(s)) continue;
    const Outcome mine = s.to_move() == Player::White ? Outcome::White : Outcome::Black;
    bool available = false;
    for (Coord m : legal_moves(s)) available = available || winner(apply_move(s, m)) == mine;
    if (!available) continue;
    ++checked;
    AgentRequest req{"g", 0, s, to_fen(s), s.to_move()};
    const Coord move = parse_agent_response(bot.respond(req, rng)).move;
    ASSERT_EQ(winner(apply_move(s, move)), mine) << to_fen(s);
  }
  EXPECT_GT(checked, 100);
}

TEST(FullTreeBot, CompletesFourAndBlocks) {
  Rng rng(1);
  FullTreeBot bot;
  {
    const BoardState s = parse_fen("WWW6/BB7/B8/9");
    AgentRequest req{"g", 0, s, to_fen(s), s.to_move()};
    EXPECT_EQ(winner(apply_move(s, parse_agent_response(bot.respond(req, rng)).move)), Outcome::White);
  }
  {
    // Black to move must stop W on row 0 at (0,3); there is no Black four available.
    const BoardState s = parse_fen("WWW6/9/B8/B8");
    ASSERT_EQ(s.to_move(), Player::Black);
    AgentRequest req{"g", 0, s, to_fen(s), s.to_move()};
    EXPECT_EQ(parse_agent_response(bot.respond(req, rng)).move, (Coord{0, 3}));
  }
}

TEST(FullTreeBot, TreeHoldsPrincipalVariations) {
  Rng rng(1);
  FullTreeBot bot("f", default_bot_params(), 3, 3);
  const BoardState s = parse_fen("9/2W6/3B5/9");
  AgentRequest req{"g", 0, s, to_fen(s), s.to_move()};
  const std::string text = bot.respond(req, rng);
  const auto tree = embedded_tree(text, req.fen);
  ASSERT_TRUE(tree.has_value());
  const TreeMetrics m = measure(*tree);
  EXPECT_EQ(m.breadth, 3);
  EXPECT_EQ(m.max_depth, 3);
  EXPECT_EQ(m.size, 9);
  EXPECT_TRUE(validate_against_board(*tree, s).ok());
  EXPECT_EQ(tree->roots.front().move, parse_agent_response(text).move);
}

TEST(Schedule, PaperScale) {
  std::vector<std::string> names;
  for (int i = 0; i < 27; ++i) names.push_back("m" + std::to_string(i));
  const auto s = schedule(names, 4);
  EXPECT_EQ(s.size(), 1404u);
  std::vector<int> white(27), played(27);
  for (const auto& p : s) {
    ++white[p.white];
    ++played[p.white];
    ++played[p.black];
  }
  for (int i = 0; i < 27; ++i) {
    EXPECT_EQ(played[i], 104);
    EXPECT_EQ(white[i], 52);
  }
}

TEST(Schedule, TwoAgentsAlternate) {
  const auto s = schedule({"a", "b"}, 4);
  ASSERT_EQ(s.size(), 4u);
  int a_white = 0;
  for (const auto& p : s) a_white += p.white == 0;
  EXPECT_EQ(a_white, 2);
  EXPECT_EQ(s[0].white, 0);
  EXPECT_EQ(s[1].white, 1);
}

TEST(Standings, DrawCountsHalf) {
  const std::vector<GameResult> games = {
      {"1", "a", "b", Outcome::White, "win"},
      {"2", "b", "a", Outcome::Draw, "draw"},
      {"3", "a", "b", Outcome::Black, "win"},
  };
  const auto st = standings({"a", "b"}, games);
  EXPECT_EQ(st[0].wins, 1);
  EXPECT_EQ(st[0].draws, 1);
  EXPECT_EQ(st[0].losses, 1);
  EXPECT_DOUBLE_EQ(st[0].score(), 1.5);
  EXPECT_DOUBLE_EQ(st[1].winning_rate(), 0.5);
  EXPECT_EQ(st[0].as_white, 2);
}

TEST(Tournament, CountsAndDeterminism) {
  RandomBot r("random");
  MyopicBot m("myopic");
  FullTreeBot f("fulltree", default_bot_params(), 2);
  TournamentOptions opts;
  opts.seed = 5;
  const auto a = run_tournament({&r, &m, &f}, opts);
  const auto b = run_tournament({&r, &m, &f}, opts);
  ASSERT_EQ(a.games.size(), 12u);
  EXPECT_EQ(standings_csv(a.standings), standings_csv(b.standings));
  int total = 0;
  for (const auto& s : a.standings) {
    EXPECT_EQ(s.games, 8);
    EXPECT_EQ(s.as_white, 4);
    total += s.wins;
  }
  for (const auto& g : a.games) {
    EXPECT_TRUE(replays_cleanly(g));
    total -= g.result == Outcome::Draw ? 0 : 1;
  }
  EXPECT_EQ(total, 0);
}

TEST(Tournament, NeedsTwoAgents) {
  RandomBot r;
  EXPECT_THROW(run_tournament({&r}), ConfigError);
}

TEST(Tournament, ErroringAgentDoesNotStopTournament) {
  RandomBot r("random");
  FixedAgent bad("bad", "no move here");
  const auto res = run_tournament({&r, &bad});
  ASSERT_EQ(res.games.size(), 4u);
  EXPECT_EQ(res.standings[0].wins, 4);
}

TEST(ExternalProcess, SpeaksLineProtocol) {
  const std::string script = ::testing::TempDir() + "fourplan_ext_agent.py";
  {
    std::ofstream out(script);
    out << "import json, sys\n"
           "for line in sys.stdin:\n"
           "    req = json.loads(line)\n"
           "    assert set(req) == {'system_prompt', 'fen', 'to_move'}\n"
           "    rows = req['fen'].split('/')\n"
           "    cells = []\n"
           "    for r, row in enumerate(rows):\n"
           "        c = 0\n"
           "        for ch in row:\n"
           "            if ch.isdigit():\n"
           "                cells += [(r, c + k) for k in range(int(ch))]\n"
           "                c += int(ch)\n"
           "            else:\n"
           "                c += 1\n"
           "    r, c = cells[0]\n"
           "    print(json.dumps({'text': 'first empty cell <next_move>m %d %d</next_move>' % (r, c)}), flush=True)\n";
  }
  ExternalProcessAgent ext("ext", "python3 " + script);
  RandomBot random;
  GameOptions opts;
  opts.seed = 2;
  const GameLog log = run_game(ext, random, opts);
  EXPECT_EQ(log.termination.rfind("forfeit", 0), std::string::npos);
  EXPECT_TRUE(replays_cleanly(log));
  EXPECT_EQ(log.turns[0].chosen_move, (Coord{0, 0}));
  // The same child serves a second game.
  const GameLog again = run_game(ext, random, opts);
  EXPECT_EQ(again.termination.rfind("forfeit", 0), std::string::npos);
}

TEST(ExternalProcess, DeadChildIsProtocolError) {
  ExternalProcessAgent ext("ext", "exit 0");
  RandomBot random;
  const GameLog log = run_game(ext, random);
  EXPECT_EQ(log.termination.rfind("forfeit:AgentProtocolError", 0), 0u);
}

TEST(ExternalProcess, NonJsonIsProtocolError) {
  ExternalProcessAgent ext("ext", "while read l; do echo '<next_move>m 0 0</next_move>'; done");
  RandomBot random;
  const GameLog log = run_game(ext, random);
  EXPECT_EQ(log.termination.rfind("forfeit:AgentProtocolError", 0), 0u);
}

TEST(ExternalProcess, TimeoutIsProtocolError) {
  ExternalProcessAgent ext("ext", "sleep 5", 1);
  RandomBot random;
  const GameLog log = run_game(ext, random);
  EXPECT_EQ(log.termination.rfind("forfeit:AgentProtocolError", 0), 0u);
}

}  // namespace
}  // namespace fourplan
