#include <gtest/gtest.h>

#include <set>

#include "fourplan/board.hpp"
#include "oracles.hpp"

namespace fourplan {
namespace {

TEST(Fen, EmptyBoard) {
  const BoardState s = parse_fen("9/9/9/9");
  EXPECT_EQ(s.piece_count(), 0);
  EXPECT_EQ(s.to_move(), Player::White);
  EXPECT_EQ(to_fen(s), "9/9/9/9");
}

TEST(Fen, ExamplePosition) {
  const BoardState s = parse_fen("1WBB5/2BW1W3/1W1BW4/9");
  const std::set<Coord> white = {{0, 1}, {1, 3}, {1, 5}, {2, 1}, {2, 4}};
  const std::set<Coord> black = {{0, 2}, {0, 3}, {1, 2}, {2, 3}};
  for (int i = 0; i < kCells; ++i) {
    const Coord c = Coord::from_index(i);
    const Cell expected = white.count(c) ? Cell::White : black.count(c) ? Cell::Black : Cell::Empty;
    EXPECT_EQ(s.at(c), expected) << to_string(c);
  }
  EXPECT_EQ(s.to_move(), Player::Black);
  EXPECT_EQ(to_fen(s), "1WBB5/2BW1W3/1W1BW4/9");
}

TEST(Fen, RejectsBadRows) {
  EXPECT_THROW(parse_fen("WWWW6/9/9/9"), MalformedFen);
  EXPECT_THROW(parse_fen("9/9/9"), MalformedFen);
  EXPECT_THROW(parse_fen("9/9/9/9/9"), MalformedFen);
  EXPECT_THROW(parse_fen("8/9/9/9"), MalformedFen);
  EXPECT_THROW(parse_fen("9/9/9/9X"), MalformedFen);
  EXPECT_THROW(parse_fen("09/9/9/9"), MalformedFen);
  EXPECT_THROW(parse_fen(""), MalformedFen);
}

TEST(Fen, RejectsPieceImbalance) {
  EXPECT_THROW(parse_fen("B8/9/9/9"), IllegalPieceBalance);
  EXPECT_THROW(parse_fen("WW7/9/9/9"), IllegalPieceBalance);
  EXPECT_THROW(parse_fen("9/9/9/9", Player::Black), IllegalPieceBalance);
  EXPECT_NO_THROW(parse_fen("W8/9/9/9", Player::Black));
}

TEST(Fen, SplitRunsAcceptedAndCanonicalised) {
  const BoardState s = parse_fen("11W114/9/9/9");
  EXPECT_EQ(s.at(Coord{0, 2}), Cell::White);
  EXPECT_EQ(to_fen(s), "2W6/9/9/9");
}

TEST(Fen, SingleWhiteBottomRight) {
  const BoardState s = apply_move(BoardState{}, Coord{3, 8});
  EXPECT_EQ(to_fen(s), "9/9/9/8W");
}

TEST(Fen, RoundTripRandomStates) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const BoardState s = oracle::random_board(rng);
    EXPECT_EQ(parse_fen(to_fen(s)), s);
  }
}

TEST(Moves, EmptyBoardHasAllCells) {
  EXPECT_EQ(legal_moves(BoardState{}).size(), 36u);
}

TEST(Moves, ExamplePositionHas27) {
  EXPECT_EQ(legal_moves(parse_fen("1WBB5/2BW1W3/1W1BW4/9")).size(), 27u);
}

TEST(Moves, FullDrawnBoardIsTerminal) {
  const BoardState s = parse_fen("WWBBWWBBW/BBWWBBWWB/WWBBWWBBW/BBWWBBWWB");
  EXPECT_EQ(winner(s), Outcome::Draw);
  EXPECT_THROW(legal_moves(s), TerminalState);
  EXPECT_THROW(apply_move(s, Coord{0, 0}), TerminalState);
}

TEST(Moves, ApplyIsPure) {
  const BoardState empty;
  const BoardState after = apply_move(empty, Coord{0, 0});
  EXPECT_EQ(after.at(Coord{0, 0}), Cell::White);
  EXPECT_EQ(after.to_move(), Player::Black);
  EXPECT_EQ(empty, BoardState{});
  EXPECT_THROW(apply_move(after, Coord{0, 0}), OccupiedCell);
  EXPECT_THROW(apply_move(after, Coord{4, 0}), OutOfBounds);
  EXPECT_THROW(apply_move(after, Coord{0, -1}), OutOfBounds);
}

TEST(Moves, CompletingFourWins) {
  const BoardState s = parse_fen("WWW6/BBB6/9/9");
  EXPECT_EQ(s.to_move(), Player::White);
  const BoardState after = apply_move(s, Coord{0, 3});
  EXPECT_EQ(winner(after), Outcome::White);
  EXPECT_THROW(legal_moves(after), TerminalState);
}

TEST(Winner, Examples) {
  EXPECT_EQ(winner(parse_fen("WWWW5/BBB6/9/9")), Outcome::White);
  // Down-left diagonal from (0,3); White's four pieces only balance the counts.
  EXPECT_THROW(parse_fen("3B5/2B6/1B7/B8"), IllegalPieceBalance);
  EXPECT_EQ(winner(parse_fen("3BWW3/2B3WW1/1B7/B8")), Outcome::Black);
  EXPECT_EQ(winner(BoardState{}), Outcome::Ongoing);
}

TEST(Winner, MatchesBruteForceScan) {
  Rng rng(5);
  const auto windows = oracle::windows();
  for (int i = 0; i < 3000; ++i) {
    const BoardState s = oracle::random_board(rng);
    bool white = false, black = false;
    for (const auto& w : windows) {
      int nw = 0, nb = 0;
      for (const auto& c : w) {
        nw += s.at(c) == Cell::White;
        nb += s.at(c) == Cell::Black;
      }
      white = white || nw == 4;
      black = black || nb == 4;
    }
    const Outcome o = winner(s);
    if (white && !black) {
      EXPECT_EQ(o, Outcome::White);
    }
    if (black && !white) {
      EXPECT_EQ(o, Outcome::Black);
    }
    if (white && black) {
      EXPECT_TRUE(o == Outcome::White || o == Outcome::Black);
    }
    if (!white && !black) {
      EXPECT_EQ(o, s.piece_count() == 36 ? Outcome::Draw : Outcome::Ongoing);
    }
  }
}

TEST(Windows, CensusAndOrdering) {
  const auto& w = all_windows();
  ASSERT_EQ(w.size(), 45u);
  EXPECT_EQ(w.front(), (Window{Coord{0, 0}, Coord{0, 1}, Coord{0, 2}, Coord{0, 3}}));
  EXPECT_EQ(w.back(), (Window{Coord{0, 8}, Coord{1, 7}, Coord{2, 6}, Coord{3, 5}}));
  int horizontal = 0, vertical = 0, down_right = 0, down_left = 0;
  for (const auto& win : w) {
    for (const auto& c : win) EXPECT_TRUE(c.in_bounds());
    const int dr = win[1].row - win[0].row;
    const int dc = win[1].col - win[0].col;
    if (dr == 0) ++horizontal;
    if (dc == 0) ++vertical;
    if (dr == 1 && dc == 1) {
      ++down_right;
      EXPECT_EQ(win[0].row, 0);
      EXPECT_LE(win[0].col, 5);
    }
    if (dr == 1 && dc == -1) {
      ++down_left;
      EXPECT_EQ(win[0].row, 0);
      EXPECT_GE(win[0].col, 3);
    }
  }
  EXPECT_EQ(horizontal, 24);
  EXPECT_EQ(vertical, 9);
  EXPECT_EQ(down_right, 6);
  EXPECT_EQ(down_left, 6);

  const auto expected = oracle::windows();
  std::set<Window> a(w.begin(), w.end()), b(expected.begin(), expected.end());
  EXPECT_EQ(a, b);
}

TEST(Alternation, LegalSequencesKeepBalance) {
  Rng rng(3);
  for (int g = 0; g < 200; ++g) {
    BoardState s;
    while (!is_terminal(s)) {
      const auto moves = legal_moves(s);
      s = apply_move(s, moves[uniform_int(rng, 0, static_cast<int>(moves.size()) - 1)]);
      const int diff = s.count(Cell::White) - s.count(Cell::Black);
      ASSERT_TRUE(diff == 0 || diff == 1);
      ASSERT_EQ(s.to_move() == Player::White, diff == 0);
    }
  }
}

TEST(Notation, MoveAndCoordinate) {
  EXPECT_EQ(parse_move_notation("m 3 8"), (Coord{3, 8}));
  EXPECT_EQ(parse_move_notation("m 0 0"), (Coord{0, 0}));
  EXPECT_FALSE(parse_move_notation("m  3 8"));
  EXPECT_FALSE(parse_move_notation("m 3,8"));
  EXPECT_FALSE(parse_move_notation("3 8"));
  EXPECT_EQ(to_move_notation(Coord{1, 4}), "m 1 4");
  EXPECT_EQ(parse_coord("2,4"), (Coord{2, 4}));
  EXPECT_THROW(parse_coord("4,9"), BadCoordinate);
  EXPECT_THROW(parse_coord("2, 4"), BadCoordinate);
  EXPECT_THROW(parse_coord("a,b"), BadCoordinate);
}

}  // namespace
}  // namespace fourplan
