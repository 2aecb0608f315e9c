#pragma once

// Four-in-a-row on a 4x9 grid without gravity: FEN codec, legality, move
// application, terminal detection and the 45 line windows.

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fourplan/errors.hpp"

namespace fourplan {

inline constexpr int kRows = 4;
inline constexpr int kCols = 9;
inline constexpr int kCells = kRows * kCols;
inline constexpr int kWindowCount = 45;

enum class Cell : std::uint8_t { Empty, White, Black };
enum class Player : std::uint8_t { White, Black };
enum class Outcome : std::uint8_t { White, Black, Draw, Ongoing };

constexpr Player opponent(Player p) {
  return p == Player::White ? Player::Black : Player::White;
}

constexpr Cell cell_of(Player p) {
  return p == Player::White ? Cell::White : Cell::Black;
}

inline std::string_view to_string(Player p) {
  return p == Player::White ? "White" : "Black";
}

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::White: return "White";
    case Outcome::Black: return "Black";
    case Outcome::Draw: return "Draw";
    case Outcome::Ongoing: return "Ongoing";
  }
  return "Ongoing";
}

/// Accepts "White"/"Black" in any case and the single letters W/B.
inline std::optional<Player> player_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "white" || lower == "w") return Player::White;
  if (lower == "black" || lower == "b") return Player::Black;
  return std::nullopt;
}

/// Zero-indexed cell address; row 0 is the top row, col 0 the left column.
struct Coord {
  int row = 0;
  int col = 0;

  constexpr bool in_bounds() const {
    return row >= 0 && row < kRows && col >= 0 && col < kCols;
  }
  constexpr int index() const { return row * kCols + col; }
  static constexpr Coord from_index(int i) { return Coord{i / kCols, i % kCols}; }

  friend constexpr auto operator<=>(const Coord&, const Coord&) = default;
};

/// "r,c" with no spaces, the coordinate form used in tree and label files.
inline std::string to_string(Coord c) {
  return std::to_string(c.row) + "," + std::to_string(c.col);
}

/// "m r c", the move notation agents answer with.
inline std::string to_move_notation(Coord c) {
  return "m " + std::to_string(c.row) + " " + std::to_string(c.col);
}

namespace detail {

inline std::optional<int> parse_small_int(std::string_view s) {
  if (s.empty() || s.size() > 3) return std::nullopt;
  int v = 0;
  for (char ch : s) {
    if (ch < '0' || ch > '9') return std::nullopt;
    v = v * 10 + (ch - '0');
  }
  return v;
}

}  // namespace detail

/// Parses the strict "r,c" form. Throws BadCoordinate on anything else or when
/// the cell lies outside the 4x9 grid.
inline Coord parse_coord(std::string_view s) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) {
    throw BadCoordinate("coordinate '" + std::string(s) + "' is not of the form r,c");
  }
  const auto r = detail::parse_small_int(s.substr(0, comma));
  const auto c = detail::parse_small_int(s.substr(comma + 1));
  if (!r || !c) {
    throw BadCoordinate("coordinate '" + std::string(s) + "' is not numeric");
  }
  const Coord out{*r, *c};
  if (!out.in_bounds()) {
    throw BadCoordinate("coordinate '" + std::string(s) + "' is outside the 4x9 board");
  }
  return out;
}

/// Strict "m <row> <col>" with single spaces. Returns nullopt on a syntax
/// error; bounds are not checked here.
inline std::optional<Coord> parse_move_notation(std::string_view s) {
  if (s.size() < 5 || s[0] != 'm' || s[1] != ' ') return std::nullopt;
  const auto rest = s.substr(2);
  const auto space = rest.find(' ');
  if (space == std::string_view::npos) return std::nullopt;
  const auto r = detail::parse_small_int(rest.substr(0, space));
  const auto c = detail::parse_small_int(rest.substr(space + 1));
  if (!r || !c) return std::nullopt;
  return Coord{*r, *c};
}

using Window = std::array<Coord, 4>;

namespace detail {

inline std::array<Window, kWindowCount> build_windows() {
  std::array<Window, kWindowCount> out{};
  int n = 0;
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c + 3 < kCols; ++c) {
      out[n++] = {Coord{r, c}, Coord{r, c + 1}, Coord{r, c + 2}, Coord{r, c + 3}};
    }
  }
  for (int c = 0; c < kCols; ++c) {
    out[n++] = {Coord{0, c}, Coord{1, c}, Coord{2, c}, Coord{3, c}};
  }
  for (int c = 0; c <= 5; ++c) {
    out[n++] = {Coord{0, c}, Coord{1, c + 1}, Coord{2, c + 2}, Coord{3, c + 3}};
  }
  for (int c = 3; c <= 8; ++c) {
    out[n++] = {Coord{0, c}, Coord{1, c - 1}, Coord{2, c - 2}, Coord{3, c - 3}};
  }
  return out;
}

}  // namespace detail

/// Every length-4 line on the board: horizontals row by row, then verticals,
/// then down-right diagonals, then down-left diagonals.
inline const std::array<Window, kWindowCount>& all_windows() {
  static const auto windows = detail::build_windows();
  return windows;
}

/// Same windows as flat cell indices.
inline const std::array<std::array<std::uint8_t, 4>, kWindowCount>& window_indices() {
  static const auto table = [] {
    std::array<std::array<std::uint8_t, 4>, kWindowCount> t{};
    const auto& w = all_windows();
    for (int i = 0; i < kWindowCount; ++i) {
      for (int k = 0; k < 4; ++k) t[i][k] = static_cast<std::uint8_t>(w[i][k].index());
    }
    return t;
  }();
  return table;
}

class BoardState {
 public:
  using Cells = std::array<Cell, kCells>;

  /// Empty board, White to move.
  BoardState() { cells_.fill(Cell::Empty); }

  /// Validates the alternation invariant and infers the side to move. An
  /// explicit `to_move` must agree with the inferred one.
  static BoardState from_cells(const Cells& cells,
                               std::optional<Player> to_move = std::nullopt) {
    BoardState s;
    s.cells_ = cells;
    const int white = s.count(Cell::White);
    const int black = s.count(Cell::Black);
    if (white - black != 0 && white - black != 1) {
      throw IllegalPieceBalance("piece counts W=" + std::to_string(white) +
                                " B=" + std::to_string(black) +
                                " violate alternation (White moves first)");
    }
    s.to_move_ = white == black ? Player::White : Player::Black;
    if (to_move && *to_move != s.to_move_) {
      throw IllegalPieceBalance(std::string("stated player to move ") +
                                std::string(to_string(*to_move)) +
                                " contradicts piece counts");
    }
    return s;
  }

  Cell at(Coord c) const { return cells_[c.index()]; }
  Cell at_index(int i) const { return cells_[i]; }
  Player to_move() const { return to_move_; }
  const Cells& cells() const { return cells_; }

  int count(Cell kind) const {
    return static_cast<int>(std::count(cells_.begin(), cells_.end(), kind));
  }
  int piece_count() const { return kCells - count(Cell::Empty); }

  /// Places the side-to-move's piece without checking whether the game is
  /// already decided. Returns nullopt for an occupied or off-board cell.
  std::optional<BoardState> try_place(Coord c) const {
    if (!c.in_bounds() || cells_[c.index()] != Cell::Empty) return std::nullopt;
    BoardState next = *this;
    next.cells_[c.index()] = cell_of(to_move_);
    next.to_move_ = opponent(to_move_);
    return next;
  }

  friend bool operator==(const BoardState&, const BoardState&) = default;

 private:
  Cells cells_{};
  Player to_move_ = Player::White;
};

/// Decodes a FEN string. Runs of empties may be split ("11" == "2"); each row
/// must total exactly nine cells.
inline BoardState parse_fen(std::string_view text,
                            std::optional<Player> to_move = std::nullopt) {
  BoardState::Cells cells{};
  cells.fill(Cell::Empty);
  int row = 0;
  int col = 0;
  auto fail = [&](const std::string& why) -> MalformedFen {
    return MalformedFen("bad FEN '" + std::string(text) + "': " + why);
  };
  for (char ch : text) {
    if (ch == '/') {
      if (col != kCols) throw fail("row " + std::to_string(row) + " has length " + std::to_string(col));
      ++row;
      col = 0;
      if (row >= kRows) throw fail("more than four rows");
      continue;
    }
    if (ch == 'W' || ch == 'B') {
      if (col >= kCols) throw fail("row " + std::to_string(row) + " is longer than nine cells");
      cells[row * kCols + col] = ch == 'W' ? Cell::White : Cell::Black;
      ++col;
    } else if (ch >= '1' && ch <= '9') {
      col += ch - '0';
      if (col > kCols) throw fail("row " + std::to_string(row) + " is longer than nine cells");
    } else if (ch == '0') {
      throw fail("run length 0 is not allowed");
    } else {
      throw fail(std::string("illegal character '") + ch + "'");
    }
  }
  if (row != kRows - 1) throw fail("expected four rows, got " + std::to_string(row + 1));
  if (col != kCols) throw fail("row " + std::to_string(row) + " has length " + std::to_string(col));
  return BoardState::from_cells(cells, to_move);
}

/// Canonical FEN with maximal runs of empties.
inline std::string to_fen(const BoardState& s) {
  std::string out;
  for (int r = 0; r < kRows; ++r) {
    if (r) out.push_back('/');
    int run = 0;
    for (int c = 0; c < kCols; ++c) {
      const Cell cell = s.at(Coord{r, c});
      if (cell == Cell::Empty) {
        ++run;
        continue;
      }
      if (run) out.push_back(static_cast<char>('0' + run));
      run = 0;
      out.push_back(cell == Cell::White ? 'W' : 'B');
    }
    if (run) out.push_back(static_cast<char>('0' + run));
  }
  return out;
}

/// First completed window in all_windows() order decides; a full board with
/// no completed window is a draw.
inline Outcome winner(const BoardState& s) {
  for (const auto& w : window_indices()) {
    const Cell first = s.at_index(w[0]);
    if (first == Cell::Empty) continue;
    if (s.at_index(w[1]) == first && s.at_index(w[2]) == first && s.at_index(w[3]) == first) {
      return first == Cell::White ? Outcome::White : Outcome::Black;
    }
  }
  return s.count(Cell::Empty) == 0 ? Outcome::Draw : Outcome::Ongoing;
}

inline bool is_terminal(const BoardState& s) { return winner(s) != Outcome::Ongoing; }

/// Every empty cell in row-major order.
inline std::vector<Coord> legal_moves(const BoardState& s) {
  if (is_terminal(s)) throw TerminalState("game is already decided: " + to_fen(s));
  std::vector<Coord> out;
  out.reserve(kCells);
  for (int i = 0; i < kCells; ++i) {
    if (s.at_index(i) == Cell::Empty) out.push_back(Coord::from_index(i));
  }
  return out;
}

inline BoardState apply_move(const BoardState& s, Coord move) {
  if (!move.in_bounds()) throw OutOfBounds("move " + to_string(move) + " is off the board");
  if (is_terminal(s)) throw TerminalState("game is already decided: " + to_fen(s));
  auto next = s.try_place(move);
  if (!next) throw OccupiedCell("cell " + to_string(move) + " is occupied");
  return *next;
}

}  // namespace fourplan
