#pragma once

// Square grid mazes: cells are open or blocked, movement is 4-connected
// between open cells. Coordinates are (x = column, y = row), origin top-left.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rrplan/error.hpp"

namespace rrplan {

struct State {
  int x = 0;
  int y = 0;

  friend constexpr auto operator<=>(const State&, const State&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const State& s) {
  return os << '(' << s.x << ',' << s.y << ')';
}

inline std::string to_string(const State& s) {
  return "(" + std::to_string(s.x) + "," + std::to_string(s.y) + ")";
}

class Maze {
 public:
  Maze() = default;

  /// Throws InvalidMaze unless start != goal, both are open and in bounds,
  /// and every blocked cell is in bounds. Reachability is not checked.
  Maze(int size, std::span<const State> blocked, State start, State goal,
       std::string id = {})
      : size_(size), cells_(checked_area(size), 0), start_(start), goal_(goal),
        id_(std::move(id)) {
    for (const State& b : blocked) {
      if (!contains(b)) throw InvalidMaze("blocked cell " + to_string(b) + " out of bounds");
      cells_[index(b)] = 1;
    }
    if (!contains(start_)) throw InvalidMaze("start out of bounds");
    if (!contains(goal_)) throw InvalidMaze("goal out of bounds");
    if (start_ == goal_) throw InvalidMaze("start and goal coincide");
    if (is_blocked(start_)) throw InvalidMaze("start is blocked");
    if (is_blocked(goal_)) throw InvalidMaze("goal is blocked");
  }

  int size() const noexcept { return size_; }
  State start() const noexcept { return start_; }
  State goal() const noexcept { return goal_; }
  const std::string& id() const noexcept { return id_; }

  Maze with_id(std::string id) const {
    Maze m = *this;
    m.id_ = std::move(id);
    return m;
  }

  bool contains(State s) const noexcept {
    return s.x >= 0 && s.y >= 0 && s.x < size_ && s.y < size_;
  }
  bool is_blocked(State s) const { return cells_[index(s)] != 0; }
  bool is_open(State s) const noexcept { return contains(s) && cells_[index(s)] == 0; }

  std::size_t index(State s) const noexcept {
    return static_cast<std::size_t>(s.y) * static_cast<std::size_t>(size_) +
           static_cast<std::size_t>(s.x);
  }
  std::size_t cell_count() const noexcept { return cells_.size(); }

  /// Blocked cells in row-major order.
  std::vector<State> blocked() const {
    std::vector<State> out;
    for (int y = 0; y < size_; ++y)
      for (int x = 0; x < size_; ++x)
        if (cells_[index({x, y})]) out.push_back({x, y});
    return out;
  }

  std::size_t wall_count() const noexcept {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
  }

  std::size_t open_count() const noexcept { return cells_.size() - wall_count(); }

  /// Grid, start and goal agree; the id is ignored.
  bool same_grid(const Maze& other) const noexcept {
    return size_ == other.size_ && cells_ == other.cells_ && start_ == other.start_ &&
           goal_ == other.goal_;
  }

  friend bool operator==(const Maze& a, const Maze& b) {
    return a.same_grid(b) && a.id_ == b.id_;
  }

 private:
  static std::size_t checked_area(int size) {
    if (size < 2) throw InvalidMaze("maze side must be at least 2");
    return static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  }

  int size_ = 0;
  std::vector<std::uint8_t> cells_;
  State start_{};
  State goal_{};
  std::string id_;
};

// ---------------------------------------------------------------- text format

/// Parses rows of '.', '#', 'S', 'G'. A single trailing newline (and '\r'
/// line endings) are accepted.
inline Maze parse_maze(std::string_view text, std::string id = {}) {
  std::vector<std::string_view> rows;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view row = text.substr(0, nl);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    rows.push_back(row);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  if (rows.empty()) throw ParseError("empty maze text");

  const std::size_t width = rows.front().size();
  std::vector<State> blocked;
  std::optional<State> start, goal;
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != width)
      throw ParseError("ragged rows: row " + std::to_string(y) + " has length " +
                       std::to_string(rows[y].size()) + ", expected " +
                       std::to_string(width));
    for (std::size_t x = 0; x < width; ++x) {
      const State s{static_cast<int>(x), static_cast<int>(y)};
      switch (rows[y][x]) {
        case '.':
          break;
        case '#':
          blocked.push_back(s);
          break;
        case 'S':
          if (start) throw ParseError("duplicate 'S'");
          start = s;
          break;
        case 'G':
          if (goal) throw ParseError("duplicate 'G'");
          goal = s;
          break;
        default:
          throw ParseError(std::string("unknown character '") + rows[y][x] + "' at " +
                           to_string(s));
      }
    }
  }
  if (!start) throw ParseError("missing 'S'");
  if (!goal) throw ParseError("missing 'G'");
  if (rows.size() != width)
    throw ParseError("non-square grid: " + std::to_string(width) + " columns, " +
                     std::to_string(rows.size()) + " rows");
  try {
    return Maze(static_cast<int>(width), blocked, *start, *goal, std::move(id));
  } catch (const InvalidMaze& e) {
    throw ParseError(e.what());
  }
}

/// Rows joined by '\n', no trailing newline.
inline std::string serialize_maze(const Maze& maze) {
  std::string out;
  const int n = maze.size();
  out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1));
  for (int y = 0; y < n; ++y) {
    if (y) out.push_back('\n');
    for (int x = 0; x < n; ++x) {
      const State s{x, y};
      if (s == maze.start())
        out.push_back('S');
      else if (s == maze.goal())
        out.push_back('G');
      else
        out.push_back(maze.is_blocked(s) ? '#' : '.');
    }
  }
  return out;
}

/// Rows of the text format, as sent over the wire.
inline std::vector<std::string> maze_rows(const Maze& maze) {
  std::vector<std::string> rows;
  const std::string text = serialize_maze(maze);
  std::string_view rest = text;
  for (int y = 0; y < maze.size(); ++y) {
    rows.emplace_back(rest.substr(0, static_cast<std::size_t>(maze.size())));
    rest.remove_prefix(std::min(rest.size(), static_cast<std::size_t>(maze.size()) + 1));
  }
  return rows;
}

// ---------------------------------------------------------------- adjacency

/// Open in-bounds cells at Manhattan distance 1, ordered up, left, right, down.
inline std::vector<State> neighbors(const Maze& maze, State s) {
  if (!maze.contains(s)) throw InvalidMaze("state " + to_string(s) + " out of bounds");
  if (maze.is_blocked(s)) throw InvalidMaze("state " + to_string(s) + " is blocked");
  std::vector<State> out;
  out.reserve(4);
  for (const State d : {State{0, -1}, State{-1, 0}, State{1, 0}, State{0, 1}}) {
    const State n{s.x + d.x, s.y + d.y};
    if (maze.is_open(n)) out.push_back(n);
  }
  return out;
}

inline bool adjacent(State a, State b) noexcept {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1;
}

// ---------------------------------------------------------------- D4 symmetry

enum class Transform : std::uint8_t {
  identity,
  rot90,
  rot180,
  rot270,
  flip_horizontal,     // mirror left-right: (x, y) -> (n-1-x, y)
  flip_vertical,       // mirror top-bottom: (x, y) -> (x, n-1-y)
  flip_main_diagonal,  // (x, y) -> (y, x)
  flip_anti_diagonal,  // (x, y) -> (n-1-y, n-1-x)
};

inline constexpr std::array<Transform, 8> kAllTransforms = {
    Transform::identity,        Transform::rot90,
    Transform::rot180,          Transform::rot270,
    Transform::flip_horizontal, Transform::flip_vertical,
    Transform::flip_main_diagonal, Transform::flip_anti_diagonal,
};

inline constexpr std::string_view transform_name(Transform t) noexcept {
  constexpr std::array<std::string_view, 8> names = {
      "identity",        "rot90",         "rot180",
      "rot270",          "flip_horizontal", "flip_vertical",
      "flip_main_diagonal", "flip_anti_diagonal"};
  return names[static_cast<std::size_t>(t)];
}

inline std::optional<Transform> parse_transform(std::string_view name) noexcept {
  for (Transform t : kAllTransforms)
    if (transform_name(t) == name) return t;
  return std::nullopt;
}

namespace detail {

// Each element acts on centred coordinates u = 2x - (n-1), v = 2y - (n-1) as a
// signed permutation matrix {a, b, c, d}: (u, v) -> (a u + b v, c u + d v).
using Mat2 = std::array<int, 4>;

inline constexpr Mat2 transform_matrix(Transform t) noexcept {
  switch (t) {
    case Transform::identity: return {1, 0, 0, 1};
    case Transform::rot90: return {0, -1, 1, 0};
    case Transform::rot180: return {-1, 0, 0, -1};
    case Transform::rot270: return {0, 1, -1, 0};
    case Transform::flip_horizontal: return {-1, 0, 0, 1};
    case Transform::flip_vertical: return {1, 0, 0, -1};
    case Transform::flip_main_diagonal: return {0, 1, 1, 0};
    case Transform::flip_anti_diagonal: return {0, -1, -1, 0};
  }
  return {1, 0, 0, 1};
}

inline constexpr Mat2 mul(const Mat2& p, const Mat2& q) noexcept {
  return {p[0] * q[0] + p[1] * q[2], p[0] * q[1] + p[1] * q[3],
          p[2] * q[0] + p[3] * q[2], p[2] * q[1] + p[3] * q[3]};
}

inline constexpr Transform from_matrix(const Mat2& m) noexcept {
  for (Transform t : kAllTransforms)
    if (transform_matrix(t) == m) return t;
  return Transform::identity;  // unreachable: D4 is closed
}

}  // namespace detail

/// Image of cell s in an n-by-n grid.
inline constexpr State map_state(State s, int n, Transform t) noexcept {
  const auto m = detail::transform_matrix(t);
  const int u = 2 * s.x - (n - 1);
  const int v = 2 * s.y - (n - 1);
  const int u2 = m[0] * u + m[1] * v;
  const int v2 = m[2] * u + m[3] * v;
  return {(u2 + n - 1) / 2, (v2 + n - 1) / 2};
}

/// compose(a, b) is "apply a, then b".
inline constexpr Transform compose(Transform a, Transform b) noexcept {
  return detail::from_matrix(detail::mul(detail::transform_matrix(b), detail::transform_matrix(a)));
}

inline constexpr Transform inverse(Transform t) noexcept {
  const auto m = detail::transform_matrix(t);
  return detail::from_matrix({m[0], m[2], m[1], m[3]});  // orthogonal: inverse = transpose
}

inline Maze apply_transform(const Maze& maze, Transform t) {
  const int n = maze.size();
  std::vector<State> blocked = maze.blocked();
  for (State& b : blocked) b = map_state(b, n, t);
  return Maze(n, blocked, map_state(maze.start(), n, t), map_state(maze.goal(), n, t),
              maze.id());
}

// ---------------------------------------------------------------- validation

struct StructuralReport {
  bool in_bounds = true;
  bool start_open = true;
  bool goal_open = true;
  bool goal_reachable = false;
  std::vector<std::string> problems;

  bool ok() const noexcept { return in_bounds && start_open && goal_open && goal_reachable; }
};

/// Construction already enforces bounds and open endpoints, so in practice
/// this reports reachability via a breadth-first flood from the start.
inline StructuralReport validate_maze(const Maze& maze) {
  StructuralReport report;
  report.in_bounds = maze.contains(maze.start()) && maze.contains(maze.goal());
  report.start_open = maze.is_open(maze.start());
  report.goal_open = maze.is_open(maze.goal());
  if (!report.in_bounds) report.problems.push_back("endpoint out of bounds");
  if (!report.start_open) report.problems.push_back("start blocked");
  if (!report.goal_open) report.problems.push_back("goal blocked");
  if (!report.in_bounds || !report.start_open) return report;

  std::vector<char> seen(maze.cell_count(), 0);
  std::deque<State> queue{maze.start()};
  seen[maze.index(maze.start())] = 1;
  while (!queue.empty()) {
    const State s = queue.front();
    queue.pop_front();
    if (s == maze.goal()) {
      report.goal_reachable = true;
      break;
    }
    for (State n : neighbors(maze, s)) {
      if (!seen[maze.index(n)]) {
        seen[maze.index(n)] = 1;
        queue.push_back(n);
      }
    }
  }
  if (!report.goal_reachable) report.problems.push_back("goal unreachable from start");
  return report;
}

/// The 8 images of a valid base maze in canonical element order, with ids
/// suffixed by "_<element>".
inline std::vector<Maze> expand_set(const Maze& base) {
  const StructuralReport report = validate_maze(base);
  if (!report.ok())
    throw InvalidMaze("base maze '" + base.id() + "' invalid: " + report.problems.front());
  std::vector<Maze> out;
  out.reserve(kAllTransforms.size());
  for (Transform t : kAllTransforms)
    out.push_back(apply_transform(base, t).with_id(base.id() + "_" +
                                                   std::string(transform_name(t))));
  return out;
}

}  // namespace rrplan
