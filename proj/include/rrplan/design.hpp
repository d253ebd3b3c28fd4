#pragma once

// Stimulus design checks. A stimulus has its start and goal on one of the
// two grid diagonals; the diagonal splits the maze into two triangular
// halves, each entered through one of the start's two open neighbours.

#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rrplan/maze.hpp"
#include "rrplan/planner.hpp"

namespace rrplan {

enum class Diagonal : std::uint8_t { main, anti, none };

inline constexpr std::string_view diagonal_name(Diagonal d) noexcept {
  switch (d) {
    case Diagonal::main: return "main";
    case Diagonal::anti: return "anti";
    case Diagonal::none: return "none";
  }
  return "none";
}

/// Which diagonal holds both endpoints. The main diagonal wins when both do
/// (only possible for the centre cell of odd grids, which start != goal
/// excludes).
inline Diagonal endpoint_diagonal(const Maze& maze) noexcept {
  const int n = maze.size();
  const State s = maze.start();
  const State g = maze.goal();
  if (s.x == s.y && g.x == g.y) return Diagonal::main;
  if (s.x + s.y == n - 1 && g.x + g.y == n - 1) return Diagonal::anti;
  return Diagonal::none;
}

enum class Half : std::uint8_t { upper, lower, on_diagonal };

inline constexpr std::string_view half_name(Half h) noexcept {
  switch (h) {
    case Half::upper: return "upper";
    case Half::lower: return "lower";
    case Half::on_diagonal: return "diagonal";
  }
  return "diagonal";
}

/// Main diagonal: upper is x > y. Anti-diagonal: upper is x + y < n - 1.
/// Diagonal::none falls back to the main diagonal.
inline constexpr Half half_of(State s, int n, Diagonal d) noexcept {
  if (d == Diagonal::anti) {
    const int k = s.x + s.y - (n - 1);
    return k < 0 ? Half::upper : (k > 0 ? Half::lower : Half::on_diagonal);
  }
  return s.x > s.y ? Half::upper : (s.x < s.y ? Half::lower : Half::on_diagonal);
}

inline constexpr Transform mirror_transform(Diagonal d) noexcept {
  return d == Diagonal::anti ? Transform::flip_anti_diagonal : Transform::flip_main_diagonal;
}

struct DesignReport {
  Diagonal diagonal = Diagonal::none;
  int subgoal_count = 0;
  std::size_t walls_upper_triangle = 0;
  std::size_t walls_lower_triangle = 0;
  bool start_goal_on_diagonal = false;
  bool mirrored_optimal_paths = false;
  std::optional<int> optimal_length_upper;
  std::optional<int> optimal_length_lower;
  std::vector<std::string> problems;

  bool passes() const noexcept {
    return subgoal_count == 2 && walls_upper_triangle == walls_lower_triangle &&
           start_goal_on_diagonal && mirrored_optimal_paths && optimal_length_upper &&
           optimal_length_lower && *optimal_length_upper == *optimal_length_lower;
  }
};

namespace detail {

// Shortest z -> goal distance using only cells whose mirror image is open.
inline std::optional<int> mirror_open_distance(const Maze& maze, State from, Transform mirror) {
  const int n = maze.size();
  auto usable = [&](State c) { return maze.is_open(map_state(c, n, mirror)); };
  if (!usable(from)) return std::nullopt;
  std::vector<int> dist(maze.cell_count(), -1);
  std::deque<State> queue{from};
  dist[maze.index(from)] = 0;
  while (!queue.empty()) {
    const State s = queue.front();
    queue.pop_front();
    if (s == maze.goal()) return dist[maze.index(s)];
    for (State nb : neighbors(maze, s)) {
      if (dist[maze.index(nb)] < 0 && usable(nb)) {
        dist[maze.index(nb)] = dist[maze.index(s)] + 1;
        queue.push_back(nb);
      }
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Walls strictly on each side of the endpoint diagonal, the two
/// subgoal-constrained optimal step costs s0 -> z -> g, and whether some
/// optimal path through one half mirrors onto an optimal path through the
/// other. Failures are reported, never thrown.
inline DesignReport validate_design(const Maze& maze) {
  DesignReport r;
  const int n = maze.size();
  r.diagonal = endpoint_diagonal(maze);
  r.start_goal_on_diagonal = r.diagonal != Diagonal::none;
  if (!r.start_goal_on_diagonal) r.problems.push_back("start and goal not on a common diagonal");

  for (State b : maze.blocked()) {
    switch (half_of(b, n, r.diagonal)) {
      case Half::upper: ++r.walls_upper_triangle; break;
      case Half::lower: ++r.walls_lower_triangle; break;
      case Half::on_diagonal: break;
    }
  }
  if (r.walls_upper_triangle != r.walls_lower_triangle)
    r.problems.push_back("triangle wall counts differ (" + std::to_string(r.walls_upper_triangle) +
                         " vs " + std::to_string(r.walls_lower_triangle) + ")");

  const std::vector<State> subgoals = neighbors(maze, maze.start());
  r.subgoal_count = static_cast<int>(subgoals.size());
  if (r.subgoal_count != 2) {
    r.problems.push_back("start has " + std::to_string(r.subgoal_count) +
                         " open neighbours, expected 2");
    return r;
  }

  const std::vector<int> to_goal = bfs_distances(maze, maze.goal());
  std::optional<State> upper, lower;
  for (State z : subgoals) {
    const int d = to_goal[maze.index(z)];
    const std::optional<int> len = d < 0 ? std::nullopt : std::optional<int>(d + 1);
    switch (half_of(z, n, r.diagonal)) {
      case Half::upper: upper = z; r.optimal_length_upper = len; break;
      case Half::lower: lower = z; r.optimal_length_lower = len; break;
      case Half::on_diagonal: break;
    }
  }
  if (!upper || !lower) {
    r.problems.push_back("subgoals do not straddle the diagonal");
    return r;
  }
  if (!r.optimal_length_upper || !r.optimal_length_lower) {
    r.problems.push_back("goal unreachable through one subgoal");
    return r;
  }
  if (*r.optimal_length_upper != *r.optimal_length_lower)
    r.problems.push_back("half optimal lengths differ (" +
                         std::to_string(*r.optimal_length_upper) + " vs " +
                         std::to_string(*r.optimal_length_lower) + ")");

  const Transform mirror = mirror_transform(r.diagonal);
  if (r.start_goal_on_diagonal && map_state(*upper, n, mirror) == *lower) {
    const auto d = detail::mirror_open_distance(maze, *upper, mirror);
    r.mirrored_optimal_paths = d && *d + 1 == *r.optimal_length_upper &&
                               *r.optimal_length_upper == *r.optimal_length_lower;
  }
  if (!r.mirrored_optimal_paths) r.problems.push_back("no mirrored pair of optimal paths");
  return r;
}

}  // namespace rrplan
