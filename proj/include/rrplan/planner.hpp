#pragma once

// Action-level planning: A* with the Manhattan heuristic, where the planning
// cost of a search is the number of states it expands.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "rrplan/error.hpp"
#include "rrplan/maze.hpp"

namespace rrplan {

inline constexpr int manhattan(State s, State g) noexcept {
  return std::abs(s.x - g.x) + std::abs(s.y - g.y);
}

/// How A* orders frontier states of equal f.
///  - deterministic: ascending (f, h, y, x).
///  - stochastic: uniform choice among the minimal-f states, drawn from a
///    generator seeded with `seed`.
struct TieBreakPolicy {
  enum class Mode : std::uint8_t { deterministic, stochastic };

  Mode mode = Mode::deterministic;
  std::uint64_t seed = 0;

  static constexpr TieBreakPolicy deterministic() noexcept { return {}; }
  static constexpr TieBreakPolicy stochastic(std::uint64_t seed) noexcept {
    return {Mode::stochastic, seed};
  }
  bool is_stochastic() const noexcept { return mode == Mode::stochastic; }
};

inline constexpr int kDefaultSamples = 128;

struct Plan {
  std::vector<State> states;

  int step_cost() const noexcept {
    return states.empty() ? 0 : static_cast<int>(states.size()) - 1;
  }
  /// R(pi) = -|pi|
  int reward() const noexcept { return -step_cost(); }
};

struct SearchResult {
  Plan plan;
  int visited_count = 0;

  int step_cost() const noexcept { return plan.step_cost(); }
  /// R(pi) - t
  int reward() const noexcept { return -(step_cost() + visited_count); }

  friend bool operator==(const SearchResult& a, const SearchResult& b) {
    return a.plan.states == b.plan.states && a.visited_count == b.visited_count;
  }
};

/// Derives an independent 64-bit seed for stream `index` (splitmix64).
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

struct FrontierEntry {
  State s;
  int g;
  int h;
};

class OrderedFrontier {
 public:
  void push(const FrontierEntry& e) { heap_.push(e); }
  bool empty() const { return heap_.empty(); }
  FrontierEntry pop() {
    FrontierEntry e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  struct After {
    bool operator()(const FrontierEntry& a, const FrontierEntry& b) const {
      return std::tuple(a.g + a.h, a.h, a.s.y, a.s.x) > std::tuple(b.g + b.h, b.h, b.s.y, b.s.x);
    }
  };
  std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, After> heap_;
};

class RandomTieFrontier {
 public:
  explicit RandomTieFrontier(std::uint64_t seed) : rng_(seed) {}

  void push(const FrontierEntry& e) { buckets_[e.g + e.h].push_back(e); }
  bool empty() const { return buckets_.empty(); }
  FrontierEntry pop() {
    auto it = buckets_.begin();
    auto& bucket = it->second;
    std::uniform_int_distribution<std::size_t> pick(0, bucket.size() - 1);
    const std::size_t i = pick(rng_);
    FrontierEntry e = bucket[i];
    bucket[i] = bucket.back();
    bucket.pop_back();
    if (bucket.empty()) buckets_.erase(it);
    return e;
  }

 private:
  std::map<int, std::vector<FrontierEntry>> buckets_;
  std::mt19937_64 rng_;
};

template <class Frontier>
SearchResult astar_with(const Maze& maze, State start, State target, Frontier frontier) {
  const std::size_t cells = maze.cell_count();
  std::vector<int> best_g(cells, -1);
  std::vector<char> closed(cells, 0);
  std::vector<State> parent(cells);

  best_g[maze.index(start)] = 0;
  frontier.push({start, 0, manhattan(start, target)});

  SearchResult result;
  while (!frontier.empty()) {
    const FrontierEntry e = frontier.pop();
    const std::size_t i = maze.index(e.s);
    if (closed[i] || e.g != best_g[i]) continue;  // stale entry
    closed[i] = 1;
    ++result.visited_count;

    if (e.s == target) {
      for (State s = target;; s = parent[maze.index(s)]) {
        result.plan.states.push_back(s);
        if (s == start) break;
      }
      std::reverse(result.plan.states.begin(), result.plan.states.end());
      return result;
    }

    for (State n : neighbors(maze, e.s)) {
      const std::size_t j = maze.index(n);
      if (closed[j]) continue;
      const int g = e.g + 1;
      if (best_g[j] >= 0 && best_g[j] <= g) continue;
      best_g[j] = g;
      parent[j] = e.s;
      frontier.push({n, g, manhattan(n, target)});
    }
  }
  throw Unreachable("target " + to_string(target) + " unreachable from " + to_string(start));
}

inline void require_open(const Maze& maze, State s, const char* what) {
  if (!maze.is_open(s))
    throw InvalidMaze(std::string(what) + " " + to_string(s) + " is blocked or out of bounds");
}

}  // namespace detail

/// A* from start to target. visited_count is the number of distinct states
/// popped from the frontier, including the final pop of target.
inline SearchResult astar(const Maze& maze, State start, State target,
                          const TieBreakPolicy& policy = TieBreakPolicy::deterministic()) {
  detail::require_open(maze, start, "search start");
  detail::require_open(maze, target, "search target");
  if (policy.is_stochastic())
    return detail::astar_with(maze, start, target, detail::RandomTieFrontier(policy.seed));
  return detail::astar_with(maze, start, target, detail::OrderedFrontier{});
}

/// Breadth-first move counts from `from` to every cell; -1 where unreachable
/// or blocked.
inline std::vector<int> bfs_distances(const Maze& maze, State from) {
  detail::require_open(maze, from, "BFS start");
  std::vector<int> dist(maze.cell_count(), -1);
  std::deque<State> queue{from};
  dist[maze.index(from)] = 0;
  while (!queue.empty()) {
    const State s = queue.front();
    queue.pop_front();
    for (State n : neighbors(maze, s)) {
      if (dist[maze.index(n)] < 0) {
        dist[maze.index(n)] = dist[maze.index(s)] + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

/// Exact shortest move count, or nullopt when target is unreachable.
inline std::optional<int> bfs_oracle(const Maze& maze, State start, State target) {
  if (!maze.contains(target)) return std::nullopt;
  const int d = bfs_distances(maze, start)[maze.index(target)];
  if (d < 0) return std::nullopt;
  return d;
}

/// Monte Carlo estimate of R_Alg(start, target) = E[R(pi) - t].
struct RewardEstimate {
  double mean_reward = 0.0;
  double standard_error = 0.0;
  double mean_visited = 0.0;
  int step_cost = 0;  // A* is optimal, so identical across samples
  int samples = 0;
};

/// Deterministic policies always run exactly once (standard error 0).
/// Stochastic sample i runs with seed derive_seed(policy.seed, i).
inline RewardEstimate expected_reward(const Maze& maze, State start, State target,
                                      const TieBreakPolicy& policy,
                                      int samples = kDefaultSamples) {
  if (samples < 1) throw Error("expected_reward needs at least one sample");
  if (!policy.is_stochastic()) {
    const SearchResult r = astar(maze, start, target, policy);
    return {static_cast<double>(r.reward()), 0.0, static_cast<double>(r.visited_count),
            r.step_cost(), 1};
  }

  RewardEstimate est;
  est.samples = samples;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto seed = derive_seed(policy.seed, static_cast<std::uint64_t>(i));
    const SearchResult r = astar(maze, start, target, TieBreakPolicy::stochastic(seed));
    est.step_cost = r.step_cost();
    const double v = r.visited_count;
    sum += v;
    sum_sq += v * v;
  }
  const double n = samples;
  est.mean_visited = sum / n;
  est.mean_reward = -(est.step_cost + est.mean_visited);
  if (samples > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean_visited * est.mean_visited) / (n - 1));
    est.standard_error = std::sqrt(var / n);
  }
  return est;
}

}  // namespace rrplan
