#pragma once

// Subtask selection. The fixed subtask set Z holds the open cells adjacent to
// the start; each subtask z is scored by R_Alg(s0, z) + R_Alg(z, g) and the
// arg max is the predicted choice.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rrplan/design.hpp"
#include "rrplan/maze.hpp"
#include "rrplan/planner.hpp"

namespace rrplan {

struct Subtask {
  State subgoal;
  Half label = Half::on_diagonal;

  friend bool operator==(const Subtask&, const Subtask&) = default;
};

inline Subtask make_subtask(const Maze& maze, State subgoal) {
  return {subgoal, half_of(subgoal, maze.size(), endpoint_diagonal(maze))};
}

/// One subtask per open neighbour of the start, in canonical neighbour order.
/// Strict mode insists on exactly two.
inline std::vector<Subtask> enumerate_subtasks(const Maze& maze, bool strict = true) {
  const std::vector<State> adj = neighbors(maze, maze.start());
  if (adj.empty()) throw InvalidMaze("start of '" + maze.id() + "' has no open neighbour");
  if (strict && adj.size() != 2)
    throw InvalidMaze("start of '" + maze.id() + "' has " + std::to_string(adj.size()) +
                      " open neighbours, expected 2");
  std::vector<Subtask> out;
  out.reserve(adj.size());
  for (State s : adj) out.push_back(make_subtask(maze, s));
  return out;
}

/// Step and planning cost of one search segment. Planning cost is a mean
/// over samples, hence fractional in stochastic mode.
struct SegmentCost {
  int step_cost = 0;
  double planning_cost = 0.0;
  double standard_error = 0.0;
};

struct SubtaskEvaluation {
  Subtask subtask;
  int step_cost_total = 0;
  double planning_cost_total = 0.0;
  double total_cost = 0.0;
  double reward = 0.0;
  double standard_error = 0.0;
};

/// Sums the s0 -> z and z -> g segments.
inline SubtaskEvaluation combine_segments(const Subtask& z, const SegmentCost& to_subgoal,
                                          const SegmentCost& to_goal) {
  SubtaskEvaluation e;
  e.subtask = z;
  e.step_cost_total = to_subgoal.step_cost + to_goal.step_cost;
  e.planning_cost_total = to_subgoal.planning_cost + to_goal.planning_cost;
  e.total_cost = e.step_cost_total + e.planning_cost_total;
  e.reward = -e.total_cost;
  e.standard_error = std::hypot(to_subgoal.standard_error, to_goal.standard_error);
  return e;
}

inline SegmentCost segment_cost(const RewardEstimate& r) {
  return {r.step_cost, r.mean_visited, r.standard_error};
}

/// Both segments run under the same policy; in stochastic mode the z -> g
/// segment draws from a seed stream disjoint from the s0 -> z one. A subgoal
/// equal to the goal is the undecomposed task: only s0 -> g is searched.
inline SubtaskEvaluation evaluate_subtask(const Maze& maze, const Subtask& z,
                                          const TieBreakPolicy& policy,
                                          int samples = kDefaultSamples) {
  const int n = policy.is_stochastic() ? samples : 1;
  const SegmentCost first = segment_cost(expected_reward(maze, maze.start(), z.subgoal, policy, n));
  if (z.subgoal == maze.goal()) return combine_segments(z, first, {});

  TieBreakPolicy second_policy = policy;
  if (policy.is_stochastic()) second_policy.seed = derive_seed(policy.seed, 0xA5A5A5A5ULL << 20);
  try {
    const SegmentCost second =
        segment_cost(expected_reward(maze, z.subgoal, maze.goal(), second_policy, n));
    return combine_segments(z, first, second);
  } catch (const Unreachable&) {
    throw InvalidMaze("goal of '" + maze.id() + "' unreachable from subgoal " +
                      to_string(z.subgoal));
  }
}

struct Prediction {
  std::string maze_id;
  std::vector<SubtaskEvaluation> evaluations;
  std::size_t chosen = 0;  // index into evaluations
  double margin = 0.0;     // best reward minus runner-up reward
  bool tie = false;        // another subtask matched the best reward exactly

  const SubtaskEvaluation& choice() const { return evaluations.at(chosen); }
};

/// Arg max over rewards; exact ties go to the earliest evaluation.
inline Prediction choose_subtask(std::string maze_id, std::vector<SubtaskEvaluation> evaluations) {
  if (evaluations.empty()) throw Error("no subtasks to choose from");
  Prediction p;
  p.maze_id = std::move(maze_id);
  p.evaluations = std::move(evaluations);
  for (std::size_t i = 1; i < p.evaluations.size(); ++i)
    if (p.evaluations[i].reward > p.evaluations[p.chosen].reward) p.chosen = i;

  const double best = p.evaluations[p.chosen].reward;
  std::optional<double> runner_up;
  for (std::size_t i = 0; i < p.evaluations.size(); ++i) {
    if (i == p.chosen) continue;
    const double r = p.evaluations[i].reward;
    if (r == best) p.tie = true;
    if (!runner_up || r > *runner_up) runner_up = r;
  }
  p.margin = runner_up ? best - *runner_up : 0.0;
  return p;
}

inline Prediction select_subtask(const Maze& maze, const TieBreakPolicy& policy,
                                 int samples = kDefaultSamples, bool strict = true) {
  std::vector<SubtaskEvaluation> evals;
  for (const Subtask& z : enumerate_subtasks(maze, strict))
    evals.push_back(evaluate_subtask(maze, z, policy, samples));
  return choose_subtask(maze.id(), std::move(evals));
}

struct MazePrediction {
  std::string maze_id;
  std::optional<Prediction> prediction;
  std::string error;  // set when prediction is empty
};

/// One entry per maze, in input order. Invalid mazes yield an error entry
/// rather than aborting the batch.
inline std::vector<MazePrediction> predict_bundle(std::span<const Maze> mazes,
                                                  const TieBreakPolicy& policy,
                                                  int samples = kDefaultSamples) {
  std::vector<MazePrediction> out;
  out.reserve(mazes.size());
  for (const Maze& m : mazes) {
    MazePrediction row{m.id(), std::nullopt, {}};
    try {
      const StructuralReport report = validate_maze(m);
      if (!report.ok()) throw InvalidMaze(report.problems.front());
      row.prediction = select_subtask(m, policy, samples);
    } catch (const Error& e) {
      row.error = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

namespace detail {

inline std::string format_cost(double v) {
  char buf[64];
  if (std::nearbyint(v) == v && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

inline constexpr const char* kPredictionHeader =
    "maze_id,subgoal_x,subgoal_y,label,step_cost,planning_cost,total_cost,chosen,tie,margin";

/// One CSV row per (maze, subtask). Mazes that failed are skipped; the
/// caller reports their errors. `with_se` appends an `se` column.
inline void write_prediction_table(std::ostream& os, std::span<const MazePrediction> rows,
                                   bool with_se = false) {
  os << kPredictionHeader << (with_se ? ",se" : "") << '\n';
  for (const MazePrediction& row : rows) {
    if (!row.prediction) continue;
    const Prediction& p = *row.prediction;
    for (std::size_t i = 0; i < p.evaluations.size(); ++i) {
      const SubtaskEvaluation& e = p.evaluations[i];
      os << p.maze_id << ',' << e.subtask.subgoal.x << ',' << e.subtask.subgoal.y << ','
         << half_name(e.subtask.label) << ',' << e.step_cost_total << ','
         << detail::format_cost(e.planning_cost_total) << ','
         << detail::format_cost(e.total_cost) << ',' << (i == p.chosen ? 1 : 0) << ','
         << (p.tie ? 1 : 0) << ',' << detail::format_cost(p.margin);
      if (with_se) os << ',' << detail::format_cost(e.standard_error);
      os << '\n';
    }
  }
}

}  // namespace rrplan
