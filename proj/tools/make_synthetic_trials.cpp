// Writes a synthetic trial CSV over a stimulus bundle: each participant gets
// a regular session schedule, and the number of model-favoured first moves at
// each trial is fixed by --counts. One extra participant stops early so that
// the exclusion rule has something to exclude.

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "rrplan/analysis.hpp"
#include "rrplan/bundle.hpp"
#include "rrplan/experiment.hpp"
#include "rrplan/model.hpp"

using namespace rrplan;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic behavioural dataset generator"};
  std::string bundle_dir = "stimuli";
  std::vector<int> counts;
  int participants = 40;
  int incomplete_trials = 7;
  std::uint64_t seed = 1;
  app.add_option("--bundle", bundle_dir);
  app.add_option("--counts", counts, "Favourable choices at trials 1..12")
      ->required()
      ->expected(kScoredTrials)
      ->delimiter(',');
  app.add_option("--participants", participants);
  app.add_option("--incomplete-trials", incomplete_trials,
                 "Trials completed by the extra, excluded participant (0 = none)");
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    const Bundle bundle = load_bundle(bundle_dir);
    std::map<std::string, Prediction> predictions;
    for (const Maze& m : bundle.set_mazes())
      predictions.emplace(m.id(), select_subtask(m, TieBreakPolicy::deterministic()));

    std::mt19937_64 rng(seed);
    const int total = participants + (incomplete_trials > 0 ? 1 : 0);
    std::vector<Schedule> schedules;
    for (int p = 0; p < total; ++p)
      schedules.push_back(schedule_trials(bundle, {}, derive_seed(seed, static_cast<std::uint64_t>(p))));

    // favourable[t][p]
    std::vector<std::vector<int>> favourable(kScoredTrials, std::vector<int>(total, 0));
    for (int t = 0; t < kScoredTrials; ++t) {
      if (counts[t] < 0 || counts[t] > participants) throw Error("count out of range");
      std::vector<int> order(participants);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int i = 0; i < counts[t]; ++i) favourable[t][order[i]] = 1;
      if (incomplete_trials > 0) favourable[t][participants] = static_cast<int>(rng() & 1);
    }

    std::uniform_int_distribution<int> detour(0, 2);
    std::uniform_int_distribution<long long> plan_ms(1500, 25000);
    std::vector<TrialRecord> records;
    for (int p = 0; p < total; ++p) {
      char id[16];
      std::snprintf(id, sizeof id, "P%03d", p + 1);
      const int trials = p < participants ? kScoredTrials : incomplete_trials;
      for (int t = 0; t < trials; ++t) {
        const ScheduledTrial& st = schedules[p].trials[t];
        const Maze& maze = bundle.find(st.maze_id)->maze;
        const Prediction& pred = predictions.at(st.maze_id);
        const State favoured = pred.choice().subtask.subgoal;
        State other = favoured;
        for (const auto& e : pred.evaluations)
          if (e.subtask.subgoal != favoured) other = e.subtask.subgoal;
        TrialRecord r;
        r.participant_id = id;
        r.trial_number = t + 1;
        r.maze_id = st.maze_id;
        r.favorable = favourable[t][p];
        r.first_move = r.favorable ? favoured : other;
        r.path_steps = *bfs_oracle(maze, maze.start(), maze.goal()) + 2 * detour(rng);
        r.planning_ms = plan_ms(rng);
        r.total_ms = r.planning_ms + 350LL * r.path_steps + plan_ms(rng) / 10;
        records.push_back(std::move(r));
      }
    }
    write_trials(std::cout, records);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
