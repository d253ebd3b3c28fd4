#pragma once

// Behavioural experiment sessions: trial scheduling, server-side path
// validation, bonus computation and append-only session logs.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrplan/analysis.hpp"
#include "rrplan/bundle.hpp"
#include "rrplan/model.hpp"
#include "rrplan/planner.hpp"

namespace rrplan {

inline constexpr int kSetCount = 6;
inline constexpr int kMazesPerSet = 8;
inline constexpr int kPerSetSampled = 2;
inline constexpr int kPracticeTrials = 2;

/// Points for one maze: base minus per_step for every move over optimal,
/// floored at zero.
struct BonusRule {
  int base = 100;
  int per_step = 5;

  int points(int path_steps, int optimal_steps) const noexcept {
    const int excess = std::max(0, path_steps - optimal_steps);
    return std::max(0, base - per_step * excess);
  }
};

struct ExperimentConfig {
  std::filesystem::path bundle_dir;
  long long planning_cap_ms = 60000;
  std::vector<std::string> practice_maze_ids;  // empty: the bundle's practice set
  BonusRule bonus;
  std::uint64_t rng_seed = 0;
};

struct ScheduledTrial {
  int trial_number = 0;
  std::string maze_id;
  bool practice = false;

  friend bool operator==(const ScheduledTrial&, const ScheduledTrial&) = default;
};

struct Schedule {
  std::vector<ScheduledTrial> practice;  // 2
  std::vector<ScheduledTrial> trials;    // 12

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// Two distinct mazes drawn from each of the six sets, shuffled, with the
/// practice mazes in front. Set membership is sorted first, so the result
/// depends only on bundle content and seed.
inline Schedule schedule_trials(const Bundle& bundle, const ExperimentConfig& config,
                                std::uint64_t seed) {
  const auto sets = bundle.sets();
  if (static_cast<int>(sets.size()) != kSetCount)
    throw Error("malformed bundle: expected " + std::to_string(kSetCount) + " sets, found " +
                std::to_string(sets.size()));
  for (const auto& [id, mazes] : sets)
    if (static_cast<int>(mazes.size()) != kMazesPerSet)
      throw Error("malformed bundle: set '" + id + "' has " + std::to_string(mazes.size()) +
                  " mazes, expected " + std::to_string(kMazesPerSet));

  std::vector<std::string> practice = config.practice_maze_ids;
  if (practice.empty())
    for (const BundleEntry* e : bundle.practice()) practice.push_back(e->maze.id());
  if (static_cast<int>(practice.size()) != kPracticeTrials)
    throw Error("malformed bundle: expected " + std::to_string(kPracticeTrials) +
                " practice mazes, found " + std::to_string(practice.size()));
  for (const auto& id : practice)
    if (!bundle.find(id)) throw Error("practice maze '" + id + "' not in bundle");

  std::mt19937_64 rng(seed);
  std::vector<std::string> picked;
  for (const auto& [id, mazes] : sets) {
    std::vector<std::string> pool = mazes;
    std::shuffle(pool.begin(), pool.end(), rng);
    picked.insert(picked.end(), pool.begin(), pool.begin() + kPerSetSampled);
  }
  std::shuffle(picked.begin(), picked.end(), rng);

  Schedule s;
  for (std::size_t i = 0; i < practice.size(); ++i)
    s.practice.push_back({static_cast<int>(i) + 1, practice[i], true});
  for (std::size_t i = 0; i < picked.size(); ++i)
    s.trials.push_back({static_cast<int>(i) + 1, picked[i], false});
  return s;
}

/// Empty when `path` is a legal walk from start to goal; otherwise why not.
inline std::optional<std::string> check_path(const Maze& maze, const std::vector<State>& path) {
  if (path.empty()) return "empty path";
  if (path.front() != maze.start()) return "path does not begin at the start";
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!maze.contains(path[i])) return "step " + std::to_string(i) + " leaves the grid";
    if (maze.is_blocked(path[i])) return "step " + std::to_string(i) + " enters a wall at " + to_string(path[i]);
    if (i > 0 && !adjacent(path[i - 1], path[i]))
      return "step " + std::to_string(i) + " is not a single-cell move";
  }
  if (path.back() != maze.goal()) return "path does not end at the goal";
  return std::nullopt;
}

/// Error carrying the HTTP status the service maps it to.
class SessionError : public Error {
 public:
  SessionError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

struct TrialSubmission {
  bool practice = false;
  int trial_number = 0;
  std::string maze_id;
  std::vector<State> path;
  long long planning_ms = 0;
  long long total_ms = 0;
};

struct Session {
  enum class Status { in_progress, complete };

  std::string session_id;
  std::string participant_id;
  std::uint64_t seed = 0;
  Schedule schedule;
  std::vector<TrialRecord> records;  // scored trials, in order
  std::vector<int> practice_done;
  Status status = Status::in_progress;
  int bonus = 0;
};

struct TrialOutcome {
  TrialRecord record;
  int points = 0;
};

class SessionStore {
 public:
  /// Loads every `*.jsonl` session log already present in `out_dir`.
  SessionStore(Bundle bundle, ExperimentConfig config, std::filesystem::path out_dir)
      : bundle_(std::move(bundle)), config_(std::move(config)), out_dir_(std::move(out_dir)) {
    if (config_.planning_cap_ms <= 0) throw Error("planning_cap_ms must be positive");
    if (config_.bonus.base < 0 || config_.bonus.per_step < 0)
      throw Error("bonus parameters must be non-negative");
    for (const auto& e : bundle_.entries) {
      const auto opt = bfs_oracle(e.maze, e.maze.start(), e.maze.goal());
      if (!opt) throw InvalidMaze("bundle maze '" + e.maze.id() + "' is unsolvable");
      optimal_[e.maze.id()] = *opt;
      if (!e.is_practice())
        favored_[e.maze.id()] =
            select_subtask(e.maze, TieBreakPolicy::deterministic()).choice().subtask.subgoal;
    }
    // Fails fast on a malformed bundle.
    (void)schedule_trials(bundle_, config_, 0);
    std::filesystem::create_directories(out_dir_);
    for (const auto& f : std::filesystem::directory_iterator(out_dir_))
      if (f.path().extension() == ".jsonl") replay(f.path());
  }

  const Bundle& bundle() const noexcept { return bundle_; }
  const ExperimentConfig& config() const noexcept { return config_; }

  Session create(const std::string& participant_id, std::optional<std::uint64_t> seed = {}) {
    if (participant_id.empty() || participant_id.find_first_of(",\n\r") != std::string::npos)
      throw SessionError(422, "participant_id must be non-empty and free of commas/newlines");
    auto slot = std::make_unique<Slot>();
    {
      std::unique_lock lock(map_mutex_);
      std::string id;
      do {
        id = new_session_id();
      } while (sessions_.count(id));
      slot->session.session_id = id;
      slot->session.participant_id = participant_id;
      slot->session.seed = seed.value_or(derive_seed(config_.rng_seed, fnv1a(id)));
      slot->session.schedule = schedule_trials(bundle_, config_, slot->session.seed);

      nlohmann::json ev{{"event", "create"},
                        {"session_id", id},
                        {"participant_id", participant_id},
                        {"seed", slot->session.seed},
                        {"practice", ids(slot->session.schedule.practice)},
                        {"trials", ids(slot->session.schedule.trials)}};
      append(id, ev);
      Session copy = slot->session;
      sessions_.emplace(id, std::move(slot));
      return copy;
    }
  }

  Session get(const std::string& session_id) const {
    Slot& slot = find(session_id);
    std::lock_guard lock(slot.mutex);
    return slot.session;
  }

  std::vector<std::string> session_ids() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
  }

  TrialOutcome submit_trial(const std::string& session_id, const TrialSubmission& sub) {
    Slot& slot = find(session_id);
    std::lock_guard lock(slot.mutex);
    Session& s = slot.session;
    if (s.status == Session::Status::complete) throw SessionError(409, "session already complete");

    const auto& plan = sub.practice ? s.schedule.practice : s.schedule.trials;
    if (sub.trial_number < 1 || sub.trial_number > static_cast<int>(plan.size()))
      throw SessionError(422, "trial_number out of range");
    if (sub.practice) {
      if (std::count(s.practice_done.begin(), s.practice_done.end(), sub.trial_number))
        throw SessionError(409, "practice trial already recorded");
    } else {
      if (sub.trial_number <= static_cast<int>(s.records.size()))
        throw SessionError(409, "trial " + std::to_string(sub.trial_number) + " already recorded");
      if (static_cast<int>(s.practice_done.size()) < kPracticeTrials)
        throw SessionError(422, "practice trials not finished");
      if (sub.trial_number != static_cast<int>(s.records.size()) + 1)
        throw SessionError(422, "trial out of order; expected " +
                                    std::to_string(s.records.size() + 1));
    }
    const ScheduledTrial& expected = plan[static_cast<std::size_t>(sub.trial_number - 1)];
    if (sub.maze_id != expected.maze_id)
      throw SessionError(422, "maze_id does not match the schedule (expected " + expected.maze_id + ")");
    const Maze& maze = bundle_.find(expected.maze_id)->maze;
    if (auto why = check_path(maze, sub.path)) throw SessionError(422, "illegal path: " + *why);
    if (sub.planning_ms < 0 || sub.total_ms < sub.planning_ms)
      throw SessionError(422, "timings must satisfy 0 <= planning_ms <= total_ms");
    if (sub.planning_ms > config_.planning_cap_ms)
      throw SessionError(422, "planning_ms exceeds the planning cap of " +
                                  std::to_string(config_.planning_cap_ms) + " ms");

    TrialOutcome out;
    out.record.participant_id = s.participant_id;
    out.record.trial_number = sub.trial_number;
    out.record.maze_id = sub.maze_id;
    out.record.first_move = sub.path.size() > 1 ? sub.path[1] : sub.path[0];
    out.record.path_steps = static_cast<int>(sub.path.size()) - 1;
    out.record.planning_ms = sub.planning_ms;
    out.record.total_ms = sub.total_ms;
    if (!sub.practice) {
      const auto fav = favored_.find(sub.maze_id);
      out.record.favorable = fav != favored_.end() && fav->second == out.record.first_move ? 1 : 0;
    }
    out.points = config_.bonus.points(out.record.path_steps, optimal_.at(sub.maze_id));

    nlohmann::json path = nlohmann::json::array();
    for (State p : sub.path) path.push_back({p.x, p.y});
    append(session_id, {{"event", "trial"},
                        {"practice", sub.practice},
                        {"trial_number", sub.trial_number},
                        {"maze_id", sub.maze_id},
                        {"path", path},
                        {"favorable", out.record.favorable},
                        {"planning_ms", sub.planning_ms},
                        {"total_ms", sub.total_ms}});
    if (sub.practice)
      s.practice_done.push_back(sub.trial_number);
    else
      s.records.push_back(out.record);
    return out;
  }

  /// Finalises a session with all scored trials and returns its bonus.
  int complete(const std::string& session_id) {
    Slot& slot = find(session_id);
    std::lock_guard lock(slot.mutex);
    Session& s = slot.session;
    if (s.status == Session::Status::complete) throw SessionError(409, "session already complete");
    if (s.records.size() != s.schedule.trials.size())
      throw SessionError(422, "only " + std::to_string(s.records.size()) + " of " +
                                  std::to_string(s.schedule.trials.size()) + " trials recorded");
    int bonus = 0;
    for (const auto& r : s.records) bonus += config_.bonus.points(r.path_steps, optimal_.at(r.maze_id));
    append(session_id, {{"event", "complete"}, {"bonus", bonus}});
    s.status = Session::Status::complete;
    s.bonus = bonus;
    return bonus;
  }

  std::string export_csv(const std::string& session_id) const {
    const Session s = get(session_id);
    std::ostringstream os;
    write_trials(os, s.records);
    return os.str();
  }

  /// Scored records of every completed session.
  std::vector<TrialRecord> export_all() const {
    std::vector<TrialRecord> out;
    for (const auto& id : session_ids()) {
      const Session s = get(id);
      if (s.status == Session::Status::complete)
        out.insert(out.end(), s.records.begin(), s.records.end());
    }
    return out;
  }

  int optimal_steps(const std::string& maze_id) const { return optimal_.at(maze_id); }

 private:
  struct Slot {
    mutable std::mutex mutex;
    Session session;
  };

  static std::uint64_t fnv1a(const std::string& s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
  }

  static std::vector<std::string> ids(const std::vector<ScheduledTrial>& v) {
    std::vector<std::string> out;
    for (const auto& t : v) out.push_back(t.maze_id);
    return out;
  }

  std::string new_session_id() {
    static const char* hex = "0123456789abcdef";
    std::uniform_int_distribution<int> d(0, 15);
    std::string id(16, '0');
    for (char& c : id) c = hex[d(id_rng_)];
    return id;
  }

  Slot& find(const std::string& session_id) const {
    std::shared_lock lock(map_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw SessionError(404, "unknown session '" + session_id + "'");
    return *it->second;
  }

  std::filesystem::path log_path(const std::string& id) const { return out_dir_ / (id + ".jsonl"); }

  void append(const std::string& id, const nlohmann::json& event) {
    std::ofstream out(log_path(id), std::ios::app);
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw SessionError(500, "failed to persist session event");
  }

  // Rebuilds a session from its log. A torn final line (crash mid-write) is
  // ignored.
  void replay(const std::filesystem::path& file) {
    std::ifstream in(file);
    std::string line;
    auto slot = std::make_unique<Slot>();
    Session& s = slot->session;
    bool created = false;
    while (std::getline(in, line)) {
      nlohmann::json ev = nlohmann::json::parse(line, nullptr, false);
      if (ev.is_discarded()) break;
      const std::string kind = ev.value("event", "");
      if (kind == "create") {
        s.session_id = ev.at("session_id").get<std::string>();
        s.participant_id = ev.at("participant_id").get<std::string>();
        s.seed = ev.at("seed").get<std::uint64_t>();
        int i = 0;
        for (const auto& id : ev.at("practice")) s.schedule.practice.push_back({++i, id.get<std::string>(), true});
        i = 0;
        for (const auto& id : ev.at("trials")) s.schedule.trials.push_back({++i, id.get<std::string>(), false});
        created = true;
      } else if (created && kind == "trial") {
        const int n = ev.at("trial_number").get<int>();
        if (ev.at("practice").get<bool>()) {
          s.practice_done.push_back(n);
          continue;
        }
        const auto& path = ev.at("path");
        TrialRecord r;
        r.participant_id = s.participant_id;
        r.trial_number = n;
        r.maze_id = ev.at("maze_id").get<std::string>();
        const auto& fm = path.size() > 1 ? path[1] : path[0];
        r.first_move = {fm[0].get<int>(), fm[1].get<int>()};
        r.favorable = ev.at("favorable").get<int>();
        r.path_steps = static_cast<int>(path.size()) - 1;
        r.planning_ms = ev.at("planning_ms").get<long long>();
        r.total_ms = ev.at("total_ms").get<long long>();
        s.records.push_back(std::move(r));
      } else if (created && kind == "complete") {
        s.status = Session::Status::complete;
        s.bonus = ev.at("bonus").get<int>();
      }
    }
    if (created) {
      std::unique_lock lock(map_mutex_);
      sessions_[s.session_id] = std::move(slot);
    }
  }

  Bundle bundle_;
  ExperimentConfig config_;
  std::filesystem::path out_dir_;
  std::map<std::string, int> optimal_;
  std::map<std::string, State> favored_;

  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> sessions_;
  std::mt19937_64 id_rng_{std::random_device{}()};
};

}  // namespace rrplan
