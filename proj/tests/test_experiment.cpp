#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "oracles.hpp"
#include "rrplan/server.hpp"

using namespace rrplan;
namespace fs = std::filesystem;

namespace {

const Bundle& shipped() {
  static const Bundle b = load_bundle(fs::path(RRPLAN_SOURCE_DIR) / "stimuli");
  return b;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("rrplan_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<State> optimal_path(const Maze& m) { return astar(m, m.start(), m.goal()).plan.states; }

TrialSubmission submission(const Bundle& b, const ScheduledTrial& t) {
  TrialSubmission s;
  s.practice = t.practice;
  s.trial_number = t.trial_number;
  s.maze_id = t.maze_id;
  s.path = optimal_path(b.find(t.maze_id)->maze);
  s.planning_ms = 4000;
  s.total_ms = 9000;
  return s;
}

void play_practice(SessionStore& store, const Session& s) {
  for (const auto& t : s.schedule.practice) store.submit_trial(s.session_id, submission(store.bundle(), t));
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const SessionError& e) {
    return e.status();
  }
  return 0;
}

// Independent legality check for a path over a maze.
bool legal(const Maze& m, const std::vector<State>& path) {
  if (path.empty() || path.front() != m.start() || path.back() != m.goal()) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const State p = path[i];
    if (p.x < 0 || p.y < 0 || p.x >= m.size() || p.y >= m.size()) return false;
    if (m.is_blocked(p)) return false;
    if (i && std::abs(p.x - path[i - 1].x) + std::abs(p.y - path[i - 1].y) != 1) return false;
  }
  return true;
}

}  // namespace

TEST(Schedule, CardinalityAndSets) {
  const Bundle& b = shipped();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Schedule s = schedule_trials(b, {}, seed);
    ASSERT_EQ(s.practice.size(), 2u);
    ASSERT_EQ(s.trials.size(), 12u);
    std::map<std::string, int> per_set;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < s.trials.size(); ++i) {
      EXPECT_EQ(s.trials[i].trial_number, static_cast<int>(i) + 1);
      EXPECT_FALSE(s.trials[i].practice);
      const BundleEntry* e = b.find(s.trials[i].maze_id);
      ASSERT_NE(e, nullptr);
      EXPECT_FALSE(e->is_practice());
      ++per_set[e->set_id];
      seen.insert(s.trials[i].maze_id);
    }
    EXPECT_EQ(seen.size(), 12u);
    EXPECT_EQ(per_set.size(), 6u);
    for (const auto& [set, n] : per_set) EXPECT_EQ(n, 2) << set;
    for (const auto& p : s.practice) {
      EXPECT_TRUE(p.practice);
      EXPECT_TRUE(b.find(p.maze_id)->is_practice());
    }
  }
}

TEST(Schedule, DeterministicAndSeedSensitive) {
  const Bundle& b = shipped();
  EXPECT_EQ(schedule_trials(b, {}, 42), schedule_trials(b, {}, 42));
  std::set<std::vector<std::string>> orders;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<std::string> ids;
    for (const auto& t : schedule_trials(b, {}, seed).trials) ids.push_back(t.maze_id);
    orders.insert(ids);
  }
  EXPECT_GT(orders.size(), 15u);
}

TEST(Schedule, InvariantToBundleOrder) {
  Bundle shuffled = shipped();
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), rng);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Practice order follows the index, so compare scored trials only.
    EXPECT_EQ(schedule_trials(shuffled, {}, seed).trials, schedule_trials(shipped(), {}, seed).trials);
  }
}

TEST(Schedule, EachMazeSampledWithProbabilityOneQuarter) {
  const Bundle& b = shipped();
  const int seeds = 10000;
  std::map<std::string, int> counts;
  for (int s = 0; s < seeds; ++s)
    for (const auto& t : schedule_trials(b, {}, derive_seed(99, s)).trials) ++counts[t.maze_id];
  ASSERT_EQ(counts.size(), 48u);
  const double expected = seeds / 4.0;
  double chi2 = 0;
  for (const auto& [id, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
  // 48 cells with 6 per-set constraints: 42 degrees of freedom; 99.9th percentile is about 77.
  EXPECT_LT(chi2, 77.0);
}

TEST(Schedule, MalformedBundle) {
  Bundle b = shipped();
  b.entries.pop_back();
  EXPECT_THROW(schedule_trials(b, {}, 1), Error);
  Bundle no_practice = shipped();
  std::erase_if(no_practice.entries, [](const BundleEntry& e) { return e.is_practice(); });
  EXPECT_THROW(schedule_trials(no_practice, {}, 1), Error);
  ExperimentConfig bad;
  bad.practice_maze_ids = {"nope", "practice1"};
  EXPECT_THROW(schedule_trials(shipped(), bad, 1), Error);
}

TEST(CheckPath, AgreesWithIndependentCheckOnRandomWalks) {
  std::mt19937_64 rng(21);
  int accepted = 0, total = 0;
  for (int i = 0; i < 300; ++i) {
    const Maze m = oracle::random_maze(rng, 2, 8, 0.2);
    for (int w = 0; w < 20; ++w) {
      std::vector<State> path{m.start()};
      const int len = static_cast<int>(rng() % 40);
      for (int k = 0; k < len && path.back() != m.goal(); ++k) {
        const auto nb = neighbors(m, path.back());
        if (nb.empty()) break;
        path.push_back(nb[rng() % nb.size()]);
      }
      // Corrupt some walks: jumps, off-grid steps, walls, wrong start.
      switch (rng() % 6) {
        case 0: path.push_back({path.back().x + 2, path.back().y}); break;
        case 1: path.insert(path.begin(), State{-1, 0}); break;
        case 2: {
          const auto walls = m.blocked();
          if (!walls.empty()) path.insert(path.begin() + 1, walls[rng() % walls.size()]);
          break;
        }
        case 3: path.erase(path.begin()); break;
        default: break;
      }
      const bool ok = !check_path(m, path).has_value();
      EXPECT_EQ(ok, legal(m, path));
      accepted += ok;
      ++total;
    }
  }
  EXPECT_GT(accepted, 100);
  EXPECT_LT(accepted, total - 100);
}

TEST(Bonus, MonotoneAndFloored) {
  const BonusRule rule;
  EXPECT_EQ(rule.points(26, 26), 100);
  EXPECT_EQ(rule.points(28, 26), 90);
  EXPECT_EQ(rule.points(46, 26), 0);
  EXPECT_EQ(rule.points(500, 26), 0);
  for (int steps = 26; steps < 80; ++steps) EXPECT_GE(rule.points(steps, 26), rule.points(steps + 1, 26));
}

TEST(SessionStore, FullSessionAndExportRoundTrip) {
  TempDir dir;
  SessionStore store(shipped(), {}, dir.path);
  const Session s = store.create("P001", 7);
  EXPECT_EQ(s.schedule, schedule_trials(shipped(), {}, 7));
  play_practice(store, s);
  for (const auto& t : s.schedule.trials) {
    const TrialOutcome out = store.submit_trial(s.session_id, submission(shipped(), t));
    EXPECT_EQ(out.points, 100);
    EXPECT_EQ(out.record.path_steps, store.optimal_steps(t.maze_id));
  }
  EXPECT_EQ(store.complete(s.session_id), 1200);
  EXPECT_EQ(store.get(s.session_id).status, Session::Status::complete);

  std::istringstream csv(store.export_csv(s.session_id));
  const auto records = read_trials(csv);
  EXPECT_EQ(records, store.get(s.session_id).records);
  ASSERT_EQ(records.size(), 12u);
  // Favourable coding follows the first move.
  for (const auto& r : records) {
    const Maze& m = shipped().find(r.maze_id)->maze;
    EXPECT_EQ(r.first_move, optimal_path(m)[1]);
    EXPECT_EQ(r.favorable, shipped().favorable.at(r.maze_id) == r.first_move ? 1 : 0);
  }
  EXPECT_EQ(store.export_all(), records);
}

TEST(SessionStore, ErrorCodes) {
  TempDir dir;
  SessionStore store(shipped(), {}, dir.path);
  EXPECT_EQ(status_of([&] { store.get("missing"); }), 404);
  EXPECT_EQ(status_of([&] { store.create(""); }), 422);
  EXPECT_EQ(status_of([&] { store.create("a,b"); }), 422);

  const Session s = store.create("P1", 3);
  const auto& first = s.schedule.trials[0];
  // Scored trial before practice.
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, submission(shipped(), first)); }), 422);
  play_practice(store, s);
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, submission(shipped(), s.schedule.practice[0])); }),
            409);

  auto sub = submission(shipped(), first);
  const Maze& m = shipped().find(first.maze_id)->maze;
  sub.path.insert(sub.path.begin() + 1, m.blocked().front());
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, sub); }), 422);  // wall / jump
  sub = submission(shipped(), first);
  sub.path.erase(sub.path.begin());
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, sub); }), 422);  // wrong start
  sub = submission(shipped(), first);
  sub.path.pop_back();
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, sub); }), 422);  // stops short
  sub = submission(shipped(), first);
  sub.maze_id = s.schedule.trials[1].maze_id;
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, sub); }), 422);  // wrong maze
  sub = submission(shipped(), first);
  sub.total_ms = sub.planning_ms - 1;
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, sub); }), 422);
  sub = submission(shipped(), first);
  sub.planning_ms = 60001;
  sub.total_ms = 70000;
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, sub); }), 422);  // over the cap
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, submission(shipped(), s.schedule.trials[1])); }),
            422);  // out of order

  store.submit_trial(s.session_id, submission(shipped(), first));
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, submission(shipped(), first)); }), 409);
  EXPECT_EQ(status_of([&] { store.complete(s.session_id); }), 422);
  EXPECT_EQ(status_of([&] { store.submit_trial("missing", submission(shipped(), first)); }), 404);
  EXPECT_EQ(store.get(s.session_id).records.size(), 1u);
}

TEST(SessionStore, CompletedSessionIsClosed) {
  TempDir dir;
  SessionStore store(shipped(), {}, dir.path);
  const Session s = store.create("P1", 5);
  play_practice(store, s);
  for (const auto& t : s.schedule.trials) store.submit_trial(s.session_id, submission(shipped(), t));
  store.complete(s.session_id);
  EXPECT_EQ(status_of([&] { store.complete(s.session_id); }), 409);
  EXPECT_EQ(status_of([&] { store.submit_trial(s.session_id, submission(shipped(), s.schedule.trials[0])); }),
            409);
}

TEST(SessionStore, ReplaysLogsAfterRestart) {
  TempDir dir;
  std::string done, partial;
  {
    SessionStore store(shipped(), {}, dir.path);
    const Session a = store.create("A", 11);
    play_practice(store, a);
    for (const auto& t : a.schedule.trials) store.submit_trial(a.session_id, submission(shipped(), t));
    store.complete(a.session_id);
    done = a.session_id;

    const Session b = store.create("B", 12);
    play_practice(store, b);
    for (int i = 0; i < 5; ++i) store.submit_trial(b.session_id, submission(shipped(), b.schedule.trials[i]));
    partial = b.session_id;
  }
  // A torn final line is ignored.
  { std::ofstream(dir.path / (partial + ".jsonl"), std::ios::app) << "{\"event\":\"tri"; }

  SessionStore store(shipped(), {}, dir.path);
  EXPECT_EQ(store.session_ids().size(), 2u);
  const Session a = store.get(done);
  EXPECT_EQ(a.status, Session::Status::complete);
  EXPECT_EQ(a.bonus, 1200);
  EXPECT_EQ(a.records.size(), 12u);
  EXPECT_EQ(a.schedule, schedule_trials(shipped(), {}, 11));

  const Session b = store.get(partial);
  EXPECT_EQ(b.status, Session::Status::in_progress);
  EXPECT_EQ(b.records.size(), 5u);
  EXPECT_EQ(b.practice_done.size(), 2u);
  store.submit_trial(partial, submission(shipped(), b.schedule.trials[5]));
  EXPECT_EQ(store.get(partial).records.size(), 6u);
  EXPECT_EQ(store.export_all().size(), 12u);
}

TEST(SessionStore, ConcurrentSessions) {
  TempDir dir;
  SessionStore store(shipped(), {}, dir.path);
  std::vector<std::thread> threads;
  std::atomic<int> completed{0};
  for (int p = 0; p < 8; ++p)
    threads.emplace_back([&, p] {
      const Session s = store.create("P" + std::to_string(p));
      play_practice(store, s);
      for (const auto& t : s.schedule.trials) store.submit_trial(s.session_id, submission(shipped(), t));
      if (store.complete(s.session_id) == 1200) ++completed;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(completed.load(), 8);
  EXPECT_EQ(store.export_all().size(), 96u);
}

TEST(SessionStore, RejectsBadConfig) {
  TempDir dir;
  ExperimentConfig c;
  c.planning_cap_ms = 0;
  EXPECT_THROW(SessionStore(shipped(), c, dir.path), Error);
  c = {};
  c.bonus.per_step = -1;
  EXPECT_THROW(SessionStore(shipped(), c, dir.path), Error);
}

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<SessionStore>(shipped(), ExperimentConfig{}, dir_.path / "sessions");
    server_ = std::make_unique<ExperimentServer>(*store_);
    port_ = server_->bind_any();
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  httplib::Result post(const std::string& path, const nlohmann::json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  static nlohmann::json trial_body(const nlohmann::json& t, const std::vector<State>& path) {
    nlohmann::json p = nlohmann::json::array();
    for (State s : path) p.push_back({s.x, s.y});
    return {{"practice", t.at("practice")}, {"trial_number", t.at("trial_number")},
            {"maze_id", t.at("maze_id")},   {"path", p},
            {"planning_ms", 3000},          {"total_ms", 12000}};
  }

  static std::vector<State> solve(const nlohmann::json& t) {
    std::string text;
    for (const auto& row : t.at("grid")) text += row.get<std::string>() + "\n";
    return optimal_path(parse_maze(text));
  }

  TempDir dir_;
  std::unique_ptr<SessionStore> store_;
  std::unique_ptr<ExperimentServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = -1;
};

TEST_F(HttpTest, ConfigAndPlaceholderPage) {
  auto res = client_->Get("/api/config");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto cfg = nlohmann::json::parse(res->body);
  EXPECT_EQ(cfg.at("planning_cap_ms"), 60000);
  EXPECT_EQ(cfg.at("scored_trials"), 12);
  EXPECT_EQ(cfg.at("sets").size(), 6u);
  res = client_->Get("/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
}

TEST_F(HttpTest, HeadlessSession) {
  auto res = post("/api/session", {{"participant_id", "H1"}, {"seed", 5}});
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const auto created = nlohmann::json::parse(res->body);
  const std::string id = created.at("session_id");
  const auto& schedule = created.at("schedule");
  ASSERT_EQ(schedule.at("practice").size(), 2u);
  ASSERT_EQ(schedule.at("trials").size(), 12u);
  EXPECT_EQ(res->body.find("favorable"), std::string::npos);

  // Wall-crossing path is rejected with a reason.
  const auto& t1 = schedule.at("trials")[0];
  std::string text;
  for (const auto& row : t1.at("grid")) text += row.get<std::string>() + "\n";
  const Maze m1 = parse_maze(text);
  for (const auto& t : schedule.at("practice")) {
    res = post("/api/session/" + id + "/trial", trial_body(t, solve(t)));
    ASSERT_EQ(res->status, 201) << res->body;
  }
  auto bad = solve(t1);
  bad.insert(bad.begin() + 1, m1.blocked().front());
  res = post("/api/session/" + id + "/trial", trial_body(t1, bad));
  EXPECT_EQ(res->status, 422);
  EXPECT_NE(nlohmann::json::parse(res->body).at("error").get<std::string>().find("illegal path"),
            std::string::npos);

  for (const auto& t : schedule.at("trials")) {
    res = post("/api/session/" + id + "/trial", trial_body(t, solve(t)));
    ASSERT_EQ(res->status, 201) << res->body;
    EXPECT_EQ(nlohmann::json::parse(res->body).at("points"), 100);
  }
  res = post("/api/session/" + id + "/trial", trial_body(schedule.at("trials")[0], solve(schedule.at("trials")[0])));
  EXPECT_EQ(res->status, 409);

  res = client_->Get("/api/session/" + id);
  EXPECT_EQ(nlohmann::json::parse(res->body).at("trials_done"), 12);
  res = post("/api/session/" + id + "/complete", nlohmann::json::object());
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body).at("bonus"), 1200);

  res = client_->Get("/api/session/" + id + "/export");
  ASSERT_EQ(res->status, 200);
  std::istringstream csv(res->body);
  const auto records = read_trials(csv);
  EXPECT_EQ(records.size(), 12u);
  EXPECT_EQ(records, store_->get(id).records);
}

TEST_F(HttpTest, ErrorResponses) {
  EXPECT_EQ(client_->Get("/api/session/nope")->status, 404);
  EXPECT_EQ(client_->Get("/api/session/nope/export")->status, 404);
  EXPECT_EQ(post("/api/session/nope/complete", nlohmann::json::object())->status, 404);
  auto res = client_->Post("/api/session", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  const auto created = nlohmann::json::parse(post("/api/session", {{"participant_id", "E"}})->body);
  const std::string id = created.at("session_id");
  res = post("/api/session/" + id + "/trial", {{"trial_number", 1}});
  EXPECT_EQ(res->status, 400);
  res = post("/api/session/" + id + "/trial",
             {{"trial_number", 1}, {"maze_id", "x"}, {"path", {1, 2}}, {"planning_ms", 0}, {"total_ms", 0}});
  EXPECT_EQ(res->status, 400);
}
