#pragma once

// HTTP front end for SessionStore. JSON bodies; mazes travel as the rows of
// the text format. Nothing that identifies the model-favoured half is ever
// sent to the client.

#include <filesystem>
#include <string>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro.
#include "rrplan/experiment.hpp"

#include <httplib.h>
#include <json.hpp>

namespace rrplan {

namespace detail {

inline const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>Maze experiment</title></head>
<body><p>The experiment UI bundle is not installed. Start the service with
<code>--static DIR</code> pointing at the built web client.</p></body></html>
)";

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

inline nlohmann::json trial_json(const ScheduledTrial& t, const Maze& maze) {
  return {{"trial_number", t.trial_number}, {"practice", t.practice}, {"maze_id", t.maze_id},
          {"size", maze.size()},            {"grid", maze_rows(maze)}};
}

inline TrialSubmission parse_submission(const nlohmann::json& body) {
  TrialSubmission sub;
  sub.practice = body.value("practice", false);
  sub.trial_number = body.at("trial_number").get<int>();
  sub.maze_id = body.at("maze_id").get<std::string>();
  for (const auto& p : body.at("path")) {
    if (!p.is_array() || p.size() != 2) throw SessionError(400, "path entries must be [x, y]");
    sub.path.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  sub.planning_ms = body.at("planning_ms").get<long long>();
  sub.total_ms = body.at("total_ms").get<long long>();
  return sub;
}

}  // namespace detail

class ExperimentServer {
 public:
  ExperimentServer(SessionStore& store, std::filesystem::path static_dir = {})
      : store_(store) {
    if (!static_dir.empty() && std::filesystem::is_directory(static_dir))
      server_.set_mount_point("/", static_dir.string());
    else
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(detail::kPlaceholderPage, "text/html");
      });
    routes();
  }

  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  /// Binds an ephemeral port and returns it (-1 on failure).
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  template <class Handler>
  static auto guarded(Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const SessionError& e) {
        detail::send_error(res, e.status(), e.what());
      } catch (const nlohmann::json::exception& e) {
        detail::send_error(res, 400, std::string("bad request body: ") + e.what());
      } catch (const std::exception& e) {
        detail::send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    server_.Get("/api/config", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto& c = store_.config();
      nlohmann::json sets = nlohmann::json::array();
      for (const auto& [id, _] : store_.bundle().sets()) sets.push_back(id);
      detail::send_json(res, 200,
                        {{"planning_cap_ms", c.planning_cap_ms},
                         {"bonus", {{"base", c.bonus.base}, {"per_step", c.bonus.per_step}}},
                         {"practice_trials", kPracticeTrials},
                         {"scored_trials", kSetCount * kPerSetSampled},
                         {"sets", sets}});
    }));

    server_.Post("/api/session", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const nlohmann::json body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
      std::optional<std::uint64_t> seed;
      if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
      const Session s = store_.create(body.value("participant_id", std::string("anonymous")), seed);
      nlohmann::json practice = nlohmann::json::array(), trials = nlohmann::json::array();
      for (const auto& t : s.schedule.practice)
        practice.push_back(detail::trial_json(t, store_.bundle().find(t.maze_id)->maze));
      for (const auto& t : s.schedule.trials)
        trials.push_back(detail::trial_json(t, store_.bundle().find(t.maze_id)->maze));
      detail::send_json(res, 201,
                        {{"session_id", s.session_id},
                         {"participant_id", s.participant_id},
                         {"schedule", {{"practice", practice}, {"trials", trials}}}});
    }));

    server_.Get(R"(/api/session/([0-9a-zA-Z_-]+))",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const Session s = store_.get(req.matches[1]);
                  detail::send_json(res, 200,
                                    {{"session_id", s.session_id},
                                     {"status", s.status == Session::Status::complete ? "complete" : "in_progress"},
                                     {"practice_done", s.practice_done.size()},
                                     {"trials_done", s.records.size()},
                                     {"bonus", s.bonus}});
                }));

    server_.Post(R"(/api/session/([0-9a-zA-Z_-]+)/trial)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const auto body = nlohmann::json::parse(req.body);
                   const TrialOutcome out = store_.submit_trial(req.matches[1], detail::parse_submission(body));
                   detail::send_json(res, 201,
                                     {{"accepted", true},
                                      {"practice", body.value("practice", false)},
                                      {"trial_number", out.record.trial_number},
                                      {"path_steps", out.record.path_steps},
                                      {"points", out.points}});
                 }));

    server_.Post(R"(/api/session/([0-9a-zA-Z_-]+)/complete)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const int bonus = store_.complete(req.matches[1]);
                   detail::send_json(res, 200, {{"status", "complete"}, {"bonus", bonus}});
                 }));

    server_.Get(R"(/api/session/([0-9a-zA-Z_-]+)/export)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  res.set_content(store_.export_csv(req.matches[1]), "text/csv");
                }));
  }

  SessionStore& store_;
  httplib::Server server_;
};

}  // namespace rrplan
