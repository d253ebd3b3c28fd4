// rrplan: model predictions, stimulus validation and expansion, analysis of
// trial data, and the experiment session service.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rrplan/analysis.hpp"
#include "rrplan/bundle.hpp"
#include "rrplan/design.hpp"
#include "rrplan/experiment.hpp"
#include "rrplan/model.hpp"
#include "rrplan/server.hpp"

namespace fs = std::filesystem;
using namespace rrplan;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string mode = "det";
  int samples = kDefaultSamples;

  TieBreakPolicy policy() const {
    return mode == "mc" ? TieBreakPolicy::stochastic(seed) : TieBreakPolicy::deterministic();
  }
};

int cmd_predict(const GlobalOptions& g, const fs::path& path) {
  const Bundle bundle = load_mazes(path);
  const auto mazes = bundle.set_mazes();
  const auto rows = predict_bundle(mazes, g.policy(), g.samples);
  write_prediction_table(std::cout, rows, g.mode == "mc");
  int failures = 0;
  for (const auto& r : rows) {
    if (!r.prediction) {
      std::cerr << "error: " << r.maze_id << ": " << r.error << '\n';
      ++failures;
    }
  }
  return failures ? 1 : 0;
}

int cmd_validate(const fs::path& path) {
  const Bundle bundle = load_mazes(path);
  std::printf("%-34s %-6s %-5s %4s %4s %-5s %-8s %5s %5s %-9s %s\n", "maze_id", "solve", "diag",
              "wU", "wL", "subg", "mirrored", "lenU", "lenL", "favorable", "result");
  int failures = 0;
  for (const auto& e : bundle.entries) {
    const StructuralReport sr = validate_maze(e.maze);
    bool pass = sr.ok();
    std::string detail;
    if (e.is_practice() || !sr.ok()) {
      std::printf("%-34s %-6s %-5s %4s %4s %-5s %-8s %5s %5s %-9s %s\n", e.maze.id().c_str(),
                  sr.ok() ? "ok" : "FAIL", "-", "-", "-", "-", "-", "-", "-", "-",
                  pass ? (e.is_practice() ? "pass (practice)" : "pass") : "FAIL");
      if (!pass) ++failures;
      continue;
    }
    const DesignReport dr = validate_design(e.maze);
    pass = pass && dr.passes();
    std::string fav = "-";
    if (const auto it = bundle.favorable.find(e.maze.id()); it != bundle.favorable.end()) {
      const auto p = select_subtask(e.maze, TieBreakPolicy::deterministic());
      const bool agrees = p.choice().subtask.subgoal == it->second && !p.tie;
      fav = agrees ? "agrees" : "DISAGREES";
      pass = pass && agrees;
    }
    auto len = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("-"); };
    std::printf("%-34s %-6s %-5s %4zu %4zu %-5d %-8s %5s %5s %-9s %s\n", e.maze.id().c_str(), "ok",
                std::string(diagonal_name(dr.diagonal)).c_str(), dr.walls_upper_triangle,
                dr.walls_lower_triangle, dr.subgoal_count, dr.mirrored_optimal_paths ? "yes" : "no",
                len(dr.optimal_length_upper).c_str(), len(dr.optimal_length_lower).c_str(),
                fav.c_str(), pass ? "pass" : "FAIL");
    if (!pass) {
      ++failures;
      for (const auto& p : dr.problems) std::fprintf(stderr, "  %s: %s\n", e.maze.id().c_str(), p.c_str());
    }
  }
  std::printf("%d of %zu mazes failed\n", failures, bundle.entries.size());
  return failures ? 1 : 0;
}

int cmd_transform(const fs::path& base_path, const fs::path& out_dir, std::string set_id,
                  const std::vector<int>& favorable) {
  const Maze base = read_maze_file(base_path);
  if (set_id.empty()) set_id = base.id();
  fs::create_directories(out_dir);
  std::ofstream index(out_dir / "index", std::ios::app);
  std::ofstream fav;
  if (!favorable.empty()) fav.open(out_dir / "favorable", std::ios::app);
  for (Transform t : kAllTransforms) {
    const Maze m = apply_transform(base, t);
    const std::string id = base.id() + "_" + std::string(transform_name(t));
    BundleEntry e{set_id, base.id(), t, id + ".maze", m.with_id(id)};
    write_maze_file(out_dir / e.filename, e.maze);
    index << index_line(e) << '\n';
    if (fav.is_open()) {
      const State z = map_state({favorable[0], favorable[1]}, base.size(), t);
      fav << id << ' ' << z.x << ' ' << z.y << '\n';
    }
    std::cout << (out_dir / e.filename).string() << '\n';
  }
  return 0;
}

int cmd_analyze(const fs::path& csv, const fs::path& out_dir) {
  std::ifstream in(csv);
  if (!in) throw Error("cannot open " + csv.string());
  const auto records = read_trials(in);
  const AnalysisReport rep = run_paper_analyses(records);
  write_report_text(std::cout, rep);
  fs::create_directories(out_dir);
  std::ofstream coef(out_dir / "coefficients.csv");
  write_coefficients_csv(coef, rep);
  std::ofstream prop(out_dir / "proportions.csv");
  write_proportions_csv(prop, rep.proportions);
  std::cout << "\nwrote " << (out_dir / "coefficients.csv").string() << " and "
            << (out_dir / "proportions.csv").string() << '\n';
  return rep.intercept_only.converged && rep.trial_slope.converged ? 0 : 2;
}

ExperimentServer* g_server = nullptr;

int cmd_serve(const GlobalOptions& g, const std::string& host, int port, const fs::path& bundle_dir,
              const fs::path& out_dir, const fs::path& static_dir, long long planning_cap_ms) {
  ExperimentConfig config;
  config.bundle_dir = bundle_dir;
  config.rng_seed = g.seed;
  config.planning_cap_ms = planning_cap_ms;
  SessionStore store(load_bundle(bundle_dir), config, out_dir);
  ExperimentServer server(store, static_dir);
  if (!server.bind(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "serving on http://" << host << ':' << port << " (sessions in " << out_dir.string()
            << ")\n";
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subtask-selection model for grid mazes: predictions, stimuli, analysis, service"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for stochastic tie-breaking and scheduling");
  app.add_option("--mode", g.mode, "Tie-break mode: det (deterministic) or mc (Monte Carlo)")
      ->check(CLI::IsMember({"det", "mc"}));
  app.add_option("--samples", g.samples, "Monte Carlo samples per search")->check(CLI::PositiveNumber);

  fs::path predict_path;
  auto* predict = app.add_subcommand("predict", "Prediction table (CSV) for a bundle or .maze file");
  predict->add_option("path", predict_path)->required();

  fs::path validate_path;
  auto* validate = app.add_subcommand("validate", "Structural and design checks per maze");
  validate->add_option("path", validate_path)->required();

  fs::path transform_base, transform_out = ".";
  std::string set_id;
  std::vector<int> favorable;
  auto* transform = app.add_subcommand("transform", "Write the 8 symmetry images of a base maze");
  transform->add_option("base", transform_base)->required();
  transform->add_option("-o,--out", transform_out, "Bundle directory to write into");
  transform->add_option("--set-id", set_id, "Set id for the index (default: base id)");
  transform->add_option("--favorable", favorable, "Designed low-cost subgoal in the base: X Y")
      ->expected(2)
      ->delimiter(',');

  fs::path analyze_csv, analyze_out = ".";
  auto* analyze = app.add_subcommand("analyze", "Regressions and per-trial proportions from a trial CSV");
  analyze->add_option("csv", analyze_csv)->required();
  analyze->add_option("-o,--out", analyze_out, "Directory for coefficients.csv and proportions.csv");

  std::string host = "127.0.0.1";
  int port = 8080;
  long long planning_cap_ms = 60000;
  fs::path bundle_dir = "stimuli", out_dir = "sessions", static_dir;
  auto* serve = app.add_subcommand("serve", "Run the experiment session service");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--bundle", bundle_dir);
  serve->add_option("--out", out_dir, "Directory for append-only session logs");
  serve->add_option("--static", static_dir, "Directory of web UI assets");
  serve->add_option("--planning-cap-ms", planning_cap_ms)->check(CLI::PositiveNumber);

  for (auto* sub : {predict, validate, transform, analyze, serve}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*predict) return cmd_predict(g, predict_path);
    if (*validate) return cmd_validate(validate_path);
    if (*transform) return cmd_transform(transform_base, transform_out, set_id, favorable);
    if (*analyze) return cmd_analyze(analyze_csv, analyze_out);
    if (*serve) return cmd_serve(g, host, port, bundle_dir, out_dir, static_dir, planning_cap_ms);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
