#pragma once

// Behavioural analysis: trial CSV ingestion, first-move choice coding,
// per-trial choice proportions, and maximum-likelihood logistic regression
// with Wald inference.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rrplan/error.hpp"
#include "rrplan/maze.hpp"
#include "rrplan/model.hpp"
#include "rrplan/planner.hpp"

namespace rrplan {

inline constexpr int kScoredTrials = 12;

struct TrialRecord {
  std::string participant_id;
  int trial_number = 0;
  std::string maze_id;
  State first_move;
  int favorable = 0;
  int path_steps = 0;
  long long planning_ms = 0;
  long long total_ms = 0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

// ---------------------------------------------------------------- trial CSV

inline constexpr const char* kTrialHeader =
    "participant_id,trial_number,maze_id,first_move_x,first_move_y,favorable,path_steps,"
    "planning_ms,total_ms";

inline void write_trial_header(std::ostream& os) { os << kTrialHeader << '\n'; }

inline void write_trial(std::ostream& os, const TrialRecord& r) {
  os << r.participant_id << ',' << r.trial_number << ',' << r.maze_id << ',' << r.first_move.x
     << ',' << r.first_move.y << ',' << r.favorable << ',' << r.path_steps << ','
     << r.planning_ms << ',' << r.total_ms << '\n';
}

inline void write_trials(std::ostream& os, const std::vector<TrialRecord>& records) {
  write_trial_header(os);
  for (const auto& r : records) write_trial(os, r);
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class Int>
Int parse_int(const std::string& s, const char* what, int lineno) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<Int>(v);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace detail

inline std::vector<TrialRecord> read_trials(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trial CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrialHeader) throw ParseError("unexpected trial CSV header: " + line);

  std::vector<TrialRecord> out;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9)
      throw ParseError("line " + std::to_string(lineno) + ": expected 9 fields, got " +
                       std::to_string(f.size()));
    TrialRecord r;
    r.participant_id = f[0];
    r.trial_number = detail::parse_int<int>(f[1], "trial_number", lineno);
    r.maze_id = f[2];
    r.first_move = {detail::parse_int<int>(f[3], "first_move_x", lineno),
                    detail::parse_int<int>(f[4], "first_move_y", lineno)};
    r.favorable = detail::parse_int<int>(f[5], "favorable", lineno);
    r.path_steps = detail::parse_int<int>(f[6], "path_steps", lineno);
    r.planning_ms = detail::parse_int<long long>(f[7], "planning_ms", lineno);
    r.total_ms = detail::parse_int<long long>(f[8], "total_ms", lineno);
    if (r.participant_id.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty participant_id");
    if (r.trial_number < 1 || r.trial_number > kScoredTrials)
      throw ParseError("line " + std::to_string(lineno) + ": trial_number out of range");
    if (r.favorable != 0 && r.favorable != 1)
      throw ParseError("line " + std::to_string(lineno) + ": favorable must be 0 or 1");
    if (r.path_steps < 0 || r.planning_ms < 0 || r.total_ms < 0)
      throw ParseError("line " + std::to_string(lineno) + ": negative count");
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- choice coding

/// The subtask entered by the first move of `path`.
inline Subtask infer_choice(const Maze& maze, const Plan& path) {
  if (path.states.size() < 2) throw Error("path has no moves");
  if (path.states.front() != maze.start()) throw Error("path does not begin at the start");
  const State second = path.states[1];
  for (const Subtask& z : enumerate_subtasks(maze, false))
    if (z.subgoal == second) return z;
  throw Error("first move " + to_string(second) + " does not enter a subtask");
}

// ---------------------------------------------------------------- proportions

struct ProportionPoint {
  int trial_number = 0;
  std::size_t n = 0;
  double proportion = 0.0;
  double standard_error = 0.0;  // sqrt(p (1 - p) / n)
};

inline std::vector<ProportionPoint> proportions_by_trial(const std::vector<TrialRecord>& records) {
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // trial -> (n, favorable)
  for (const auto& r : records) {
    auto& [n, k] = counts[r.trial_number];
    ++n;
    k += static_cast<std::size_t>(r.favorable);
  }
  std::vector<ProportionPoint> out;
  for (const auto& [trial, nk] : counts) {
    const double p = static_cast<double>(nk.second) / static_cast<double>(nk.first);
    out.push_back({trial, nk.first, p, std::sqrt(p * (1.0 - p) / static_cast<double>(nk.first))});
  }
  return out;
}

// ---------------------------------------------------------------- regression

/// Two-sided Wald p-value 2 (1 - Phi(|coef / se|)) = erfc(|z| / sqrt 2).
inline double wald_p(double coefficient, double standard_error) {
  if (!(standard_error > 0.0)) throw Error("standard error must be positive");
  return std::erfc(std::abs(coefficient / standard_error) / std::sqrt(2.0));
}

struct RegressionResult {
  std::vector<std::string> terms;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd z_values;
  Eigen::VectorXd p_values;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;  // max-norm of the score at the final estimate
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

struct LogisticOptions {
  double gradient_tolerance = 1e-10;
  int max_iterations = 100;
  double separation_threshold = 30.0;
};

namespace detail {

inline double log1p_exp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline double logistic_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - detail::log1p_exp(eta[i]);
  return ll;
}

/// Score X'(y - p).
inline Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) resid[i] = y[i] - detail::sigmoid(eta[i]);
  return X.transpose() * resid;
}

/// Observed information X' diag(p (1 - p)) X.
inline Eigen::MatrixXd logistic_information(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = detail::sigmoid(eta[i]);
    w[i] = p * (1.0 - p);
  }
  return X.transpose() * w.asDiagonal() * X;
}

/// Newton-Raphson with step halving. `design` carries its own intercept
/// column. Separation (|beta| above the threshold, a singular information
/// matrix, or constant outcomes) ends the fit with converged = false.
inline RegressionResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcomes,
                                     std::vector<std::string> terms = {},
                                     const LogisticOptions& opt = {}) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (outcomes.size() != n) throw Error("design rows and outcome length differ");
  if (k < 1 || n < k) throw Error("need at least as many observations as predictors");
  for (Eigen::Index i = 0; i < n; ++i)
    if (outcomes[i] != 0.0 && outcomes[i] != 1.0) throw Error("outcomes must be 0 or 1");
  if (terms.empty())
    for (Eigen::Index j = 0; j < k; ++j) terms.push_back("x" + std::to_string(j));
  if (static_cast<Eigen::Index>(terms.size()) != k) throw Error("term names do not match columns");

  RegressionResult res;
  res.terms = std::move(terms);
  res.coefficients = Eigen::VectorXd::Zero(k);
  res.standard_errors = Eigen::VectorXd::Constant(k, std::nan(""));
  res.z_values = Eigen::VectorXd::Constant(k, std::nan(""));
  res.p_values = Eigen::VectorXd::Constant(k, std::nan(""));

  const double ybar = outcomes.mean();
  bool separated = ybar == 0.0 || ybar == 1.0;
  if (separated) res.diagnostic = "outcomes are all " + std::string(ybar == 0.0 ? "0" : "1");

  Eigen::VectorXd& beta = res.coefficients;
  double ll = logistic_log_likelihood(design, outcomes, beta);
  Eigen::VectorXd grad = logistic_gradient(design, outcomes, beta);
  constexpr const char* kSingular = "information matrix is singular (separation or collinearity)";
  auto singular = [](const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
    return ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
           ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff());
  };
  while (!separated) {
    if (grad.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      if (singular(Eigen::LDLT<Eigen::MatrixXd>(logistic_information(design, beta)))) {
        separated = true;
        res.diagnostic = kSingular;
      } else {
        res.converged = true;
      }
      break;
    }
    if (res.iterations >= opt.max_iterations) {
      res.diagnostic = "iteration limit reached";
      break;
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(logistic_information(design, beta));
    if (singular(ldlt)) {
      separated = true;
      res.diagnostic = kSingular;
      break;
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    Eigen::VectorXd next = beta + step;
    double next_ll = logistic_log_likelihood(design, outcomes, next);
    // Near the optimum the likelihood change drops below rounding noise.
    const double slack = 1e-12 * (1.0 + std::abs(ll));
    for (int halvings = 0; next_ll < ll - slack && halvings < 50; ++halvings) {
      step *= 0.5;
      next = beta + step;
      next_ll = logistic_log_likelihood(design, outcomes, next);
    }
    ++res.iterations;
    if (next_ll < ll - slack) {
      res.diagnostic = "step halving failed to increase the likelihood";
      break;
    }
    beta = next;
    ll = next_ll;
    grad = logistic_gradient(design, outcomes, beta);
    if (beta.lpNorm<Eigen::Infinity>() > opt.separation_threshold) {
      separated = true;
      res.diagnostic = "coefficient magnitude exceeds " + std::to_string(opt.separation_threshold) +
                       " (separation)";
    }
  }
  res.log_likelihood = ll;
  res.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  if (separated) res.converged = false;

  if (res.converged) {
    const Eigen::MatrixXd cov = logistic_information(design, beta).inverse();
    for (Eigen::Index j = 0; j < k; ++j) {
      res.standard_errors[j] = std::sqrt(cov(j, j));
      res.z_values[j] = beta[j] / res.standard_errors[j];
      res.p_values[j] = wald_p(beta[j], res.standard_errors[j]);
    }
  }
  return res;
}

// ---------------------------------------------------------------- full report

struct AnalysisReport {
  std::size_t participants = 0;           // after exclusion
  std::vector<std::string> excluded;      // participants without all scored trials
  int last_trial = 0;
  RegressionResult intercept_only;        // path_chosen ~ 1, last trial only
  RegressionResult trial_slope;           // path_chosen ~ 1 + trial_number, all trials
  std::vector<ProportionPoint> proportions;
};

/// Keeps participants with exactly one record for each trial 1..12.
inline std::vector<TrialRecord> complete_participants(const std::vector<TrialRecord>& records,
                                                      std::vector<std::string>* excluded = nullptr) {
  std::map<std::string, std::set<int>> trials;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    trials[r.participant_id].insert(r.trial_number);
    ++counts[r.participant_id];
  }
  std::set<std::string> keep;
  for (const auto& [id, set] : trials) {
    if (set.size() == kScoredTrials && counts[id] == kScoredTrials)
      keep.insert(id);
    else if (excluded)
      excluded->push_back(id);
  }
  std::vector<TrialRecord> out;
  for (const auto& r : records)
    if (keep.count(r.participant_id)) out.push_back(r);
  return out;
}

inline AnalysisReport run_paper_analyses(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw Error("no trial records");
  AnalysisReport rep;
  const std::vector<TrialRecord> kept = complete_participants(records, &rep.excluded);
  if (kept.empty()) throw Error("no participant completed all " + std::to_string(kScoredTrials) + " trials");

  std::set<std::string> ids;
  for (const auto& r : kept) {
    ids.insert(r.participant_id);
    rep.last_trial = std::max(rep.last_trial, r.trial_number);
  }
  rep.participants = ids.size();

  std::vector<double> last;
  for (const auto& r : kept)
    if (r.trial_number == rep.last_trial) last.push_back(r.favorable);
  const Eigen::Index m = static_cast<Eigen::Index>(last.size());
  rep.intercept_only = fit_logistic(Eigen::MatrixXd::Ones(m, 1),
                                    Eigen::Map<const Eigen::VectorXd>(last.data(), m), {"intercept"});

  const Eigen::Index n = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = kept[static_cast<std::size_t>(i)].trial_number;
    y[i] = kept[static_cast<std::size_t>(i)].favorable;
  }
  rep.trial_slope = fit_logistic(X, y, {"intercept", "trial_number"});
  rep.proportions = proportions_by_trial(kept);
  return rep;
}

namespace detail {

inline std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

inline void write_coefficients_csv(std::ostream& os, const AnalysisReport& rep) {
  os << "model,term,estimate,se,z,p,converged,iterations\n";
  auto emit = [&](const char* model, const RegressionResult& r) {
    for (std::size_t j = 0; j < r.terms.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      os << model << ',' << r.terms[j] << ',' << detail::fmt(r.coefficients[i]) << ','
         << detail::fmt(r.standard_errors[i]) << ',' << detail::fmt(r.z_values[i]) << ','
         << detail::fmt(r.p_values[i]) << ',' << (r.converged ? 1 : 0) << ',' << r.iterations
         << '\n';
    }
  };
  emit("last_trial_intercept", rep.intercept_only);
  emit("trial_slope", rep.trial_slope);
}

inline void write_proportions_csv(std::ostream& os, const std::vector<ProportionPoint>& points) {
  os << "trial,n,proportion,se\n";
  for (const auto& p : points)
    os << p.trial_number << ',' << p.n << ',' << detail::fmt(p.proportion) << ','
       << detail::fmt(p.standard_error) << '\n';
}

inline void write_report_text(std::ostream& os, const AnalysisReport& rep) {
  os << "participants analysed: " << rep.participants;
  if (!rep.excluded.empty()) os << " (excluded " << rep.excluded.size() << " incomplete)";
  os << "\n\n";
  auto table = [&](const std::string& title, const RegressionResult& r) {
    os << title << (r.converged ? "" : "  [NOT CONVERGED: " + r.diagnostic + "]") << '\n';
    os << "  term            estimate        se         z         p\n";
    for (std::size_t j = 0; j < r.terms.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      char buf[160];
      std::snprintf(buf, sizeof buf, "  %-14s %9.3f %9.3f %9.3f %9.3f\n", r.terms[j].c_str(),
                    r.coefficients[i], r.standard_errors[i], r.z_values[i], r.p_values[i]);
      os << buf;
    }
    os << "  log-likelihood " << detail::fmt(r.log_likelihood, 4) << ", " << r.iterations
       << " Newton iterations\n\n";
  };
  table("path_chosen ~ intercept (trial " + std::to_string(rep.last_trial) + ")", rep.intercept_only);
  table("path_chosen ~ intercept + trial_number", rep.trial_slope);
  os << "trial      n  proportion      se\n";
  for (const auto& p : rep.proportions) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%5d %6zu %11.3f %7.3f\n", p.trial_number, p.n, p.proportion,
                  p.standard_error);
    os << buf;
  }
}

}  // namespace rrplan
