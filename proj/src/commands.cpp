#include "rsmp/commands.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "rsmp/adjoint.hpp"
#include "rsmp/config.hpp"
#include "rsmp/csv.hpp"
#include "rsmp/dynamics.hpp"
#include "rsmp/errors.hpp"
#include "rsmp/investment.hpp"
#include "rsmp/log.hpp"
#include "rsmp/oracle.hpp"
#include "rsmp/robust.hpp"

namespace rsmp {
namespace {

struct Workspace {
  ScenarioConfig cfg;
  PathSpace ps;
  ScenarioModel model;
  AmbiguitySet set;
  std::filesystem::path out;
};

std::string sanitize(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return out.empty() ? std::string("scenario") : out;
}

std::string fmt(double v) { return format_float(v); }

std::string check_line(const std::string& name, double value, const std::string& relation,
                       double bound, bool pass) {
  return std::string(pass ? "[PASS] " : "[FAIL] ") + name + " = " + fmt(value) + " (" + relation +
         " " + fmt(bound) + ")\n";
}

// Componentwise clamp of u_star + a seeded uniform [-1, 1] shift back into the
// admissible box, giving a deterministic nontrivial comparison control.
AdaptedProcess perturbed_control(const PathSpace& ps, const ScenarioModel& model,
                                 const AdaptedProcess& u_star, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  AdaptedProcess u = u_star;
  for (int k = 0; k < model.horizon; ++k) {
    const Eigen::VectorXd lo = model.lower_bound(k), hi = model.upper_bound(k);
    for (Index w = 0; w < ps.node_count(k); ++w) {
      for (Index i = 0; i < model.control_dim; ++i) {
        const double moved = u_star.value(k, w)(i) + shift(rng);
        u.value(k, w)(i) = std::clamp(moved, lo(i), hi(i));
      }
    }
  }
  return u;
}

AdaptedProcess constant_control(const PathSpace& ps, const ScenarioModel& model,
                                const Eigen::VectorXd& value) {
  AdaptedProcess u(ps, 0, model.horizon - 1, model.control_dim);
  for (int k = 0; k < model.horizon; ++k) {
    u.stage_data(k).colwise() = value;
  }
  return u;
}

AdaptedProcess resolve_control(const Workspace& w, std::string& note) {
  const ControlChoice& choice = w.cfg.run.control;
  ControlChoice::Type type = choice.type;
  if (type == ControlChoice::Type::Default) {
    type = w.model.family == ModelFamily::Investment ? ControlChoice::Type::Portfolio
                                                     : ControlChoice::Type::Zero;
  }
  switch (type) {
    case ControlChoice::Type::Zero: {
      note = "zero control";
      return AdaptedProcess(w.ps, 0, w.model.horizon - 1, w.model.control_dim);
    }
    case ControlChoice::Type::Constant: {
      if (choice.value.size() != w.model.control_dim) {
        throw BadSpec("constant control has length " + std::to_string(choice.value.size()) +
                      ", expected " + std::to_string(w.model.control_dim));
      }
      note = "constant control";
      return constant_control(w.ps, w.model, choice.value);
    }
    case ControlChoice::Type::Stationary: {
      Eigen::VectorXd lambda = choice.lambda;
      if (lambda.size() == 0) {
        lambda = Eigen::VectorXd::Constant(w.model.scenario_count(),
                                           1.0 / w.model.scenario_count());
      }
      note = "stationary control for a fixed reference measure";
      return solve_stationary_control(w.ps, w.model, lambda, w.cfg.run.tol);
    }
    case ControlChoice::Type::Portfolio: {
      if (!w.model.investment) {
        throw BadSpec("portfolio control requires the investment model");
      }
      double theta = choice.theta;
      if (theta < 0.0) {
        theta = solve_theta_star(w.ps, *w.model.investment).theta_star;
      }
      note = "portfolio control at theta = " + fmt(theta);
      return optimal_portfolio(w.ps, *w.model.investment, theta);
    }
    case ControlChoice::Type::Default:
      break;
  }
  throw BadSpec("unresolvable control choice");
}

void write_process_csv(const AdaptedProcess& p, const std::filesystem::path& path) {
  CsvBuilder csv({"stage", "node", "component", "value"});
  for (int k = p.first_stage(); k <= p.last_stage(); ++k) {
    for (Index w = 0; w < p.node_count(k); ++w) {
      for (Index i = 0; i < p.rows() * p.cols(); ++i) {
        csv.add_row({std::to_string(k), std::to_string(w), std::to_string(i),
                     fmt(p.value(k, w)(i))});
      }
    }
  }
  csv.write(path);
}

int cmd_simulate(const Workspace& w) {
  std::string note;
  const AdaptedProcess u = resolve_control(w, note);
  check_admissible(w.ps, w.model, u);
  write_process_csv(u, w.out / "control.csv");

  std::string summary;
  summary += "command: simulate\n";
  summary += "control: " + note + "\n";
  summary += "scenarios: " + std::to_string(w.model.scenario_count()) + "\n";
  for (int g = 0; g < w.model.scenario_count(); ++g) {
    const Trajectory traj = simulate_state(w.ps, w.model, g, u);
    const std::string label = sanitize(w.model.gamma_labels[static_cast<size_t>(g)]);
    write_process_csv(traj.state, w.out / ("trajectory_" + label + ".csv"));
    summary += "expected cost[" + w.model.gamma_labels[static_cast<size_t>(g)] +
               "]: " + fmt(scenario_cost(w.ps, w.model, g, u)) + "\n";
  }
  const RobustCost robust = robust_cost(w.ps, w.model, w.set, u);
  summary += "robust cost: " + fmt(robust.value) + " (vertex " +
             std::to_string(robust.argmax_vertex) + ")\n";
  write_file_atomic(w.out / "summary.txt", summary);
  return 0;
}

int cmd_smp_check(const Workspace& w) {
  std::string note;
  const AdaptedProcess u_star = resolve_control(w, note);
  check_admissible(w.ps, w.model, u_star);
  const AdaptedProcess u = perturbed_control(w.ps, w.model, u_star, w.cfg.run.seed);

  CsvBuilder duality({"scenario", "state_side", "control_side", "residual", "relative_residual",
                      "one_step_max"});
  CsvBuilder fd({"scenario", "delta", "quotient", "derivative", "error"});
  double worst_relative = 0.0, worst_one_step = 0.0;
  for (int g = 0; g < w.model.scenario_count(); ++g) {
    const std::string& label = w.model.gamma_labels[static_cast<size_t>(g)];
    const DualityCheck check = duality_residual(w.ps, w.model, g, u_star, u);
    const std::vector<double> steps = one_step_duality_residuals(w.ps, w.model, g, u_star, u);
    const double one_step = steps.empty() ? 0.0 : *std::max_element(steps.begin(), steps.end());
    worst_relative = std::max(worst_relative, check.relative_residual());
    worst_one_step = std::max(worst_one_step, one_step);
    duality.add_row({label, fmt(check.state_side), fmt(check.control_side), fmt(check.residual()),
                     fmt(check.relative_residual()), fmt(one_step)});
    const FdConvergenceReport report =
        fd_convergence_report(w.ps, w.model, g, u_star, u, w.cfg.run.deltas);
    for (const FdConvergenceRow& row : report.rows) {
      fd.add_row({label, fmt(row.delta), fmt(row.quotient), fmt(report.derivative),
                  fmt(row.error)});
    }
  }
  duality.write(w.out / "duality.csv");
  fd.write(w.out / "fd.csv");

  const RobustCost robust = robust_cost(w.ps, w.model, w.set, u_star);
  const Eigen::VectorXd lambda_hat = w.set.vertices[static_cast<size_t>(robust.argmax_vertex)];
  const StationarityReport stat = stationarity_residual(w.ps, w.model, w.set, u_star, lambda_hat);
  CsvBuilder stat_csv({"stage", "node", "component", "gradient", "residual", "bound_state"});
  for (const StationarityEntry& e : stat.entries) {
    stat_csv.add_row({std::to_string(e.stage), std::to_string(e.node),
                      std::to_string(e.component), fmt(e.gradient), fmt(e.residual),
                      std::string(1, e.bound_state)});
  }
  stat_csv.write(w.out / "stationarity.csv");

  const CommonMeasureCertificate cm = find_common_reference_measure(
      w.ps, w.model, w.set, u_star, w.cfg.run.lambda_grid_density, 1e-6, w.cfg.run.directions,
      w.cfg.run.seed);
  std::string cm_text;
  cm_text += "lambda:";
  for (Index i = 0; i < cm.lambda.size(); ++i) cm_text += " " + fmt(cm.lambda(i));
  cm_text += "\ncertified_inf: " + fmt(cm.certified_inf) + "\nface_vertices:";
  for (int v : cm.face_vertices) cm_text += " " + std::to_string(v);
  cm_text += "\n\n" + cm.summary() + "\n";
  write_file_atomic(w.out / "common_measure.txt", cm_text);

  const SufficiencyCertificate suff =
      check_sufficiency(w.ps, w.model, w.set, u_star, cm.lambda, w.cfg.run.tol);
  std::string suff_text;
  switch (suff.status) {
    case SufficiencyStatus::Optimal:
      suff_text += "status: optimal\n";
      break;
    case SufficiencyStatus::NotConvex:
      suff_text += "status: not convex\n";
      break;
    case SufficiencyStatus::StationarityViolated:
      suff_text += "status: stationarity violated\n";
      break;
    case SufficiencyStatus::NotApplicable:
      suff_text += "status: not applicable\n";
      break;
  }
  suff_text += "stationarity_residual: " + fmt(suff.stationarity_residual) + "\n";
  suff_text += "min_cost_curvature: " + fmt(suff.min_cost_curvature) + "\n";
  suff_text += "detail: " + suff.detail + "\n";
  write_file_atomic(w.out / "sufficiency.txt", suff_text);

  const double tol = w.cfg.run.tol;
  const bool duality_ok = worst_relative <= 1e-10;
  const bool one_step_ok = worst_one_step <= 1e-12;
  const bool stat_ok = stat.max_residual <= tol;
  const bool cm_ok = cm.certified_inf >= -tol;
  const bool suff_ok = suff.status == SufficiencyStatus::Optimal;

  std::string summary;
  summary += "command: smp-check\n";
  summary += "control: " + note + "\n";
  summary += check_line("duality relative residual", worst_relative, "<=", 1e-10, duality_ok);
  summary += check_line("one-step duality residual", worst_one_step, "<=", 1e-12, one_step_ok);
  summary += check_line("stationarity residual", stat.max_residual, "<=", tol, stat_ok);
  summary += check_line("certified directional derivative", cm.certified_inf, ">=", -tol, cm_ok);
  summary += std::string(suff_ok ? "[PASS] " : "[FAIL] ") + "sufficiency: " +
             (suff.status == SufficiencyStatus::Optimal ? "optimal" : suff.detail) + "\n";
  const bool ok = duality_ok && one_step_ok && stat_ok && cm_ok && suff_ok;
  summary += std::string("overall: ") + (ok ? "PASS" : "FAIL") + "\n";
  write_file_atomic(w.out / "summary.txt", summary);
  return ok ? 0 : 1;
}

int cmd_invest(const Workspace& w) {
  if (!w.model.investment) {
    throw BadSpec("the invest command needs an investment model");
  }
  const InvestmentSpec& spec = *w.model.investment;

  ThetaSolution sol;
  const ControlChoice& choice = w.cfg.run.control;
  if (choice.type == ControlChoice::Type::Portfolio && choice.theta >= 0.0) {
    sol.theta_star = choice.theta;
    sol.control = optimal_portfolio(w.ps, spec, choice.theta);
    const ValuePair pair = evaluate_value_pair(w.ps, spec, choice.theta);
    sol.y1 = pair.y1;
    sol.y2 = pair.y2;
    sol.robust_value = std::max(pair.y1, pair.y2);
    sol.note = "theta fixed by the configuration, not solved";
  } else {
    sol = solve_theta_star(w.ps, spec);
  }

  CsvBuilder solution({"stage", "node", "component", "u_star", "P1", "P2", "theta_star"});
  for (int k = 0; k < spec.horizon; ++k) {
    const double p1 = closed_form_costate(spec, 0, k);
    const double p2 = closed_form_costate(spec, 1, k);
    for (Index v = 0; v < w.ps.node_count(k); ++v) {
      for (Index i = 0; i < spec.stocks; ++i) {
        solution.add_row({std::to_string(k), std::to_string(v), std::to_string(i),
                          fmt(sol.control.value(k, v)(i)), fmt(p1), fmt(p2),
                          fmt(sol.theta_star)});
      }
    }
  }
  solution.write(w.out / "solution.csv");

  CsvBuilder residual({"theta", "residual", "y1", "y2", "gap"});
  auto add_theta_row = [&](double theta) {
    const ValuePair pair = evaluate_value_pair(w.ps, spec, theta);
    residual.add_row({fmt(theta), fmt(theta_stationarity_residual(w.ps, spec, theta)),
                      fmt(pair.y1), fmt(pair.y2), fmt(pair.gap())});
  };
  for (int i = 0; i <= 10; ++i) add_theta_row(static_cast<double>(i) / 10.0);
  add_theta_row(sol.theta_star);
  residual.write(w.out / "residual.csv");

  const double residual_at_star = theta_stationarity_residual(w.ps, spec, sol.theta_star);
  const double tol = w.cfg.run.tol;
  const bool residual_ok = residual_at_star <= tol;
  bool case_ok = true;
  std::string case_name;
  switch (sol.case_label) {
    case ThetaCase::Case1:
      case_name = "1 (first scenario dominates, theta* = 1)";
      case_ok = sol.y1 - sol.y2 >= -tol;
      break;
    case ThetaCase::Case2:
      case_name = "2 (second scenario dominates, theta* = 0)";
      case_ok = sol.y2 - sol.y1 >= -tol;
      break;
    case ThetaCase::Case3:
      case_name = "3 (interior theta*, scenario values tied)";
      case_ok = std::abs(sol.y1 - sol.y2) <= 1e-6;
      break;
  }
  const bool robust_ok = sol.robust_value == std::max(sol.y1, sol.y2);

  std::string report;
  report += "command: invest\n";
  report += "case: " + case_name + "\n";
  report += "theta_star: " + fmt(sol.theta_star) + "\n";
  report += "y1: " + fmt(sol.y1) + "\n";
  report += "y2: " + fmt(sol.y2) + "\n";
  report += "robust_value: " + fmt(sol.robust_value) + "\n";
  report += "bisection_iterations: " + std::to_string(sol.bisection_iterations) + "\n";
  if (!sol.note.empty()) report += "note: " + sol.note + "\n";
  report += check_line("first-order residual at theta*", residual_at_star, "<=", tol,
                       residual_ok);
  report += std::string(case_ok ? "[PASS] " : "[FAIL] ") + "case consistency\n";
  report += std::string(robust_ok ? "[PASS] " : "[FAIL] ") +
            "robust value equals max(y1, y2)\n";
  const bool ok = residual_ok && case_ok && robust_ok;
  report += std::string("overall: ") + (ok ? "PASS" : "FAIL") + "\n";
  write_file_atomic(w.out / "report.txt", report);
  return ok ? 0 : 1;
}

int cmd_oracle(const Workspace& w) {
  std::string note;
  const AdaptedProcess candidate = resolve_control(w, note);
  check_admissible(w.ps, w.model, candidate);

  int points = 41;
  ControlGrid grid;
  std::string grid_note;
  if (w.cfg.oracle_grid) {
    points = w.cfg.oracle_grid->points;
    if (!w.cfg.oracle_grid->lo.empty()) {
      grid = ControlGrid::linspace(w.model, w.cfg.oracle_grid->lo, w.cfg.oracle_grid->hi, points);
      grid_note = "configured box, " + std::to_string(points) + " points per axis";
    }
  }
  if (grid.values.empty()) {
    grid = ControlGrid::centered(w.model, candidate, 1.0, points);
    grid_note = "candidate-centered radius 1, " + std::to_string(points) + " points per axis";
  }

  const CertificationReport report =
      certify_candidate(w.ps, w.model, w.set, grid, candidate, 1e-6);

  std::string text;
  text += "command: oracle\n";
  text += "control: " + note + "\n";
  text += "grid: " + grid_note + "\n";
  text += "assignments: " + std::to_string(report.assignments) + "\n";
  text += "candidate_value: " + fmt(report.candidate_value) + "\n";
  text += "grid_minimum: " + fmt(report.grid_minimum) + "\n";
  text += "margin: " + fmt(report.margin) + "\n";
  text += check_line("candidate vs grid minimum", report.candidate_value, "<= slack above",
                     report.grid_minimum, report.pass);
  text += std::string("overall: ") + (report.pass ? "PASS" : "FAIL") + "\n";
  write_file_atomic(w.out / "certification.txt", text);
  return report.pass ? 0 : 1;
}

int run_impl(const RunOptions& opt) {
  Workspace w;
  w.cfg = parse_scenario_file(opt.config_path);
  if (opt.seed) w.cfg.run.seed = *opt.seed;
  if (opt.max_paths) {
    if (*opt.max_paths < 1) throw BadSpec("--max-paths must be positive");
    w.cfg.run.max_leaves = *opt.max_paths;
  }
  if (opt.tol) {
    if (!(*opt.tol > 0.0)) throw BadSpec("--tol must be positive");
    w.cfg.run.tol = *opt.tol;
  }
  // Dense kernels here are single threaded; the flag caps whatever Eigen
  // might parallelize so outputs never depend on the machine.
  if (opt.threads) Eigen::setNbThreads(std::max(1, *opt.threads));

  w.ps = build_path_space(w.cfg.noise, w.cfg.run.max_leaves);
  if (w.cfg.lq) {
    w.model = build_lq_model(*w.cfg.lq);
  } else if (w.cfg.investment) {
    w.cfg.investment->noise_dim = w.cfg.noise.dim;
    validate_investment_spec(*w.cfg.investment, w.ps);
    w.model = build_investment_model(*w.cfg.investment);
  } else {
    throw BadSpec("configuration has no model");
  }
  w.set = w.cfg.ambiguity_vertices ? make_ambiguity_set(*w.cfg.ambiguity_vertices)
                                   : full_simplex(w.model.scenario_count());
  if (w.set.gamma_count() != w.model.scenario_count()) {
    throw BadSpec("ambiguity vertices have length " + std::to_string(w.set.gamma_count()) +
                  ", expected " + std::to_string(w.model.scenario_count()));
  }
  w.out = opt.out_dir;
  std::filesystem::create_directories(w.out);

  log(LogLevel::Info, opt.command + " on " + opt.config_path.string());
  if (opt.command == "simulate") return cmd_simulate(w);
  if (opt.command == "smp-check") return cmd_smp_check(w);
  if (opt.command == "invest") return cmd_invest(w);
  if (opt.command == "oracle") return cmd_oracle(w);
  throw BadSpec("unknown command `" + opt.command + "`");
}

}  // namespace

int run_command(const RunOptions& options) {
  try {
    return run_impl(options);
  } catch (const BisectionStalled& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace rsmp
