#include "rsmp/investment.hpp"

#include <cmath>

namespace rsmp {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw BadSpec(msg);
}

double compounded_rate(const InvestmentSpec& spec, int from_stage) {
  double prod = 1.0;
  for (int i = from_stage; i < spec.horizon; ++i) prod *= 1.0 + spec.rate[static_cast<size_t>(i)];
  return prod;
}

void check_control(const PathSpace& ps, const InvestmentSpec& spec, const AdaptedProcess& u) {
  if (u.first_stage() != 0 || u.last_stage() != spec.horizon - 1 || u.rows() != spec.stocks ||
      u.cols() != 1) {
    throw ShapeMismatch("portfolio control must cover stages 0.." +
                        std::to_string(spec.horizon - 1) + " with one weight per stock");
  }
  if (ps.horizon() != spec.horizon) throw ShapeMismatch("tree horizon does not match the spec");
}

}  // namespace

void validate_investment_spec(const InvestmentSpec& spec, const PathSpace& ps) {
  const Index m = spec.stocks, d = spec.noise_dim;
  require(spec.horizon >= 1, "horizon must be at least 1");
  require(m >= 1 && d >= 1, "stock and noise dimensions must be positive");
  require(ps.horizon() == spec.horizon, "tree horizon does not match the spec");
  require(ps.dim() == d, "tree noise dimension does not match the spec");
  require(ps.spec().standardized, "the noise must be standardized (zero mean, unit second moment)");
  require(spec.x0 > 0.0, "initial wealth must be positive");
  require(spec.rate.size() == static_cast<size_t>(spec.horizon), "rate must cover every stage");
  for (double e : spec.rate) require(e > 0.0, "interest rates must be positive");
  require(spec.H[0] > 0.0 && spec.H[1] > 0.0, "terminal reward weights must be positive");
  require(spec.psi.size() == static_cast<size_t>(spec.horizon),
          "benchmark must cover every stage");
  for (const auto& p : spec.psi) require(p.size() == m, "benchmark has wrong dimension");

  auto check_pd = [&](const Eigen::MatrixXd& g, const std::string& where) {
    require(g.rows() == m && g.cols() == m, where + " must be m x m");
    require((g - g.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12, where + " must be symmetric");
    const double eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff();
    require(eig > 0.0, where + " must be positive definite");
  };
  for (int g = 0; g < 2; ++g) {
    const auto gi = static_cast<size_t>(g);
    const std::string who = "scenario " + std::to_string(g + 1);
    require(spec.mu[gi].size() == static_cast<size_t>(spec.horizon),
            who + ": mu must cover every stage");
    require(spec.beta[gi].size() == static_cast<size_t>(spec.horizon),
            who + ": beta must cover every stage");
    require(spec.G[gi].size() == static_cast<size_t>(spec.horizon),
            who + ": G must cover every stage");
    for (int k = 0; k < spec.horizon; ++k) {
      const auto ki = static_cast<size_t>(k);
      require(spec.mu[gi][ki].size() == m, who + ": mu has wrong dimension");
      require(spec.beta[gi][ki].rows() == m && spec.beta[gi][ki].cols() == d,
              who + ": beta must be m x d");
      check_pd(spec.G[gi][ki], who + ": G");
    }
    auto check_nodes = [&](size_t stages, const std::string& what) {
      require(stages == static_cast<size_t>(spec.horizon),
              who + ": per-node " + what + " must cover every stage");
    };
    if (!spec.mu_nodes[gi].empty()) {
      check_nodes(spec.mu_nodes[gi].size(), "mu");
      for (int k = 0; k < spec.horizon; ++k) {
        const auto& row = spec.mu_nodes[gi][static_cast<size_t>(k)];
        require(row.size() == static_cast<size_t>(ps.node_count(k)),
                who + ": per-node mu has wrong node count");
        for (const auto& v : row) require(v.size() == m, who + ": per-node mu has wrong dimension");
      }
    }
    if (!spec.beta_nodes[gi].empty()) {
      check_nodes(spec.beta_nodes[gi].size(), "beta");
      for (int k = 0; k < spec.horizon; ++k) {
        const auto& row = spec.beta_nodes[gi][static_cast<size_t>(k)];
        require(row.size() == static_cast<size_t>(ps.node_count(k)),
                who + ": per-node beta has wrong node count");
        for (const auto& b : row) {
          require(b.rows() == m && b.cols() == d, who + ": per-node beta must be m x d");
        }
      }
    }
    if (!spec.G_nodes[gi].empty()) {
      check_nodes(spec.G_nodes[gi].size(), "G");
      for (int k = 0; k < spec.horizon; ++k) {
        const auto& row = spec.G_nodes[gi][static_cast<size_t>(k)];
        require(row.size() == static_cast<size_t>(ps.node_count(k)),
                who + ": per-node G has wrong node count");
        for (const auto& g2 : row) check_pd(g2, who + ": per-node G");
      }
    }
  }
  if (!spec.psi_nodes.empty()) {
    require(spec.psi_nodes.size() == static_cast<size_t>(spec.horizon),
            "per-node benchmark must cover every stage");
    for (int k = 0; k < spec.horizon; ++k) {
      const auto& row = spec.psi_nodes[static_cast<size_t>(k)];
      require(row.size() == static_cast<size_t>(ps.node_count(k)),
              "per-node benchmark has wrong node count");
      for (const auto& v : row) require(v.size() == m, "per-node benchmark has wrong dimension");
    }
  }
}

ScenarioModel build_investment_model(const InvestmentSpec& spec) {
  require(spec.stage_deterministic(),
          "per-node coefficient tables do not fit the (stage, state, control) evaluator "
          "interface; use the direct portfolio routines for them");
  require(spec.horizon >= 1 && spec.stocks >= 1 && spec.noise_dim >= 1,
          "dimensions must be positive");

  ScenarioModel model;
  model.gamma_labels = {"1", "2"};
  model.state_dim = 1;
  model.control_dim = spec.stocks;
  model.noise_dim = spec.noise_dim;
  model.horizon = spec.horizon;
  model.x0 = Eigen::VectorXd::Constant(1, spec.x0);
  model.family = ModelFamily::Investment;
  auto shared = std::make_shared<const InvestmentSpec>(spec);
  model.investment = shared;

  for (int g = 0; g < 2; ++g) {
    ScenarioCoefficients co;
    co.drift = [shared, g](int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
      const double e = shared->rate[static_cast<size_t>(k)];
      return Eigen::VectorXd(Eigen::VectorXd::Constant(
          1, (1.0 + e) * x(0) + shared->excess_return(g, k, 0).dot(u)));
    };
    co.diffusion = [shared, g](int k, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
      return Eigen::MatrixXd(u.transpose() * shared->beta_at(g, k, 0));
    };
    co.running_cost = [shared, g](int k, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
      const Eigen::VectorXd dev = u - shared->psi_at(k, 0);
      return 0.5 * dev.dot(shared->tracking_weight(g, k, 0) * dev);
    };
    co.terminal_cost = [shared, g](const Eigen::VectorXd& x) {
      return -shared->H[static_cast<size_t>(g)] * x(0);
    };
    co.derivatives = [shared, g](int k, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
      const Index d = shared->noise_dim;
      DerivativeBundle bundle;
      bundle.drift_dx = Eigen::MatrixXd::Constant(1, 1, 1.0 + shared->rate[static_cast<size_t>(k)]);
      bundle.drift_du = shared->excess_return(g, k, 0).transpose();
      const Eigen::MatrixXd& beta = shared->beta_at(g, k, 0);
      bundle.diffusion_dx.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(1, 1));
      bundle.diffusion_du.reserve(static_cast<size_t>(d));
      for (Index j = 0; j < d; ++j) bundle.diffusion_du.push_back(beta.col(j).transpose());
      bundle.cost_dx = Eigen::RowVectorXd::Zero(1);
      bundle.cost_du =
          ((u - shared->psi_at(k, 0)).transpose() * shared->tracking_weight(g, k, 0));
      return bundle;
    };
    co.terminal_gradient = [shared, g](const Eigen::VectorXd&) {
      return Eigen::RowVectorXd::Constant(1, -shared->H[static_cast<size_t>(g)]);
    };
    model.scenarios.push_back(std::move(co));
  }
  return model;
}

double closed_form_costate(const InvestmentSpec& spec, int gamma, int k) {
  if (gamma < 0 || gamma > 1) throw BadSpec("scenario index must be 0 or 1");
  if (k < 0 || k >= spec.horizon) throw StageOutOfRange("costate stage out of range");
  return -spec.H[static_cast<size_t>(gamma)] * compounded_rate(spec, k + 1);
}

AdjointPair closed_form_adjoint(const PathSpace& ps, const InvestmentSpec& spec, int gamma) {
  validate_investment_spec(spec, ps);
  AdjointPair adj;
  adj.gamma = gamma;
  adj.P = AdaptedProcess(ps, 0, spec.horizon - 1, 1);
  adj.Q = AdaptedProcess(ps, 0, spec.horizon - 1, 1, spec.noise_dim);
  for (int k = 0; k < spec.horizon; ++k) {
    adj.P.stage_data(k).setConstant(closed_form_costate(spec, gamma, k));
  }
  return adj;
}

AdaptedProcess optimal_portfolio(const PathSpace& ps, const InvestmentSpec& spec, double theta) {
  validate_investment_spec(spec, ps);
  if (theta < 0.0 || theta > 1.0) throw BadSpec("theta must lie in [0, 1]");
  AdaptedProcess u(ps, 0, spec.horizon - 1, spec.stocks);
  for (int k = 0; k < spec.horizon; ++k) {
    const double compounding = compounded_rate(spec, k + 1);
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const Eigen::MatrixXd mixed_weight = theta * spec.tracking_weight(0, k, w) +
                                           (1.0 - theta) * spec.tracking_weight(1, k, w);
      const Eigen::VectorXd tilt = (theta * spec.H[0] * spec.excess_return(0, k, w) +
                                    (1.0 - theta) * spec.H[1] * spec.excess_return(1, k, w)) *
                                   compounding;
      u.value(k, w) = spec.psi_at(k, w) + mixed_weight.ldlt().solve(tilt);
    }
  }
  return u;
}

AdaptedProcess simulate_wealth(const PathSpace& ps, const InvestmentSpec& spec, int gamma,
                               const AdaptedProcess& u) {
  validate_investment_spec(spec, ps);
  check_control(ps, spec, u);
  AdaptedProcess x(ps, 0, spec.horizon, 1);
  x.value(0, 0)(0) = spec.x0;
  for (int k = 0; k < spec.horizon; ++k) {
    const double e = spec.rate[static_cast<size_t>(k)];
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const double drift = (1.0 + e) * x.value(k, w)(0) +
                           spec.excess_return(gamma, k, w).dot(u.value(k, w));
      const Eigen::RowVectorXd vol = u.value(k, w).transpose() * spec.beta_at(gamma, k, w);
      for (int a = 0; a < ps.atom_count(k + 1); ++a) {
        x.value(k + 1, ps.child(k, w, a))(0) = drift + vol.dot(ps.atom_value(k + 1, a));
      }
    }
  }
  return x;
}

double investment_scenario_value(const PathSpace& ps, const InvestmentSpec& spec, int gamma,
                                 const AdaptedProcess& u) {
  const AdaptedProcess x = simulate_wealth(ps, spec, gamma, u);
  double total = 0.0;
  for (int k = 0; k < spec.horizon; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const Eigen::VectorXd dev = u.value(k, w) - spec.psi_at(k, w);
      total += ps.node_probability(k, w) * 0.5 *
               dev.dot(spec.tracking_weight(gamma, k, w) * dev);
    }
  }
  const int N = spec.horizon;
  for (Index w = 0; w < ps.node_count(N); ++w) {
    total -= ps.node_probability(N, w) * spec.H[static_cast<size_t>(gamma)] * x.value(N, w)(0);
  }
  return total;
}

ValuePair evaluate_value_pair(const PathSpace& ps, const InvestmentSpec& spec, double theta) {
  const AdaptedProcess u = optimal_portfolio(ps, spec, theta);
  ValuePair pair;
  pair.y1 = investment_scenario_value(ps, spec, 0, u);
  pair.y2 = investment_scenario_value(ps, spec, 1, u);
  return pair;
}

double theta_stationarity_residual(const PathSpace& ps, const InvestmentSpec& spec, double theta) {
  const AdaptedProcess u = optimal_portfolio(ps, spec, theta);
  double worst = 0.0;
  for (int k = 0; k < spec.horizon; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      Eigen::VectorXd residual =
          theta * spec.excess_return(0, k, w) * closed_form_costate(spec, 0, k) +
          (1.0 - theta) * spec.excess_return(1, k, w) * closed_form_costate(spec, 1, k);
      const Eigen::MatrixXd mixed_weight = theta * spec.tracking_weight(0, k, w) +
                                           (1.0 - theta) * spec.tracking_weight(1, k, w);
      residual += mixed_weight * (u.value(k, w) - spec.psi_at(k, w));
      worst = std::max(worst, residual.lpNorm<Eigen::Infinity>());
    }
  }
  return worst;
}

ThetaSolution solve_theta_star(const PathSpace& ps, const InvestmentSpec& spec, double theta_tol,
                               double gap_tol, int max_iterations) {
  validate_investment_spec(spec, ps);
  ThetaSolution sol;
  auto finish = [&](double theta, ThetaCase label, int iterations, const std::string& note) {
    sol.theta_star = theta;
    sol.case_label = label;
    sol.bisection_iterations = iterations;
    sol.control = optimal_portfolio(ps, spec, theta);
    const ValuePair pair = evaluate_value_pair(ps, spec, theta);
    sol.y1 = pair.y1;
    sol.y2 = pair.y2;
    sol.robust_value = std::max(pair.y1, pair.y2);
    sol.note = note;
    return sol;
  };

  const double gap_at_1 = evaluate_value_pair(ps, spec, 1.0).gap();
  if (gap_at_1 >= 0.0) {
    return finish(1.0, ThetaCase::Case1, 0,
                  "the first scenario dominates under its own optimizer");
  }
  const double gap_at_0 = evaluate_value_pair(ps, spec, 0.0).gap();
  if (gap_at_0 <= 0.0) {
    return finish(0.0, ThetaCase::Case2, 0,
                  "the second scenario dominates under its own optimizer");
  }

  // gap(0) > 0 > gap(1); the gap is continuous in theta, so a sign change
  // exists. Bisection keeps the bracket; any root certifies the minimax value
  // through the mixed-value identity, so uniqueness is not needed.
  double lo = 0.0, hi = 1.0;
  int iterations = 0;
  while (hi - lo > theta_tol && iterations < max_iterations) {
    const double mid = 0.5 * (lo + hi);
    const double gap = evaluate_value_pair(ps, spec, mid).gap();
    if (gap > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++iterations;
  }
  const double theta = 0.5 * (lo + hi);
  const double final_gap = evaluate_value_pair(ps, spec, theta).gap();
  if (std::abs(final_gap) > gap_tol) {
    throw BisectionStalled("value gap " + std::to_string(final_gap) + " still exceeds " +
                           std::to_string(gap_tol) + " after " + std::to_string(iterations) +
                           " bisection steps");
  }
  return finish(theta, ThetaCase::Case3, iterations,
                "interior root located by bisection; the mixed-value identity certifies the "
                "minimax value for any root of the gap");
}

}  // namespace rsmp
