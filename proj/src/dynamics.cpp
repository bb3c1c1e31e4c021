#include "rsmp/dynamics.hpp"

#include <cmath>
#include <string>

namespace rsmp {

namespace {

void check_control_shape(const PathSpace& ps, const ScenarioModel& model,
                         const AdaptedProcess& u) {
  if (u.first_stage() != 0 || u.last_stage() != model.horizon - 1 ||
      u.rows() != model.control_dim || u.cols() != 1) {
    throw ShapeMismatch("control must be adapted with one value per node at stages 0.." +
                        std::to_string(model.horizon - 1) + " and dimension " +
                        std::to_string(model.control_dim));
  }
  if (ps.horizon() != model.horizon) {
    throw ShapeMismatch("path space horizon does not match the model");
  }
}

AdaptedProcess direction(const AdaptedProcess& u, const AdaptedProcess& u_star) {
  AdaptedProcess d = u;
  for (int k = u.first_stage(); k <= u.last_stage(); ++k) {
    d.stage_data(k) -= u_star.stage_data(k);
  }
  return d;
}

}  // namespace

void check_admissible(const PathSpace& ps, const ScenarioModel& model, const AdaptedProcess& u) {
  check_control_shape(ps, model, u);
  for (int k = 0; k < model.horizon; ++k) {
    const Eigen::VectorXd lo = model.lower_bound(k), hi = model.upper_bound(k);
    const Eigen::MatrixXd& data = u.stage_data(k);
    for (Index w = 0; w < data.cols(); ++w) {
      for (Index i = 0; i < data.rows(); ++i) {
        const double v = data(i, w);
        if (!std::isfinite(v) || v < lo(i) || v > hi(i)) {
          throw InadmissibleControl("control component " + std::to_string(i) + " at stage " +
                                    std::to_string(k) + ", node " + std::to_string(w) +
                                    " is " + std::to_string(v) + ", outside [" +
                                    std::to_string(lo(i)) + ", " + std::to_string(hi(i)) + "]");
        }
      }
    }
  }
}

AdaptedProcess project_into_box(const PathSpace& ps, const ScenarioModel& model,
                                const AdaptedProcess& u, double tol) {
  check_control_shape(ps, model, u);
  AdaptedProcess out = u;
  for (int k = 0; k < model.horizon; ++k) {
    const Eigen::VectorXd lo = model.lower_bound(k), hi = model.upper_bound(k);
    Eigen::MatrixXd& data = out.stage_data(k);
    for (Index w = 0; w < data.cols(); ++w) {
      for (Index i = 0; i < data.rows(); ++i) {
        double& v = data(i, w);
        if (v < lo(i)) {
          if (v < lo(i) - tol) {
            throw InadmissiblePerturbation("perturbed control leaves its box by more than " +
                                           std::to_string(tol));
          }
          v = lo(i);
        } else if (v > hi(i)) {
          if (v > hi(i) + tol) {
            throw InadmissiblePerturbation("perturbed control leaves its box by more than " +
                                           std::to_string(tol));
          }
          v = hi(i);
        }
      }
    }
  }
  return out;
}

Trajectory simulate_state(const PathSpace& ps, const ScenarioModel& model, int gamma,
                          const AdaptedProcess& u) {
  check_admissible(ps, model, u);
  Trajectory traj;
  traj.gamma = gamma;
  traj.control = u;
  traj.state = AdaptedProcess(ps, 0, model.horizon, model.state_dim);
  traj.state.value(0, 0) = model.x0;
  for (int k = 0; k < model.horizon; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const auto [b, sigma] = eval_dynamics(model, gamma, k, traj.state.value(k, w), u.value(k, w));
      for (int a = 0; a < ps.atom_count(k + 1); ++a) {
        traj.state.value(k + 1, ps.child(k, w, a)) = b + sigma * ps.atom_value(k + 1, a);
      }
    }
  }
  return traj;
}

double scenario_cost(const PathSpace& ps, const ScenarioModel& model, int gamma,
                     const AdaptedProcess& u) {
  const Trajectory traj = simulate_state(ps, model, gamma, u);
  double total = 0.0;
  for (int k = 0; k < model.horizon; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      total += ps.node_probability(k, w) *
               eval_running_cost(model, gamma, k, traj.state.value(k, w), u.value(k, w));
    }
  }
  const int N = model.horizon;
  for (Index w = 0; w < ps.node_count(N); ++w) {
    total += ps.node_probability(N, w) * eval_terminal_cost(model, gamma, traj.state.value(N, w));
  }
  return total;
}

Linearization linearize_along(const PathSpace& ps, const ScenarioModel& model, int gamma,
                              const Trajectory& traj) {
  Linearization lin;
  lin.stage_node.resize(static_cast<size_t>(model.horizon));
  for (int k = 0; k < model.horizon; ++k) {
    auto& row = lin.stage_node[static_cast<size_t>(k)];
    row.reserve(static_cast<size_t>(ps.node_count(k)));
    for (Index w = 0; w < ps.node_count(k); ++w) {
      row.push_back(eval_derivatives(model, gamma, k, traj.state.value(k, w),
                                     traj.control.value(k, w)));
    }
  }
  lin.terminal.reserve(static_cast<size_t>(ps.leaf_count()));
  for (Index w = 0; w < ps.leaf_count(); ++w) {
    lin.terminal.push_back(eval_terminal_gradient(model, gamma,
                                                  traj.state.value(model.horizon, w)));
  }
  return lin;
}

namespace {

// One-step state map M(k) and direction term T(k) on the edge (node, atom):
//   M = b_x + sum_i sigma^i_x B^i(k+1),  T = (b_u + sum_i sigma^i_u B^i(k+1)) u_hat.
Eigen::MatrixXd edge_map(const DerivativeBundle& dv, const Eigen::VectorXd& noise) {
  Eigen::MatrixXd M = dv.drift_dx;
  for (Index i = 0; i < noise.size(); ++i) M += dv.diffusion_dx[static_cast<size_t>(i)] * noise(i);
  return M;
}

Eigen::MatrixXd edge_control_map(const DerivativeBundle& dv, const Eigen::VectorXd& noise) {
  Eigen::MatrixXd G = dv.drift_du;
  for (Index i = 0; i < noise.size(); ++i) G += dv.diffusion_du[static_cast<size_t>(i)] * noise(i);
  return G;
}

}  // namespace

AdaptedProcess solve_variational_recursive(const PathSpace& ps, const ScenarioModel& model,
                                           int gamma, const AdaptedProcess& u_star,
                                           const AdaptedProcess& u_hat) {
  check_control_shape(ps, model, u_star);
  check_control_shape(ps, model, u_hat);
  const Trajectory traj = simulate_state(ps, model, gamma, u_star);
  const Linearization lin = linearize_along(ps, model, gamma, traj);
  AdaptedProcess xbar(ps, 0, model.horizon, model.state_dim);
  for (int k = 0; k < model.horizon; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const DerivativeBundle& dv = lin.stage_node[static_cast<size_t>(k)][static_cast<size_t>(w)];
      for (int a = 0; a < ps.atom_count(k + 1); ++a) {
        const Eigen::VectorXd& noise = ps.atom_value(k + 1, a);
        xbar.value(k + 1, ps.child(k, w, a)) =
            edge_map(dv, noise) * xbar.value(k, w) +
            edge_control_map(dv, noise) * u_hat.value(k, w);
      }
    }
  }
  return xbar;
}

AdaptedProcess solve_variational_explicit(const PathSpace& ps, const ScenarioModel& model,
                                          int gamma, const AdaptedProcess& u_star,
                                          const AdaptedProcess& u_hat) {
  check_control_shape(ps, model, u_star);
  check_control_shape(ps, model, u_hat);
  const Trajectory traj = simulate_state(ps, model, gamma, u_star);
  const Linearization lin = linearize_along(ps, model, gamma, traj);
  const int N = model.horizon;
  AdaptedProcess xbar(ps, 0, N, model.state_dim);
  // Stage k value at a node: T(k-1) plus, for i = k-2..0, the product
  // M(k-1) M(k-2) ... M(i+1) applied to T(i), all read off the node's ancestor
  // path. The partial products are accumulated right to left.
  for (int k = 1; k <= N; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      std::vector<Eigen::MatrixXd> M(static_cast<size_t>(k));
      std::vector<Eigen::VectorXd> T(static_cast<size_t>(k));
      Index node = w;
      for (int j = k - 1; j >= 0; --j) {
        const int atom = ps.incoming_atom(j + 1, node);
        node = ps.parent(j + 1, node);
        const Eigen::VectorXd& noise = ps.atom_value(j + 1, atom);
        const DerivativeBundle& dv =
            lin.stage_node[static_cast<size_t>(j)][static_cast<size_t>(node)];
        M[static_cast<size_t>(j)] = edge_map(dv, noise);
        T[static_cast<size_t>(j)] = edge_control_map(dv, noise) * u_hat.value(j, node);
      }
      Eigen::VectorXd value = T[static_cast<size_t>(k - 1)];
      Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(model.state_dim, model.state_dim);
      for (int i = k - 2; i >= 0; --i) {
        prod = prod * M[static_cast<size_t>(i + 1)];
        value += prod * T[static_cast<size_t>(i)];
      }
      xbar.value(k, w) = value;
    }
  }
  return xbar;
}

double directional_cost_derivative(const PathSpace& ps, const ScenarioModel& model, int gamma,
                                   const AdaptedProcess& u_star, const AdaptedProcess& u) {
  check_control_shape(ps, model, u_star);
  check_control_shape(ps, model, u);
  const AdaptedProcess u_hat = direction(u, u_star);
  const AdaptedProcess xbar = solve_variational_recursive(ps, model, gamma, u_star, u_hat);
  const Trajectory traj = simulate_state(ps, model, gamma, u_star);
  const Linearization lin = linearize_along(ps, model, gamma, traj);
  double total = 0.0;
  for (int k = 0; k < model.horizon; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const DerivativeBundle& dv = lin.stage_node[static_cast<size_t>(k)][static_cast<size_t>(w)];
      total += ps.node_probability(k, w) *
               (dv.cost_dx * xbar.value(k, w) + dv.cost_du * u_hat.value(k, w)).value();
    }
  }
  const int N = model.horizon;
  for (Index w = 0; w < ps.leaf_count(); ++w) {
    total += ps.node_probability(N, w) *
             (lin.terminal[static_cast<size_t>(w)] * xbar.value(N, w)).value();
  }
  return total;
}

FdConvergenceReport fd_convergence_report(const PathSpace& ps, const ScenarioModel& model,
                                          int gamma, const AdaptedProcess& u_star,
                                          const AdaptedProcess& u,
                                          const std::vector<double>& deltas) {
  FdConvergenceReport report;
  report.derivative = directional_cost_derivative(ps, model, gamma, u_star, u);
  const double base = scenario_cost(ps, model, gamma, u_star);
  const AdaptedProcess u_hat = direction(u, u_star);
  for (double delta : deltas) {
    if (!(delta > 0.0)) throw BadSpec("finite-difference step sizes must be positive");
    AdaptedProcess shifted = u_star;
    for (int k = 0; k < model.horizon; ++k) {
      shifted.stage_data(k) += delta * u_hat.stage_data(k);
    }
    shifted = project_into_box(ps, model, shifted);
    const double value = scenario_cost(ps, model, gamma, shifted);
    FdConvergenceRow row;
    row.delta = delta;
    row.quotient = (value - base) / delta;
    row.error = std::abs(row.quotient - report.derivative);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace rsmp
