#include "rsmp/adjoint.hpp"

#include <cmath>

namespace rsmp {

namespace {

void check_control_pair(const ScenarioModel& model, const AdaptedProcess& u_star,
                        const AdaptedProcess& u) {
  for (const AdaptedProcess* p : {&u_star, &u}) {
    if (p->first_stage() != 0 || p->last_stage() != model.horizon - 1 ||
        p->rows() != model.control_dim || p->cols() != 1) {
      throw ShapeMismatch("controls must cover stages 0.." + std::to_string(model.horizon - 1) +
                          " with dimension " + std::to_string(model.control_dim));
    }
  }
}

// Stage-(k+1) gradient expression whose conditional expectation (plain and
// against B(k+1)') yields P(k) and Q(k):
//   Delta(k+1) = b_x' P(k+1) + sum_i (sigma^i_x)' Q^i(k+1) + f_x'
// with the convention Delta(N) = phi_x'.
Eigen::VectorXd gradient_term(const DerivativeBundle& dv, const Eigen::VectorXd& P,
                              const Eigen::Map<const Eigen::MatrixXd>& Q) {
  Eigen::VectorXd g = dv.drift_dx.transpose() * P + dv.cost_dx.transpose();
  for (size_t i = 0; i < dv.diffusion_dx.size(); ++i) {
    g += dv.diffusion_dx[i].transpose() * Q.col(static_cast<Index>(i));
  }
  return g;
}

}  // namespace

AdjointPair solve_adjoint_recursive(const PathSpace& ps, const ScenarioModel& model, int gamma,
                                    const AdaptedProcess& u_star) {
  const Trajectory traj = simulate_state(ps, model, gamma, u_star);
  const Linearization lin = linearize_along(ps, model, gamma, traj);
  const int N = model.horizon;
  const Index n = model.state_dim, d = model.noise_dim;

  AdjointPair adj;
  adj.gamma = gamma;
  adj.P = AdaptedProcess(ps, 0, N - 1, n);
  adj.Q = AdaptedProcess(ps, 0, N - 1, n, d);

  for (Index w = 0; w < ps.node_count(N - 1); ++w) {
    Eigen::VectorXd P = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, d);
    for (int a = 0; a < ps.atom_count(N); ++a) {
      const Index child = ps.child(N - 1, w, a);
      const Eigen::VectorXd grad = lin.terminal[static_cast<size_t>(child)].transpose();
      const double p = ps.atom_probability(N, a);
      P += p * grad;
      Q += p * grad * ps.atom_value(N, a).transpose();
    }
    adj.P.value(N - 1, w) = P;
    adj.Q.set_matrix_value(N - 1, w, Q);
  }

  for (int k = N - 2; k >= 0; --k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      Eigen::VectorXd P = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, d);
      for (int a = 0; a < ps.atom_count(k + 1); ++a) {
        const Index child = ps.child(k, w, a);
        const DerivativeBundle& dv =
            lin.stage_node[static_cast<size_t>(k + 1)][static_cast<size_t>(child)];
        const Eigen::VectorXd g =
            gradient_term(dv, adj.P.value(k + 1, child), adj.Q.matrix_value(k + 1, child));
        const double p = ps.atom_probability(k + 1, a);
        P += p * g;
        Q += p * g * ps.atom_value(k + 1, a).transpose();
      }
      adj.P.value(k, w) = P;
      adj.Q.set_matrix_value(k, w, Q);
    }
  }
  return adj;
}

AdjointPair solve_adjoint_explicit(const PathSpace& ps, const ScenarioModel& model, int gamma,
                                   const AdaptedProcess& u_star) {
  const Trajectory traj = simulate_state(ps, model, gamma, u_star);
  const Linearization lin = linearize_along(ps, model, gamma, traj);
  const int N = model.horizon;
  const Index n = model.state_dim, d = model.noise_dim;

  AdjointPair adj;
  adj.gamma = gamma;
  adj.P = AdaptedProcess(ps, 0, N - 1, n);
  adj.Q = AdaptedProcess(ps, 0, N - 1, n, d);

  // Per leaf, xi(k) stacks every stage gradient from k+1 to N transported back
  // by transposed one-step maps:
  //   xi(N-1) = phi_x',  xi(k) = f_x(k+1)' + M(k+1)' xi(k+1).
  // P(k) and Q(k) then need only one conditional expectation from the leaves.
  const Index leaves = ps.leaf_count();
  std::vector<Eigen::VectorXd> xi(static_cast<size_t>(leaves));
  for (Index l = 0; l < leaves; ++l) xi[static_cast<size_t>(l)] = lin.terminal[static_cast<size_t>(l)].transpose();

  for (int k = N - 1; k >= 0; --k) {
    // Conditional expectation of xi(k) (and of xi(k) B(k+1)') over the contiguous
    // leaf block under each stage-k node.
    Index block = 1;
    for (int j = k + 1; j <= N; ++j) block *= ps.atom_count(j);
    for (Index w = 0; w < ps.node_count(k); ++w) {
      Eigen::VectorXd P = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, d);
      const double pw = ps.node_probability(k, w);
      for (Index l = w * block; l < (w + 1) * block; ++l) {
        const double cond = ps.node_probability(N, l) / pw;
        const Eigen::VectorXd& v = xi[static_cast<size_t>(l)];
        const int atom = ps.incoming_atom(k + 1, ps.ancestor(N, l, k + 1));
        P += cond * v;
        Q += cond * v * ps.atom_value(k + 1, atom).transpose();
      }
      adj.P.value(k, w) = P;
      adj.Q.set_matrix_value(k, w, Q);
    }
    if (k == 0) break;
    // xi(k-1) = f_x(k)' + M(k)' xi(k), with M(k) built from the stage-k node on
    // the leaf's path and the step-(k+1) noise on that path.
    for (Index l = 0; l < leaves; ++l) {
      const Index node = ps.ancestor(N, l, k);
      const int atom = ps.incoming_atom(k + 1, ps.ancestor(N, l, k + 1));
      const DerivativeBundle& dv =
          lin.stage_node[static_cast<size_t>(k)][static_cast<size_t>(node)];
      Eigen::MatrixXd M = dv.drift_dx;
      const Eigen::VectorXd& noise = ps.atom_value(k + 1, atom);
      for (Index i = 0; i < d; ++i) M += dv.diffusion_dx[static_cast<size_t>(i)] * noise(i);
      xi[static_cast<size_t>(l)] =
          dv.cost_dx.transpose() + M.transpose() * xi[static_cast<size_t>(l)];
    }
  }
  return adj;
}

double hamiltonian_eval(const ScenarioModel& model, int gamma, int k, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& P,
                        const Eigen::MatrixXd& Q) {
  const auto [b, sigma] = eval_dynamics(model, gamma, k, x, u);
  if (P.size() != model.state_dim || Q.rows() != model.state_dim ||
      Q.cols() != model.noise_dim) {
    throw ShapeMismatch("adjoint values have wrong dimensions");
  }
  return eval_running_cost(model, gamma, k, x, u) + P.dot(b) +
         (Q.array() * sigma.array()).sum();
}

Eigen::VectorXd hamiltonian_u_gradient(const ScenarioModel& model, int gamma, int k,
                                       const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& P, const Eigen::MatrixXd& Q) {
  if (P.size() != model.state_dim || Q.rows() != model.state_dim ||
      Q.cols() != model.noise_dim) {
    throw ShapeMismatch("adjoint values have wrong dimensions");
  }
  const DerivativeBundle dv = eval_derivatives(model, gamma, k, x, u);
  Eigen::VectorXd g = dv.cost_du.transpose() + dv.drift_du.transpose() * P;
  for (Index i = 0; i < model.noise_dim; ++i) {
    g += dv.diffusion_du[static_cast<size_t>(i)].transpose() * Q.col(i);
  }
  return g;
}

DualityCheck duality_residual(const PathSpace& ps, const ScenarioModel& model, int gamma,
                              const AdaptedProcess& u_star, const AdaptedProcess& u) {
  check_control_pair(model, u_star, u);
  AdaptedProcess u_hat = u;
  for (int k = u.first_stage(); k <= u.last_stage(); ++k) {
    u_hat.stage_data(k) -= u_star.stage_data(k);
  }
  const AdaptedProcess xbar = solve_variational_recursive(ps, model, gamma, u_star, u_hat);
  const AdjointPair adj = solve_adjoint_recursive(ps, model, gamma, u_star);
  const Trajectory traj = simulate_state(ps, model, gamma, u_star);
  const Linearization lin = linearize_along(ps, model, gamma, traj);
  const int N = model.horizon;

  DualityCheck check;
  for (int k = 0; k < N; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const DerivativeBundle& dv = lin.stage_node[static_cast<size_t>(k)][static_cast<size_t>(w)];
      check.state_side +=
          ps.node_probability(k, w) * (dv.cost_dx * xbar.value(k, w)).value();
      Eigen::RowVectorXd row = adj.P.value(k, w).transpose() * dv.drift_du;
      const auto Q = adj.Q.matrix_value(k, w);
      for (Index i = 0; i < model.noise_dim; ++i) {
        row += Q.col(i).transpose() * dv.diffusion_du[static_cast<size_t>(i)];
      }
      check.control_side += ps.node_probability(k, w) * (row * u_hat.value(k, w)).value();
    }
  }
  for (Index w = 0; w < ps.leaf_count(); ++w) {
    check.state_side += ps.node_probability(N, w) *
                        (lin.terminal[static_cast<size_t>(w)] * xbar.value(N, w)).value();
  }
  return check;
}

std::vector<double> one_step_duality_residuals(const PathSpace& ps, const ScenarioModel& model,
                                               int gamma, const AdaptedProcess& u_star,
                                               const AdaptedProcess& u) {
  check_control_pair(model, u_star, u);
  AdaptedProcess u_hat = u;
  for (int k = u.first_stage(); k <= u.last_stage(); ++k) {
    u_hat.stage_data(k) -= u_star.stage_data(k);
  }
  const AdaptedProcess xbar = solve_variational_recursive(ps, model, gamma, u_star, u_hat);
  const AdjointPair adj = solve_adjoint_recursive(ps, model, gamma, u_star);
  const Trajectory traj = simulate_state(ps, model, gamma, u_star);
  const Linearization lin = linearize_along(ps, model, gamma, traj);
  const int N = model.horizon;

  std::vector<double> residuals(static_cast<size_t>(N), 0.0);
  for (int k = 0; k < N; ++k) {
    double worst = 0.0;
    for (Index w = 0; w < ps.node_count(k); ++w) {
      double lhs = 0.0;
      for (int a = 0; a < ps.atom_count(k + 1); ++a) {
        const Index child = ps.child(k, w, a);
        Eigen::RowVectorXd g;
        if (k + 1 == N) {
          g = lin.terminal[static_cast<size_t>(child)];
        } else {
          const DerivativeBundle& dvc =
              lin.stage_node[static_cast<size_t>(k + 1)][static_cast<size_t>(child)];
          g = adj.P.value(k + 1, child).transpose() * dvc.drift_dx + dvc.cost_dx;
          const auto Qc = adj.Q.matrix_value(k + 1, child);
          for (Index i = 0; i < model.noise_dim; ++i) {
            g += Qc.col(i).transpose() * dvc.diffusion_dx[static_cast<size_t>(i)];
          }
        }
        lhs += ps.atom_probability(k + 1, a) * (g * xbar.value(k + 1, child)).value();
      }
      const DerivativeBundle& dv = lin.stage_node[static_cast<size_t>(k)][static_cast<size_t>(w)];
      Eigen::RowVectorXd x_row = adj.P.value(k, w).transpose() * dv.drift_dx;
      Eigen::RowVectorXd u_row = adj.P.value(k, w).transpose() * dv.drift_du;
      const auto Q = adj.Q.matrix_value(k, w);
      for (Index i = 0; i < model.noise_dim; ++i) {
        x_row += Q.col(i).transpose() * dv.diffusion_dx[static_cast<size_t>(i)];
        u_row += Q.col(i).transpose() * dv.diffusion_du[static_cast<size_t>(i)];
      }
      const double rhs =
          (x_row * xbar.value(k, w)).value() + (u_row * u_hat.value(k, w)).value();
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    residuals[static_cast<size_t>(k)] = worst;
  }
  return residuals;
}

}  // namespace rsmp
