#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rsmp/model.hpp"
#include "rsmp/path_space.hpp"

namespace rsmp {

// State path of one scenario under one adapted control.
struct Trajectory {
  int gamma = 0;
  AdaptedProcess state;    // stages 0..N, dim n
  AdaptedProcess control;  // stages 0..N-1, dim m (the control it came from)
};

// Throws InadmissibleControl when some node value leaves its stage box.
void check_admissible(const PathSpace& ps, const ScenarioModel& model, const AdaptedProcess& u);

// Clamps values within `tol` outside their box back onto the boundary; larger
// violations still throw. Used to absorb roundoff from control perturbations.
AdaptedProcess project_into_box(const PathSpace& ps, const ScenarioModel& model,
                                const AdaptedProcess& u, double tol = 1e-14);

// Rolls x(child) = b(k, x(node), u(node)) + sigma(k, x(node), u(node)) B(k+1)
// over the tree from x(0) = x0.
Trajectory simulate_state(const PathSpace& ps, const ScenarioModel& model, int gamma,
                          const AdaptedProcess& u);

// E[sum_k f(k, x(k), u(k)) + phi(x(N))] for one scenario.
double scenario_cost(const PathSpace& ps, const ScenarioModel& model, int gamma,
                     const AdaptedProcess& u);

// Derivatives of one scenario along a state/control pair: per-node first-order
// bundles at stages 0..N-1 and terminal cost gradients at the leaves.
struct Linearization {
  std::vector<std::vector<DerivativeBundle>> stage_node;  // [k][node]
  std::vector<Eigen::RowVectorXd> terminal;               // [leaf]
};

Linearization linearize_along(const PathSpace& ps, const ScenarioModel& model, int gamma,
                              const Trajectory& traj);

// First variation of the state in direction u_hat around (x*, u*): the linear
// recursion driven by the dynamics derivatives along the nominal pair.
AdaptedProcess solve_variational_recursive(const PathSpace& ps, const ScenarioModel& model,
                                           int gamma, const AdaptedProcess& u_star,
                                           const AdaptedProcess& u_hat);

// Same object through the summed product formula: per node, the direction
// terms T(i) propagated by descending products of the one-step maps M(j).
AdaptedProcess solve_variational_explicit(const PathSpace& ps, const ScenarioModel& model,
                                          int gamma, const AdaptedProcess& u_star,
                                          const AdaptedProcess& u_hat);

// Gateaux derivative of the scenario cost at u* toward u, evaluated through
// the variational state: E[sum_k (f_x xbar + f_u (u - u*)) + phi_x xbar(N)].
double directional_cost_derivative(const PathSpace& ps, const ScenarioModel& model, int gamma,
                                   const AdaptedProcess& u_star, const AdaptedProcess& u);

struct FdConvergenceRow {
  double delta = 0.0;
  double quotient = 0.0;   // (J(u* + delta (u - u*)) - J(u*)) / delta
  double error = 0.0;      // |quotient - directional derivative|
};

struct FdConvergenceReport {
  double derivative = 0.0;  // the variational-state value being converged to
  std::vector<FdConvergenceRow> rows;
};

FdConvergenceReport fd_convergence_report(const PathSpace& ps, const ScenarioModel& model,
                                          int gamma, const AdaptedProcess& u_star,
                                          const AdaptedProcess& u,
                                          const std::vector<double>& deltas = {1e-1, 5e-2, 2.5e-2,
                                                                               1.25e-2});

}  // namespace rsmp
