#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rsmp/dynamics.hpp"
#include "rsmp/model.hpp"
#include "rsmp/path_space.hpp"

namespace rsmp {

// Backward pair of one scenario along a control: P carries the conditional
// one-step value gradients (stages 0..N-1, n per node), Q the corresponding
// noise covariations (n x d per node, column i pairing with noise component i).
struct AdjointPair {
  int gamma = 0;
  AdaptedProcess P;
  AdaptedProcess Q;
};

// Backward recursion: terminal conditions from the terminal cost gradient,
// then one conditional expectation of the stage-(k+1) gradient expression per
// step down to stage 0.
AdjointPair solve_adjoint_recursive(const PathSpace& ps, const ScenarioModel& model, int gamma,
                                    const AdaptedProcess& u_star);

// Same pair through the closed sum: per leaf, the stage gradients transported
// by transposed products of the one-step maps, accumulated right to left, then
// a single conditional expectation per stage.
AdjointPair solve_adjoint_explicit(const PathSpace& ps, const ScenarioModel& model, int gamma,
                                   const AdaptedProcess& u_star);

// H(k, x, u, P, Q) = f + <P, b> + sum_i <Q^i, sigma^i>.
double hamiltonian_eval(const ScenarioModel& model, int gamma, int k, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& P,
                        const Eigen::MatrixXd& Q);

// d/du of the Hamiltonian: f_u' + b_u' P + sum_i (sigma^i_u)' Q^i.
Eigen::VectorXd hamiltonian_u_gradient(const ScenarioModel& model, int gamma, int k,
                                       const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                       const Eigen::VectorXd& P, const Eigen::MatrixXd& Q);

// Both sides of the duality identity between the variational state and the
// backward pair, for direction u - u*:
//   state side    E[sum_k f_x xbar(k) + phi_x xbar(N)]
//   control side  E[sum_k (P' b_u + sum_i (Q^i)' sigma^i_u)(u - u*)(k)]
struct DualityCheck {
  double state_side = 0.0;
  double control_side = 0.0;
  double residual() const { return std::abs(state_side - control_side); }
  double relative_residual() const {
    return residual() / (1.0 + std::max(std::abs(state_side), std::abs(control_side)));
  }
};

DualityCheck duality_residual(const PathSpace& ps, const ScenarioModel& model, int gamma,
                              const AdaptedProcess& u_star, const AdaptedProcess& u);

// Per-stage conditional identity behind the duality telescope. Entry k is the
// largest absolute mismatch over stage-k nodes between
//   E[g(k+1) xbar(k+1) | F_k]   with g(k+1) the stage-(k+1) gradient row
// and its decomposition through (P(k), Q(k)) into xbar(k) and u_hat(k) terms.
std::vector<double> one_step_duality_residuals(const PathSpace& ps, const ScenarioModel& model,
                                               int gamma, const AdaptedProcess& u_star,
                                               const AdaptedProcess& u);

}  // namespace rsmp
