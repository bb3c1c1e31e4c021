#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "rsmp/adjoint.hpp"
#include "rsmp/model.hpp"
#include "rsmp/path_space.hpp"

namespace rsmp {

// Two-scenario benchmark-tracking portfolio problem: scalar wealth
//   x(k+1) = (1 + e(k)) x(k) + (mu_g(k) - e(k) 1)' u(k) + sum_j beta_g^j(k)' u(k) B^j(k+1)
// with running cost (u - psi)' G_g (u - psi) / 2 and terminal reward H_g x(N).
// Coefficients mu, beta, G, psi are per stage, each optionally refined to
// per-node tables; the interest rate e must stay deterministic because the
// closed-form costate compounds it. Requires standardized noise.
struct InvestmentSpec {
  int horizon = 0;
  Index stocks = 0;     // m
  Index noise_dim = 0;  // d
  std::vector<double> rate;                         // e(k) > 0, k = 0..N-1
  std::array<std::vector<Eigen::VectorXd>, 2> mu;   // [g][k], length m
  std::array<std::vector<Eigen::MatrixXd>, 2> beta; // [g][k], m x d (column j pairs with B^j)
  std::array<std::vector<Eigen::MatrixXd>, 2> G;    // [g][k], m x m positive definite
  std::array<double, 2> H = {0.0, 0.0};             // H_g > 0
  std::vector<Eigen::VectorXd> psi;                 // [k], length m
  double x0 = 0.0;

  // Optional per-node refinements, empty when the stage tables apply everywhere.
  std::array<std::vector<std::vector<Eigen::VectorXd>>, 2> mu_nodes;
  std::array<std::vector<std::vector<Eigen::MatrixXd>>, 2> beta_nodes;
  std::array<std::vector<std::vector<Eigen::MatrixXd>>, 2> G_nodes;
  std::vector<std::vector<Eigen::VectorXd>> psi_nodes;

  bool stage_deterministic() const {
    return mu_nodes[0].empty() && mu_nodes[1].empty() && beta_nodes[0].empty() &&
           beta_nodes[1].empty() && G_nodes[0].empty() && G_nodes[1].empty() &&
           psi_nodes.empty();
  }
  const Eigen::VectorXd& mu_at(int g, int k, Index node) const {
    const auto& per_node = mu_nodes[static_cast<size_t>(g)];
    return per_node.empty() ? mu[static_cast<size_t>(g)][static_cast<size_t>(k)]
                            : per_node[static_cast<size_t>(k)][static_cast<size_t>(node)];
  }
  const Eigen::MatrixXd& beta_at(int g, int k, Index node) const {
    const auto& per_node = beta_nodes[static_cast<size_t>(g)];
    return per_node.empty() ? beta[static_cast<size_t>(g)][static_cast<size_t>(k)]
                            : per_node[static_cast<size_t>(k)][static_cast<size_t>(node)];
  }
  const Eigen::MatrixXd& tracking_weight(int g, int k, Index node) const {
    const auto& per_node = G_nodes[static_cast<size_t>(g)];
    return per_node.empty() ? G[static_cast<size_t>(g)][static_cast<size_t>(k)]
                            : per_node[static_cast<size_t>(k)][static_cast<size_t>(node)];
  }
  const Eigen::VectorXd& psi_at(int k, Index node) const {
    return psi_nodes.empty() ? psi[static_cast<size_t>(k)]
                             : psi_nodes[static_cast<size_t>(k)][static_cast<size_t>(node)];
  }
  // Excess return mu_g(k) - e(k) 1.
  Eigen::VectorXd excess_return(int g, int k, Index node) const {
    return mu_at(g, k, node).array() - rate[static_cast<size_t>(k)];
  }
};

// Shape and positivity checks; per-node tables are checked against the tree.
void validate_investment_spec(const InvestmentSpec& spec, const PathSpace& ps);

// Generic two-scenario model with analytic derivatives. Only stage-
// deterministic specs fit the evaluator interface; per-node tables are served
// by the direct routines below instead.
ScenarioModel build_investment_model(const InvestmentSpec& spec);

// P_g(k) = -H_g prod_{i=k+1}^{N-1} (1 + e(i)), the empty product being 1.
double closed_form_costate(const InvestmentSpec& spec, int gamma, int k);

// The same costate laid out on the tree, with the covariation term
// identically zero (the costate is deterministic and the noise is centered).
AdjointPair closed_form_adjoint(const PathSpace& ps, const InvestmentSpec& spec, int gamma);

// u*(k) = psi(k) + G_theta(k)^{-1} (theta H_1 A_1(k) + (1-theta) H_2 A_2(k))
//         * prod_{i=k+1}^{N-1} (1 + e(i)),
// where G_theta = theta G_1 + (1-theta) G_2 and A_g is the excess return.
AdaptedProcess optimal_portfolio(const PathSpace& ps, const InvestmentSpec& spec, double theta);

AdaptedProcess simulate_wealth(const PathSpace& ps, const InvestmentSpec& spec, int gamma,
                               const AdaptedProcess& u);

// E[sum_k (u - psi)' G_g (u - psi) / 2 - H_g x_g(N)] under the given control.
double investment_scenario_value(const PathSpace& ps, const InvestmentSpec& spec, int gamma,
                                 const AdaptedProcess& u);

struct ValuePair {
  double y1 = 0.0;
  double y2 = 0.0;
  double gap() const { return y1 - y2; }
};

// Scenario values under the theta-mixed portfolio.
ValuePair evaluate_value_pair(const PathSpace& ps, const InvestmentSpec& spec, double theta);

// Largest per-node violation of the mixed first-order condition
//   A(k) Theta P(k) + G_theta(k) (u*(k) - psi(k)) = 0
// under the closed-form costate pair (the covariation terms vanish).
double theta_stationarity_residual(const PathSpace& ps, const InvestmentSpec& spec, double theta);

enum class ThetaCase { Case1, Case2, Case3 };

struct ThetaSolution {
  double theta_star = 0.0;
  ThetaCase case_label = ThetaCase::Case3;
  AdaptedProcess control;
  double y1 = 0.0;
  double y2 = 0.0;
  double robust_value = 0.0;
  int bisection_iterations = 0;
  std::string note;
};

// Resolves the worst-case weight: theta = 1 when the first scenario already
// dominates under its own optimizer, theta = 0 symmetrically, and otherwise a
// bisection on the value gap, which is continuous in theta. Throws
// BisectionStalled when the gap cannot be closed to gap_tol.
ThetaSolution solve_theta_star(const PathSpace& ps, const InvestmentSpec& spec,
                               double theta_tol = 1e-8, double gap_tol = 1e-6,
                               int max_iterations = 200);

}  // namespace rsmp
