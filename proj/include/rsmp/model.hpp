#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rsmp/errors.hpp"
#include "rsmp/path_space.hpp"

namespace rsmp {

// First-order data of one scenario at a point (k, x, u). diffusion_dx[i] and
// diffusion_du[i] belong to the i-th diffusion column, the one multiplying the
// i-th noise component.
struct DerivativeBundle {
  Eigen::MatrixXd drift_dx;                  // n x n
  Eigen::MatrixXd drift_du;                  // n x m
  std::vector<Eigen::MatrixXd> diffusion_dx; // d entries, n x n
  std::vector<Eigen::MatrixXd> diffusion_du; // d entries, n x m
  Eigen::RowVectorXd cost_dx;                // 1 x n
  Eigen::RowVectorXd cost_du;                // 1 x m
};

// Callable description of one scenario's coefficients.
struct ScenarioCoefficients {
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&, const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(int, const Eigen::VectorXd&, const Eigen::VectorXd&)> diffusion;
  std::function<double(int, const Eigen::VectorXd&, const Eigen::VectorXd&)> running_cost;
  std::function<double(const Eigen::VectorXd&)> terminal_cost;
  std::function<DerivativeBundle(int, const Eigen::VectorXd&, const Eigen::VectorXd&)> derivatives;
  std::function<Eigen::RowVectorXd(const Eigen::VectorXd&)> terminal_gradient;
};

// Stage data of one linear-quadratic scenario:
//   drift      b = A x + B u + a
//   diffusion  sigma^i = C[i] x + D[i] u + c[i]
//   cost       f = x'Qx/2 + u'Ru/2 + q'x + r'u
struct LqStage {
  Eigen::MatrixXd A, B;
  Eigen::VectorXd a;
  std::vector<Eigen::MatrixXd> C, D;
  std::vector<Eigen::VectorXd> c;
  Eigen::MatrixXd Q, R;
  Eigen::VectorXd q, r;
};

struct LqScenario {
  std::string label;
  std::vector<LqStage> stages;
  Eigen::MatrixXd S;  // terminal x'Sx/2 + s'x
  Eigen::VectorXd s;
};

struct LqFamilySpec {
  Index state_dim = 0, control_dim = 0, noise_dim = 0;
  int horizon = 0;
  Eigen::VectorXd x0;
  std::vector<LqScenario> scenarios;
  // Optional per-stage control boxes; entries may be +-infinity.
  std::vector<Eigen::VectorXd> control_lo, control_hi;
};

struct InvestmentSpec;  // investment.hpp

enum class ModelFamily { Generic, LinearQuadratic, Investment };

// Finite scenario family over labels gamma, sharing dimensions, the initial
// state and the per-stage admissible control boxes.
struct ScenarioModel {
  std::vector<std::string> gamma_labels;
  Index state_dim = 0, control_dim = 0, noise_dim = 0;
  int horizon = 0;
  Eigen::VectorXd x0;
  std::vector<Eigen::VectorXd> control_lo, control_hi;  // empty => unbounded
  std::vector<ScenarioCoefficients> scenarios;
  ModelFamily family = ModelFamily::Generic;
  std::shared_ptr<const LqFamilySpec> lq;
  std::shared_ptr<const InvestmentSpec> investment;

  int scenario_count() const { return static_cast<int>(scenarios.size()); }
  const ScenarioCoefficients& scenario(int gamma) const {
    if (gamma < 0 || gamma >= scenario_count()) {
      throw BadSpec("scenario index " + std::to_string(gamma) + " out of range");
    }
    return scenarios[static_cast<size_t>(gamma)];
  }
  Eigen::VectorXd lower_bound(int stage) const;
  Eigen::VectorXd upper_bound(int stage) const;
  bool bounded(int stage) const;
};

// Wires analytic evaluators and derivatives for a linear-quadratic family.
// Validates dimensions and symmetry of Q, R, S (within 1e-12).
ScenarioModel build_lq_model(const LqFamilySpec& spec);

// Drift vector and n x d diffusion matrix of scenario `gamma` at (k, x, u).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> eval_dynamics(const ScenarioModel& model, int gamma,
                                                          int k, const Eigen::VectorXd& x,
                                                          const Eigen::VectorXd& u);

DerivativeBundle eval_derivatives(const ScenarioModel& model, int gamma, int k,
                                  const Eigen::VectorXd& x, const Eigen::VectorXd& u);

Eigen::RowVectorXd eval_terminal_gradient(const ScenarioModel& model, int gamma,
                                          const Eigen::VectorXd& x);

double eval_running_cost(const ScenarioModel& model, int gamma, int k,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& u);

double eval_terminal_cost(const ScenarioModel& model, int gamma, const Eigen::VectorXd& x);

// One recorded violation of a growth or Lipschitz bound on the audit grid.
struct AssumptionViolation {
  int gamma = 0;
  int stage = 0;
  std::string quantity;
  double observed = 0.0;
  double bound = 0.0;
};

struct AssumptionAudit {
  double constant = 0.0;  // bound audited against
  std::vector<AssumptionViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Samples (x, u) pairs from [-radius, radius] boxes and checks linear growth
// |b|, |sigma| <= L(1 + |x| + |u|) plus difference quotients of b, sigma, f
// against the Lipschitz constant L. A finite audit, not a proof.
AssumptionAudit validate_assumptions(const ScenarioModel& model, double L,
                                     int samples_per_stage = 32, double radius = 2.0,
                                     std::uint64_t seed = 0);

}  // namespace rsmp
