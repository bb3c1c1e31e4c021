#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "rsmp/model.hpp"

using namespace rsmp;

namespace {

// Two-dimensional state, scalar control, one noise column, all blocks busy.
LqFamilySpec busy_spec(int horizon = 2) {
  LqFamilySpec spec;
  spec.state_dim = 2;
  spec.control_dim = 1;
  spec.noise_dim = 1;
  spec.horizon = horizon;
  spec.x0 = Eigen::Vector2d(1.0, 2.0);
  LqStage st;
  st.A = (Eigen::MatrixXd(2, 2) << 1.0, 0.5, 0.0, 1.0).finished();
  st.B = (Eigen::MatrixXd(2, 1) << 0.0, 1.0).finished();
  st.a = Eigen::Vector2d(0.1, 0.0);
  st.C = {(Eigen::MatrixXd(2, 2) << 0.0, 0.0, 0.2, 0.0).finished()};
  st.D = {(Eigen::MatrixXd(2, 1) << 0.3, 0.0).finished()};
  st.c = {Eigen::Vector2d(0.0, 0.4)};
  st.Q = (Eigen::MatrixXd(2, 2) << 2.0, 0.0, 0.0, 0.0).finished();
  st.R = Eigen::MatrixXd::Constant(1, 1, 4.0);
  st.q = Eigen::Vector2d(1.0, 0.0);
  st.r = Eigen::VectorXd::Constant(1, 0.5);
  LqScenario sc;
  sc.label = "base";
  sc.stages.assign(static_cast<size_t>(horizon), st);
  sc.S = (Eigen::MatrixXd(2, 2) << 0.0, 0.0, 0.0, 2.0).finished();
  sc.s = Eigen::Vector2d(1.0, 0.0);
  spec.scenarios.push_back(sc);
  return spec;
}

}  // namespace

TEST_CASE("linear-quadratic evaluators match hand values") {
  const ScenarioModel model = build_lq_model(busy_spec());
  const Eigen::Vector2d x(1.0, 2.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 3.0);

  const auto [b, sigma] = eval_dynamics(model, 0, 0, x, u);
  CHECK(b.isApprox(Eigen::Vector2d(2.1, 5.0), 1e-15));
  CHECK(sigma.col(0).isApprox(Eigen::Vector2d(0.9, 0.6), 1e-15));

  CHECK(eval_running_cost(model, 0, 0, x, u) == doctest::Approx(21.5).epsilon(1e-15));
  CHECK(eval_terminal_cost(model, 0, x) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(eval_terminal_gradient(model, 0, x).isApprox(Eigen::RowVector2d(1.0, 4.0), 1e-15));

  const DerivativeBundle d = eval_derivatives(model, 0, 0, x, u);
  CHECK(d.drift_dx.isApprox(model.lq->scenarios[0].stages[0].A, 1e-15));
  CHECK(d.drift_du.isApprox(model.lq->scenarios[0].stages[0].B, 1e-15));
  CHECK(d.diffusion_dx[0].isApprox(model.lq->scenarios[0].stages[0].C[0], 1e-15));
  CHECK(d.diffusion_du[0].isApprox(model.lq->scenarios[0].stages[0].D[0], 1e-15));
  CHECK(d.cost_dx.isApprox(Eigen::RowVector2d(3.0, 0.0), 1e-15));
  CHECK(d.cost_du.isApprox(Eigen::RowVectorXd::Constant(1, 12.5), 1e-15));
}

TEST_CASE("compounding wealth dynamics as a one-dimensional affine stage") {
  // x(k+1) = (1+e)x + (mu-e)u + beta u B with e = 0.1, mu = 0.2, beta = 0.3.
  LqFamilySpec spec;
  spec.state_dim = 1;
  spec.control_dim = 1;
  spec.noise_dim = 1;
  spec.horizon = 1;
  spec.x0 = Eigen::VectorXd::Constant(1, 1.0);
  LqStage st;
  st.A = Eigen::MatrixXd::Constant(1, 1, 1.1);
  st.B = Eigen::MatrixXd::Constant(1, 1, 0.1);
  st.a = Eigen::VectorXd::Zero(1);
  st.C = {Eigen::MatrixXd::Zero(1, 1)};
  st.D = {Eigen::MatrixXd::Constant(1, 1, 0.3)};
  st.c = {Eigen::VectorXd::Zero(1)};
  st.Q = Eigen::MatrixXd::Zero(1, 1);
  st.R = Eigen::MatrixXd::Zero(1, 1);
  st.q = Eigen::VectorXd::Zero(1);
  st.r = Eigen::VectorXd::Zero(1);
  LqScenario sc;
  sc.label = "wealth";
  sc.stages = {st};
  sc.S = Eigen::MatrixXd::Zero(1, 1);
  sc.s = Eigen::VectorXd::Zero(1);
  spec.scenarios = {sc};

  const ScenarioModel model = build_lq_model(spec);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 2.0);
  const auto [b, sigma] = eval_dynamics(model, 0, 0, x, u);
  CHECK(b(0) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(sigma(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("analytic derivatives agree with central differences") {
  const ScenarioModel model = build_lq_model(busy_spec());
  const Eigen::Vector2d x(0.7, -1.3);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.9);
  const DerivativeBundle d = eval_derivatives(model, 0, 1, x, u);
  const double h = 1e-5;

  for (Index j = 0; j < 2; ++j) {
    Eigen::Vector2d xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const auto [bp, sp] = eval_dynamics(model, 0, 1, xp, u);
    const auto [bm, sm] = eval_dynamics(model, 0, 1, xm, u);
    CHECK((d.drift_dx.col(j) - (bp - bm) / (2 * h)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((d.diffusion_dx[0].col(j) - (sp.col(0) - sm.col(0)) / (2 * h)).cwiseAbs().maxCoeff() <=
          1e-8);
    const double fp = eval_running_cost(model, 0, 1, xp, u);
    const double fm = eval_running_cost(model, 0, 1, xm, u);
    CHECK(std::abs(d.cost_dx(j) - (fp - fm) / (2 * h)) <= 1e-8);
  }
  Eigen::VectorXd up = u, um = u;
  up(0) += h;
  um(0) -= h;
  const auto [bp, sp] = eval_dynamics(model, 0, 1, x, up);
  const auto [bm, sm] = eval_dynamics(model, 0, 1, x, um);
  CHECK((d.drift_du.col(0) - (bp - bm) / (2 * h)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((d.diffusion_du[0].col(0) - (sp.col(0) - sm.col(0)) / (2 * h)).cwiseAbs().maxCoeff() <=
        1e-8);
  CHECK(std::abs(d.cost_du(0) - (eval_running_cost(model, 0, 1, x, up) -
                                 eval_running_cost(model, 0, 1, x, um)) /
                                    (2 * h)) <= 1e-8);
}

TEST_CASE("growth and Lipschitz audit passes with an honest constant and fails with a tight one") {
  const ScenarioModel model = build_lq_model(busy_spec());
  const AssumptionAudit good = validate_assumptions(model, 10.0);
  CHECK(good.ok());
  const AssumptionAudit tight = validate_assumptions(model, 0.05);
  CHECK_FALSE(tight.ok());
  CHECK(tight.violations.size() > 0);
  CHECK(tight.constant == 0.05);
  CHECK(tight.violations.front().observed > tight.violations.front().bound);
}

TEST_CASE("scenario map is continuous: coefficient gaps shrink linearly") {
  // Scenario 2 equals scenario 1 with every stage block shifted by eps.
  double previous = 0.0;
  for (int p = 1; p <= 3; ++p) {
    const double eps = std::pow(10.0, -p);
    LqFamilySpec spec = busy_spec();
    LqScenario shifted = spec.scenarios[0];
    shifted.label = "shifted";
    for (auto& st : shifted.stages) {
      st.A.array() += eps;
      st.D[0].array() += eps;
      st.r.array() += eps;
    }
    spec.scenarios.push_back(shifted);
    const ScenarioModel model = build_lq_model(spec);
    const Eigen::Vector2d x(0.4, -0.2);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 1.5);
    const auto [b1, s1] = eval_dynamics(model, 0, 0, x, u);
    const auto [b2, s2] = eval_dynamics(model, 1, 0, x, u);
    const double gap = (b1 - b2).cwiseAbs().maxCoeff() + (s1 - s2).cwiseAbs().maxCoeff() +
                       std::abs(eval_running_cost(model, 0, 0, x, u) -
                                eval_running_cost(model, 1, 0, x, u));
    if (p > 1) CHECK(gap == doctest::Approx(previous / 10.0).epsilon(1e-9));
    previous = gap;
  }
}

TEST_CASE("family validation rejects bad shapes and asymmetric weights") {
  LqFamilySpec wrong_dims = busy_spec();
  wrong_dims.scenarios[0].stages[0].B = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(build_lq_model(wrong_dims), BadSpec);

  LqFamilySpec asym = busy_spec();
  asym.scenarios[0].stages[1].Q(0, 1) = 0.5;  // Q(1, 0) stays 0
  CHECK_THROWS_AS(build_lq_model(asym), BadSpec);

  LqFamilySpec short_stages = busy_spec();
  short_stages.scenarios[0].stages.pop_back();
  CHECK_THROWS_AS(build_lq_model(short_stages), BadSpec);

  LqFamilySpec bad_x0 = busy_spec();
  bad_x0.x0 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(build_lq_model(bad_x0), BadSpec);

  CHECK_THROWS_AS(build_lq_model(LqFamilySpec{}), BadSpec);
}

TEST_CASE("control bounds fill with infinities when absent") {
  const ScenarioModel unbounded = build_lq_model(busy_spec());
  CHECK_FALSE(unbounded.bounded(0));
  CHECK(unbounded.lower_bound(0)(0) == -std::numeric_limits<double>::infinity());
  CHECK(unbounded.upper_bound(1)(0) == std::numeric_limits<double>::infinity());

  LqFamilySpec boxed = busy_spec();
  boxed.control_lo.assign(2, Eigen::VectorXd::Constant(1, -1.0));
  boxed.control_hi.assign(2, Eigen::VectorXd::Constant(1, 2.0));
  const ScenarioModel bounded = build_lq_model(boxed);
  CHECK(bounded.bounded(0));
  CHECK(bounded.lower_bound(1)(0) == -1.0);
  CHECK(bounded.upper_bound(1)(0) == 2.0);
}
