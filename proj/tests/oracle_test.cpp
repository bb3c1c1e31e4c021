#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "rsmp/dynamics.hpp"
#include "rsmp/oracle.hpp"

using namespace rsmp;

namespace {

// Scalar one-scenario chain x(k+1) = A x + B u with cost R u^2 / 2 + s x(N).
LqFamilySpec scalar_lq(int horizon, double A, double B, double R, double s) {
  LqFamilySpec spec;
  spec.state_dim = spec.control_dim = spec.noise_dim = 1;
  spec.horizon = horizon;
  spec.x0 = Eigen::VectorXd::Ones(1);
  LqStage st;
  st.A = Eigen::MatrixXd::Constant(1, 1, A);
  st.B = Eigen::MatrixXd::Constant(1, 1, B);
  st.a = Eigen::VectorXd::Zero(1);
  st.C = {Eigen::MatrixXd::Zero(1, 1)};
  st.D = {Eigen::MatrixXd::Zero(1, 1)};
  st.c = {Eigen::VectorXd::Zero(1)};
  st.Q = Eigen::MatrixXd::Zero(1, 1);
  st.R = Eigen::MatrixXd::Constant(1, 1, R);
  st.q = Eigen::VectorXd::Zero(1);
  st.r = Eigen::VectorXd::Zero(1);
  LqScenario sc;
  sc.label = "base";
  sc.stages.assign(static_cast<size_t>(horizon), st);
  sc.S = Eigen::MatrixXd::Zero(1, 1);
  sc.s = Eigen::VectorXd::Constant(1, s);
  spec.scenarios = {sc};
  return spec;
}

// Two inert-state scenarios whose costs are u^2/2 +- u; the worst case
// u^2/2 + |u| has its unique minimum at zero.
LqFamilySpec mirror_lq() {
  LqFamilySpec spec = scalar_lq(1, 0.0, 0.0, 1.0, 0.0);
  spec.scenarios.push_back(spec.scenarios.front());
  spec.scenarios[0].label = "up";
  spec.scenarios[1].label = "down";
  spec.scenarios[0].stages[0].r = Eigen::VectorXd::Constant(1, 1.0);
  spec.scenarios[1].stages[0].r = Eigen::VectorXd::Constant(1, -1.0);
  return spec;
}

AdaptedProcess constant_control(const PathSpace& ps, const ScenarioModel& model, double v) {
  AdaptedProcess u(ps, 0, ps.horizon() - 1, model.control_dim);
  for (int k = 0; k < ps.horizon(); ++k) u.stage_data(k).setConstant(v);
  return u;
}

}  // namespace

TEST_CASE("the enumerator walks every adapted assignment, last slot fastest") {
  const PathSpace ps = build_path_space(fair_coin_spec(2));
  const ScenarioModel model = build_lq_model(scalar_lq(2, 1.0, 1.0, 1.0, 0.0));
  const ControlGrid grid = ControlGrid::linspace(model, {-1.0}, {1.0}, 3);

  // Slots: stage 0 node 0, stage 1 node 0, stage 1 node 1 -> 3^3 assignments.
  ControlEnumerator en(ps, model, grid);
  CHECK(en.total() == 27);

  AdaptedProcess u(ps, 0, 1, 1);
  REQUIRE(en.next(u));
  CHECK(u.value(0, 0)(0) == -1.0);
  CHECK(u.value(1, 0)(0) == -1.0);
  CHECK(u.value(1, 1)(0) == -1.0);
  REQUIRE(en.next(u));
  CHECK(u.value(0, 0)(0) == -1.0);
  CHECK(u.value(1, 0)(0) == -1.0);
  CHECK(u.value(1, 1)(0) == 0.0);

  std::set<std::array<double, 3>> seen;
  seen.insert({-1.0, -1.0, -1.0});
  seen.insert({-1.0, -1.0, 0.0});
  int count = 2;
  while (en.next(u)) {
    seen.insert({u.value(0, 0)(0), u.value(1, 0)(0), u.value(1, 1)(0)});
    ++count;
  }
  CHECK(count == 27);
  CHECK(seen.size() == 27);
  CHECK_FALSE(en.next(u));  // stays exhausted

  en.reset();
  REQUIRE(en.next(u));
  CHECK(u.value(1, 1)(0) == -1.0);
}

TEST_CASE("assignment caps reject oversized grids up front") {
  const ScenarioModel small = build_lq_model(scalar_lq(2, 1.0, 1.0, 1.0, 0.0));
  const PathSpace ps2 = build_path_space(fair_coin_spec(2));
  CHECK_THROWS_AS(ControlEnumerator(ps2, small, ControlGrid::linspace(small, {-1.0}, {1.0}, 3), 26),
                  GridTooLarge);

  // Seven slots at 41 candidates each overflow the default cap.
  const ScenarioModel big = build_lq_model(scalar_lq(3, 1.0, 1.0, 1.0, 0.0));
  const PathSpace ps3 = build_path_space(fair_coin_spec(3));
  const ControlGrid grid = ControlGrid::linspace(big, {-1.0}, {1.0}, 41);
  CHECK_THROWS_AS(ControlEnumerator(ps3, big, grid), GridTooLarge);
  CHECK_THROWS_AS(brute_force_minimum(ps3, big, full_simplex(1), grid), GridTooLarge);
}

TEST_CASE("grid search recovers the one-step closed form when it lies on the grid") {
  // J(u) = u^2 + u/2 + 0.3, minimized at u = -1/4 with value 0.2375.
  const LqFamilySpec spec = scalar_lq(1, 0.3, 0.5, 2.0, 1.0);
  const ScenarioModel model = build_lq_model(spec);
  const PathSpace ps = build_path_space(fair_coin_spec(1));
  const AmbiguitySet set = full_simplex(1);
  const ControlGrid grid = ControlGrid::linspace(model, {-1.0}, {1.0}, 41);
  CHECK(grid.spacing(0, 0) == doctest::Approx(0.05).epsilon(1e-12));

  const BruteForceResult best = brute_force_minimum(ps, model, set, grid);
  CHECK(best.assignments == 41);
  CHECK(best.minimizer.value(0, 0)(0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(best.value == doctest::Approx(0.2375).epsilon(1e-12));

  const CertificationReport ok =
      certify_candidate(ps, model, set, grid, constant_control(ps, model, -0.25), 1e-9);
  CHECK(ok.pass);
  CHECK(ok.margin >= -1e-12);
  CHECK(ok.candidate_value == doctest::Approx(0.2375).epsilon(1e-12));

  // Shifting by one grid step costs exactly R/2 * 0.05^2 = 0.0025.
  const CertificationReport bad =
      certify_candidate(ps, model, set, grid, constant_control(ps, model, -0.20), 1e-6);
  CHECK_FALSE(bad.pass);
  CHECK(bad.margin == doctest::Approx(-0.0025).epsilon(1e-9));
}

TEST_CASE("grids centered on the candidate certify it as their midpoint") {
  const ScenarioModel model = build_lq_model(scalar_lq(1, 0.3, 0.5, 2.0, 1.0));
  const PathSpace ps = build_path_space(fair_coin_spec(1));
  const AdaptedProcess candidate = constant_control(ps, model, -0.25);
  const ControlGrid grid = ControlGrid::centered(model, candidate, 1.0, 41);
  CHECK(grid.values[0][0].front() == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(grid.values[0][0].back() == doctest::Approx(0.75).epsilon(1e-12));

  const CertificationReport report =
      certify_candidate(ps, model, full_simplex(1), grid, candidate, 1e-9);
  CHECK(report.pass);
  CHECK(report.margin >= -1e-12);
}

TEST_CASE("off-grid minimizers are approached at the squared spacing rate") {
  const ScenarioModel model = build_lq_model(scalar_lq(1, 0.3, 0.5, 2.0, 1.0));
  const PathSpace ps = build_path_space(fair_coin_spec(1));
  const AmbiguitySet set = full_simplex(1);
  // J(u) - J* = (u + 1/4)^2, so the grid error is the squared distance to the
  // nearest point; none of these grids contains -1/4.
  double previous = 1.0;
  for (int points : {10, 18, 34}) {
    const double h = 2.0 / (points - 1);
    const BruteForceResult best =
        brute_force_minimum(ps, model, set, ControlGrid::linspace(model, {-1.0}, {1.0}, points));
    const double error = best.value - 0.2375;
    CHECK(error > 0.0);
    CHECK(error <= h * h / 4.0 + 1e-15);
    CHECK(std::abs(best.minimizer.value(0, 0)(0) + 0.25) <= h / 2.0 + 1e-12);
    CHECK(error < previous);
    previous = error;
  }
}

TEST_CASE("the worst-case grid minimum sits at the kink of a mirrored pair") {
  const ScenarioModel model = build_lq_model(mirror_lq());
  const PathSpace ps = build_path_space(fair_coin_spec(1));
  const AmbiguitySet set = full_simplex(2);
  const ControlGrid grid = ControlGrid::linspace(model, {-1.0}, {1.0}, 41);

  const BruteForceResult best = brute_force_minimum(ps, model, set, grid);
  CHECK(best.minimizer.value(0, 0)(0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(best.value == doctest::Approx(0.0).epsilon(1e-14));

  const CertificationReport report =
      certify_candidate(ps, model, set, grid, constant_control(ps, model, 0.0), 1e-9);
  CHECK(report.pass);
  CHECK(robust_cost(ps, model, set, constant_control(ps, model, 0.0)).value ==
        doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("coordinate descent improves monotonically and fixes grid optima") {
  const ScenarioModel model = build_lq_model(scalar_lq(2, 1.0, 1.0, 1.0, 0.0));
  const PathSpace ps = build_path_space(fair_coin_spec(2));
  const AmbiguitySet set = full_simplex(1);
  const ControlGrid grid = ControlGrid::linspace(model, {-1.0}, {1.0}, 21);

  const AdaptedProcess start = constant_control(ps, model, 1.0);
  const double start_value = robust_cost(ps, model, set, start).value;
  const AdaptedProcess refined = coordinate_descent_refine(ps, model, set, grid, start, 6);
  const double refined_value = robust_cost(ps, model, set, refined).value;
  CHECK(refined_value <= start_value + 1e-15);

  const BruteForceResult best = brute_force_minimum(ps, model, set, grid);
  CHECK(refined_value <= best.value + 1e-12);  // it can only tie the global scan
  CHECK(refined_value >= best.value - 1e-12);

  const AdaptedProcess fixed = coordinate_descent_refine(ps, model, set, grid, best.minimizer, 3);
  CHECK(robust_cost(ps, model, set, fixed).value <= best.value + 1e-15);
}

TEST_CASE("grid construction checks its inputs") {
  const ScenarioModel model = build_lq_model(scalar_lq(1, 0.3, 0.5, 2.0, 1.0));
  CHECK_THROWS_AS(ControlGrid::linspace(model, {-1.0}, {1.0}, 0), BadSpec);
  CHECK_THROWS_AS(ControlGrid::linspace(model, {-1.0, 0.0}, {1.0}, 5), ShapeMismatch);
  // A single point degenerates to the midpoint of the bounds.
  const ControlGrid point = ControlGrid::linspace(model, {-1.0}, {2.0}, 1);
  CHECK(point.values[0][0] == std::vector<double>{0.5});
}
