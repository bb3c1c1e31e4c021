#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "rsmp/path_space.hpp"

using namespace rsmp;

namespace {

// Three-atom second step with uneven probabilities, for conditioning tests.
NoiseSpec uneven_spec() {
  NoiseSpec spec;
  spec.horizon = 2;
  spec.dim = 1;
  spec.steps.resize(2);
  spec.steps[0] = {{Eigen::VectorXd::Constant(1, 1.0), 0.3},
                   {Eigen::VectorXd::Constant(1, 2.0), 0.7}};
  spec.steps[1] = {{Eigen::VectorXd::Constant(1, 0.0), 0.5},
                   {Eigen::VectorXd::Constant(1, 3.0), 0.25},
                   {Eigen::VectorXd::Constant(1, 5.0), 0.25}};
  return spec;
}

NoiseSpec random_spec(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> horizon_pick(1, 4), atoms_pick(2, 3), dim_pick(1, 2);
  std::uniform_real_distribution<double> value_pick(-2.0, 2.0), weight_pick(0.2, 1.0);
  NoiseSpec spec;
  spec.horizon = horizon_pick(rng);
  spec.dim = dim_pick(rng);
  spec.steps.resize(static_cast<size_t>(spec.horizon));
  for (auto& step : spec.steps) {
    const int atoms = atoms_pick(rng);
    double total = 0.0;
    std::vector<double> weights;
    for (int a = 0; a < atoms; ++a) {
      weights.push_back(weight_pick(rng));
      total += weights.back();
    }
    for (int a = 0; a < atoms; ++a) {
      NoiseAtom atom;
      atom.value = Eigen::VectorXd::NullaryExpr(spec.dim, [&](Index) { return value_pick(rng); });
      atom.prob = weights[static_cast<size_t>(a)] / total;
      step.push_back(atom);
    }
    // Nudge the last atom so the probabilities sum to one exactly.
    double sum = 0.0;
    for (const auto& atom : step) sum += atom.prob;
    step.back().prob += 1.0 - sum;
  }
  return spec;
}

}  // namespace

TEST_CASE("fair coin tree has uniform node probabilities and +1 first atom") {
  const PathSpace ps = build_path_space(fair_coin_spec(2));
  CHECK(ps.node_count(0) == 1);
  CHECK(ps.node_count(1) == 2);
  CHECK(ps.node_count(2) == 4);
  CHECK(ps.atom_value(1, 0)(0) == 1.0);
  CHECK(ps.atom_value(1, 1)(0) == -1.0);
  for (Index w = 0; w < 4; ++w) {
    CHECK(ps.node_probability(2, w) == doctest::Approx(0.25).epsilon(1e-15));
  }
  CHECK(ps.spec().standardized);
}

TEST_CASE("multivariate fair coin enumerates product atoms with probability 2^-d") {
  const PathSpace ps = build_path_space(fair_coin_spec(1, 2));
  CHECK(ps.atom_count(1) == 4);
  // Lexicographic: bit 0 of the atom index drives the last component.
  CHECK(ps.atom_value(1, 0).isApprox(Eigen::Vector2d(1, 1)));
  CHECK(ps.atom_value(1, 1).isApprox(Eigen::Vector2d(1, -1)));
  CHECK(ps.atom_value(1, 2).isApprox(Eigen::Vector2d(-1, 1)));
  CHECK(ps.atom_value(1, 3).isApprox(Eigen::Vector2d(-1, -1)));
  for (int a = 0; a < 4; ++a) CHECK(ps.atom_probability(1, a) == 0.25);
}

TEST_CASE("node probability is the product of the atom probabilities on the path") {
  const PathSpace ps = build_path_space(uneven_spec());
  // Node (i, j) at stage 2 has index 3i + j.
  CHECK(ps.node_probability(2, 0) == doctest::Approx(0.3 * 0.5).epsilon(1e-15));
  CHECK(ps.node_probability(2, 1) == doctest::Approx(0.3 * 0.25).epsilon(1e-15));
  CHECK(ps.node_probability(2, 5) == doctest::Approx(0.7 * 0.25).epsilon(1e-15));
  CHECK(ps.parent(2, 4) == 1);
  CHECK(ps.child(1, 1, 2) == 5);
  CHECK(ps.incoming_atom(2, 4) == 1);
  CHECK(ps.ancestor(2, 4, 1) == 1);
  CHECK(ps.ancestor(2, 4, 0) == 0);
}

TEST_CASE("conditional expectation matches the hand-computed block averages") {
  const PathSpace ps = build_path_space(uneven_spec());
  AdaptedProcess x(ps, 2, 2, 1);
  for (Index w = 0; w < 6; ++w) x.value(2, w)(0) = static_cast<double>(w);

  const AdaptedProcess given_f1 = conditional_expectation(ps, x, 2, 1);
  CHECK(given_f1.value(1, 0)(0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(given_f1.value(1, 1)(0) == doctest::Approx(3.75).epsilon(1e-15));
  CHECK(expectation(ps, x, 2)(0, 0) == doctest::Approx(2.85).epsilon(1e-15));
}

TEST_CASE("independent steps make products of step functions multiply in expectation") {
  const PathSpace ps = build_path_space(fair_coin_spec(2));
  // X = B(1), Y = B(2), so E[XY] = E[X] E[Y] = 0 and E[X^2 Y^2] = 1.
  AdaptedProcess prod(ps, 2, 2, 1), prod_sq(ps, 2, 2, 1);
  for (Index w = 0; w < ps.node_count(2); ++w) {
    const double b1 = ps.atom_value(1, ps.incoming_atom(1, ps.ancestor(2, w, 1)))(0);
    const double b2 = ps.atom_value(2, ps.incoming_atom(2, w))(0);
    prod.value(2, w)(0) = b1 * b2;
    prod_sq.value(2, w)(0) = b1 * b1 * b2 * b2;
  }
  CHECK(expectation(ps, prod, 2)(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(expectation(ps, prod_sq, 2)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("tower property holds to 1e-12 on random trees") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const PathSpace ps = build_path_space(random_spec(rng));
    const int N = ps.horizon();
    AdaptedProcess x = random_adapted(ps, N, N, 2, 1, -3.0, 3.0, rng);
    for (int mid = 0; mid < N; ++mid) {
      const AdaptedProcess direct = conditional_expectation(ps, x, N, mid);
      AdaptedProcess through = x;
      for (int s = N; s > mid; --s) through = conditional_expectation(ps, through, s, s - 1);
      for (Index w = 0; w < ps.node_count(mid); ++w) {
        CHECK((direct.value(mid, w) - through.value(mid, w)).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
    const Eigen::MatrixXd mean = expectation(ps, x, N);
    const AdaptedProcess at_root = conditional_expectation(ps, x, N, 0);
    CHECK((mean - at_root.matrix_value(0, 0)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("matrix-valued process values round-trip through the column layout") {
  const PathSpace ps = build_path_space(fair_coin_spec(1));
  AdaptedProcess q(ps, 0, 1, 2, 3);
  Eigen::MatrixXd v(2, 3);
  v << 1, 2, 3, 4, 5, 6;
  q.set_matrix_value(1, 1, v);
  CHECK(q.matrix_value(1, 1).isApprox(v));
  CHECK(q.value(1, 1)(2) == 2.0);  // column-major: (0,1)
  Eigen::MatrixXd wrong(3, 2);
  wrong.setZero();
  CHECK_THROWS_AS(q.set_matrix_value(1, 1, wrong), ShapeMismatch);
}

TEST_CASE("sampling is deterministic in the seed and mean-converges like 1/sqrt(n)") {
  const NoiseSpec spec = fair_coin_spec(1);
  const auto a = sample_paths(spec, 5, 42);
  const auto b = sample_paths(spec, 5, 42);
  REQUIRE(a.size() == 5);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  const auto c = sample_paths(spec, 5, 43);
  bool all_equal = true;
  for (size_t i = 0; i < a.size(); ++i) all_equal = all_equal && a[i] == c[i];
  CHECK_FALSE(all_equal);

  const int n = 100000;
  const auto paths = sample_paths(spec, n, 7);
  double mean = 0.0;
  for (const auto& p : paths) mean += p(0, 0);
  mean /= n;
  // Three sigma for a fair coin at n = 1e5.
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("spec validation rejects broken probabilities and oversized trees") {
  NoiseSpec bad = fair_coin_spec(1);
  bad.steps[0][0].prob = 0.6;  // sums to 1.1
  CHECK_THROWS_AS(build_path_space(bad), BadSpec);

  NoiseSpec negative = fair_coin_spec(1);
  negative.steps[0][0].prob = -0.5;
  CHECK_THROWS_AS(build_path_space(negative), BadSpec);

  NoiseSpec ragged = fair_coin_spec(1);
  ragged.steps[0][0].value = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(build_path_space(ragged), BadSpec);

  NoiseSpec lying = fair_coin_spec(1);
  lying.steps[0][0].value(0) = 2.0;  // claims standardized but E[B] != 0
  CHECK_THROWS_AS(build_path_space(lying), BadSpec);

  CHECK_THROWS_AS(build_path_space(fair_coin_spec(30), 1 << 20), TreeTooLarge);
}

TEST_CASE("stage bounds are enforced on tree and process accessors") {
  const PathSpace ps = build_path_space(fair_coin_spec(2));
  CHECK_THROWS_AS(ps.node_count(3), StageOutOfRange);
  CHECK_THROWS_AS(ps.atom_count(0), StageOutOfRange);
  AdaptedProcess x(ps, 1, 2, 1);
  CHECK_THROWS_AS(x.stage_data(0), StageOutOfRange);
  CHECK_THROWS_AS(conditional_expectation(ps, x, 1, 2), StageOutOfRange);
}
