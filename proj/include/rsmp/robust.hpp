#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "rsmp/adjoint.hpp"
#include "rsmp/model.hpp"
#include "rsmp/path_space.hpp"

namespace rsmp {

// Polytope of probability vectors over the scenario labels, given by its
// vertex list. Entries in [-1e-15, 0) are clamped to zero on construction;
// anything more negative, or a vertex sum off 1 by more than 1e-12, is
// rejected.
struct AmbiguitySet {
  std::vector<Eigen::VectorXd> vertices;
  int gamma_count() const {
    return vertices.empty() ? 0 : static_cast<int>(vertices.front().size());
  }
};

AmbiguitySet make_ambiguity_set(std::vector<Eigen::VectorXd> vertices);

// Simplex over all scenario labels: one unit vertex per label.
AmbiguitySet full_simplex(int gamma_count);

// Distance of a probability vector to the convex hull of the vertex list
// (Euclidean). Zero, up to tolerance, certifies membership.
double hull_distance(const AmbiguitySet& set, const Eigen::VectorXd& lambda);

bool contains_measure(const AmbiguitySet& set, const Eigen::VectorXd& lambda, double tol = 1e-9);

// Worst-case cost over the ambiguity polytope. Linear in the measure, so the
// maximum is attained at a vertex; ties resolve to the smallest vertex index.
struct RobustCost {
  double value = 0.0;
  int argmax_vertex = 0;
  Eigen::VectorXd scenario_costs;  // per scenario label
  Eigen::VectorXd vertex_costs;    // per vertex
};

RobustCost robust_cost(const PathSpace& ps, const ScenarioModel& model, const AmbiguitySet& set,
                       const AdaptedProcess& u);

// Vertices whose mixed cost comes within `tol` of the worst case. Their convex
// hull is the face of measures that attain the robust cost at u_star.
struct ActiveFace {
  std::vector<int> vertex_indices;
  std::vector<Eigen::VectorXd> vertices;
  double worst_value = 0.0;
};

ActiveFace active_measure_set(const PathSpace& ps, const ScenarioModel& model,
                              const AmbiguitySet& set, const AdaptedProcess& u_star,
                              double tol = 1e-9);

// Box first-order condition for the measure-averaged Hamiltonian gradient
// g(k, node) = sum_gamma lambda_gamma dH_gamma/du at u_star: per component,
// |g_i| in the interior, max(0, -g_i) at the lower bound, max(0, g_i) at the
// upper bound.
struct StationarityEntry {
  int stage = 0;
  Index node = 0;
  Index component = 0;
  double gradient = 0.0;
  double residual = 0.0;
  char bound_state = 'i';  // 'i' interior, 'l' lower, 'u' upper
};

struct StationarityReport {
  double max_residual = 0.0;
  std::vector<StationarityEntry> entries;
};

StationarityReport stationarity_residual(const PathSpace& ps, const ScenarioModel& model,
                                         const AmbiguitySet& set, const AdaptedProcess& u_star,
                                         const Eigen::VectorXd& lambda);

// Measure on the active face maximizing the certified lower bound on the
// directional derivative of the mixed cost, located by lattice scans of the
// face refined around the best cell. For bounded control boxes the inner
// minimum over directions is exact (componentwise endpoint test); otherwise
// it runs over unit steps plus seeded random directions.
struct CommonMeasureCertificate {
  Eigen::VectorXd lambda;
  double certified_inf = 0.0;
  std::vector<int> face_vertices;
  int lambda_grid_density = 0;
  int refinement_rounds = 0;
  int direction_count = 0;   // 0 when the box closed form applies
  bool exact_directions = false;
  std::string summary() const;
};

CommonMeasureCertificate find_common_reference_measure(
    const PathSpace& ps, const ScenarioModel& model, const AmbiguitySet& set,
    const AdaptedProcess& u_star, int lambda_grid_density = 33, double active_tol = 1e-6,
    int random_directions = 16, std::uint64_t seed = 7, int refinement_rounds = 40);

// Convexity-plus-stationarity certificate. Convexity is decided analytically
// for the linear-quadratic family (Q, R, S eigenvalues >= -1e-12) and the
// investment family (G positive definite, linear terminal cost); generic
// evaluator models are rejected unless assume_convex is set.
enum class SufficiencyStatus { Optimal, NotConvex, StationarityViolated, NotApplicable };

struct SufficiencyCertificate {
  SufficiencyStatus status = SufficiencyStatus::NotApplicable;
  double stationarity_residual = 0.0;
  double min_cost_curvature = 0.0;  // smallest eigenvalue seen across cost blocks
  std::string detail;
};

SufficiencyCertificate check_sufficiency(const PathSpace& ps, const ScenarioModel& model,
                                         const AmbiguitySet& set, const AdaptedProcess& u_star,
                                         const Eigen::VectorXd& lambda_star, double tol = 1e-8,
                                         bool assume_convex = false);

// Solves for the adapted control nulling the lambda-averaged Hamiltonian
// gradient at every node by probing the affine residual map slot by slot.
// Exact for linear-quadratic dynamics with quadratic costs and unconstrained
// (or ignored) boxes; throws UnsupportedFamily when the map is not affine.
AdaptedProcess solve_stationary_control(const PathSpace& ps, const ScenarioModel& model,
                                        const Eigen::VectorXd& lambda, double tol = 1e-8);

}  // namespace rsmp
