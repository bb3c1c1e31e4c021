#include "rsmp/robust.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "rsmp/investment.hpp"

namespace rsmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_measure_shape(const AmbiguitySet& set, const ScenarioModel& model) {
  if (set.vertices.empty()) throw EmptyAmbiguitySet("ambiguity set has no vertices");
  if (set.gamma_count() != model.scenario_count()) {
    throw ShapeMismatch("ambiguity set is over " + std::to_string(set.gamma_count()) +
                        " labels, model has " + std::to_string(model.scenario_count()));
  }
}

}  // namespace

AmbiguitySet make_ambiguity_set(std::vector<Eigen::VectorXd> vertices) {
  if (vertices.empty()) throw EmptyAmbiguitySet("ambiguity set needs at least one vertex");
  const Index m = vertices.front().size();
  for (auto& v : vertices) {
    if (v.size() != m) throw ShapeMismatch("ambiguity vertices have mixed lengths");
    double total = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (v(i) < 0.0) {
        if (v(i) < -1e-15) {
          throw BadSpec("ambiguity vertex entry " + std::to_string(v(i)) + " is negative");
        }
        v(i) = 0.0;
      }
      total += v(i);
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw BadSpec("ambiguity vertex sums to " + std::to_string(total) + ", expected 1");
    }
  }
  return AmbiguitySet{std::move(vertices)};
}

AmbiguitySet full_simplex(int gamma_count) {
  std::vector<Eigen::VectorXd> vertices;
  for (int g = 0; g < gamma_count; ++g) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(gamma_count);
    v(g) = 1.0;
    vertices.push_back(std::move(v));
  }
  return make_ambiguity_set(std::move(vertices));
}

double hull_distance(const AmbiguitySet& set, const Eigen::VectorXd& lambda) {
  if (set.vertices.empty()) throw EmptyAmbiguitySet("ambiguity set has no vertices");
  const Index m = set.gamma_count();
  if (lambda.size() != m) throw ShapeMismatch("measure has wrong length");
  const int V = static_cast<int>(set.vertices.size());
  // By Caratheodory, the projection onto the hull lies in the hull of at most
  // m + 1 vertices, so scanning all small subsets and solving the
  // sum-to-one-constrained least squares on each is exact.
  const int max_size = std::min<int>(V, static_cast<int>(m) + 1);
  double best = kInf;
  std::vector<int> subset;
  auto solve_subset = [&]() {
    const int s = static_cast<int>(subset.size());
    Eigen::MatrixXd Vs(m, s);
    for (int j = 0; j < s; ++j) Vs.col(j) = set.vertices[static_cast<size_t>(subset[static_cast<size_t>(j)])];
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    kkt.topLeftCorner(s, s) = 2.0 * Vs.transpose() * Vs;
    kkt.topRightCorner(s, 1).setOnes();
    kkt.bottomLeftCorner(1, s).setOnes();
    Eigen::VectorXd rhs(s + 1);
    rhs.head(s) = 2.0 * Vs.transpose() * lambda;
    rhs(s) = 1.0;
    const Eigen::VectorXd sol = kkt.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd theta = sol.head(s);
    if ((theta.array() < -1e-12).any()) return;
    if (std::abs(theta.sum() - 1.0) > 1e-9) return;
    best = std::min(best, (Vs * theta - lambda).norm());
  };
  std::function<void(int)> recurse = [&](int start) {
    if (!subset.empty()) solve_subset();
    if (static_cast<int>(subset.size()) == max_size) return;
    for (int j = start; j < V; ++j) {
      subset.push_back(j);
      recurse(j + 1);
      subset.pop_back();
    }
  };
  recurse(0);
  return best;
}

bool contains_measure(const AmbiguitySet& set, const Eigen::VectorXd& lambda, double tol) {
  return hull_distance(set, lambda) <= tol;
}

RobustCost robust_cost(const PathSpace& ps, const ScenarioModel& model, const AmbiguitySet& set,
                       const AdaptedProcess& u) {
  check_measure_shape(set, model);
  RobustCost out;
  out.scenario_costs.resize(model.scenario_count());
  for (int g = 0; g < model.scenario_count(); ++g) {
    out.scenario_costs(g) = scenario_cost(ps, model, g, u);
  }
  out.vertex_costs.resize(static_cast<Index>(set.vertices.size()));
  for (size_t v = 0; v < set.vertices.size(); ++v) {
    out.vertex_costs(static_cast<Index>(v)) = set.vertices[v].dot(out.scenario_costs);
  }
  out.argmax_vertex = 0;
  for (Index v = 1; v < out.vertex_costs.size(); ++v) {
    if (out.vertex_costs(v) > out.vertex_costs(out.argmax_vertex)) {
      out.argmax_vertex = static_cast<int>(v);
    }
  }
  out.value = out.vertex_costs(out.argmax_vertex);
  return out;
}

ActiveFace active_measure_set(const PathSpace& ps, const ScenarioModel& model,
                              const AmbiguitySet& set, const AdaptedProcess& u_star,
                              double tol) {
  const RobustCost rc = robust_cost(ps, model, set, u_star);
  ActiveFace face;
  face.worst_value = rc.value;
  for (Index v = 0; v < rc.vertex_costs.size(); ++v) {
    if (rc.vertex_costs(v) >= rc.value - tol) {
      face.vertex_indices.push_back(static_cast<int>(v));
      face.vertices.push_back(set.vertices[static_cast<size_t>(v)]);
    }
  }
  return face;
}

namespace {

// dH/du of every scenario at every node along its own trajectory under u.
std::vector<AdaptedProcess> gradient_fields(const PathSpace& ps, const ScenarioModel& model,
                                            const AdaptedProcess& u) {
  std::vector<AdaptedProcess> fields;
  fields.reserve(static_cast<size_t>(model.scenario_count()));
  for (int g = 0; g < model.scenario_count(); ++g) {
    const Trajectory traj = simulate_state(ps, model, g, u);
    const AdjointPair adj = solve_adjoint_recursive(ps, model, g, u);
    AdaptedProcess field(ps, 0, model.horizon - 1, model.control_dim);
    for (int k = 0; k < model.horizon; ++k) {
      for (Index w = 0; w < ps.node_count(k); ++w) {
        field.value(k, w) = hamiltonian_u_gradient(model, g, k, traj.state.value(k, w),
                                                   u.value(k, w), adj.P.value(k, w),
                                                   adj.Q.matrix_value(k, w));
      }
    }
    fields.push_back(std::move(field));
  }
  return fields;
}

AdaptedProcess mix_fields(const PathSpace& ps, const ScenarioModel& model,
                          const std::vector<AdaptedProcess>& fields,
                          const Eigen::VectorXd& lambda) {
  AdaptedProcess mixed(ps, 0, model.horizon - 1, model.control_dim);
  for (int k = 0; k < model.horizon; ++k) {
    for (Index g = 0; g < lambda.size(); ++g) {
      if (lambda(g) != 0.0) {
        mixed.stage_data(k) += lambda(g) * fields[static_cast<size_t>(g)].stage_data(k);
      }
    }
  }
  return mixed;
}

}  // namespace

StationarityReport stationarity_residual(const PathSpace& ps, const ScenarioModel& model,
                                         const AmbiguitySet& set, const AdaptedProcess& u_star,
                                         const Eigen::VectorXd& lambda) {
  check_measure_shape(set, model);
  if (!contains_measure(set, lambda)) {
    throw MeasureNotInSet("measure is not in the ambiguity polytope");
  }
  check_admissible(ps, model, u_star);
  const std::vector<AdaptedProcess> fields = gradient_fields(ps, model, u_star);
  const AdaptedProcess mixed = mix_fields(ps, model, fields, lambda);

  StationarityReport report;
  constexpr double kBoundTol = 1e-12;
  for (int k = 0; k < model.horizon; ++k) {
    const Eigen::VectorXd lo = model.lower_bound(k), hi = model.upper_bound(k);
    for (Index w = 0; w < ps.node_count(k); ++w) {
      for (Index i = 0; i < model.control_dim; ++i) {
        const double g = mixed.value(k, w)(i);
        const double ui = u_star.value(k, w)(i);
        const bool at_lo = std::isfinite(lo(i)) && ui <= lo(i) + kBoundTol;
        const bool at_hi = std::isfinite(hi(i)) && ui >= hi(i) - kBoundTol;
        StationarityEntry entry;
        entry.stage = k;
        entry.node = w;
        entry.component = i;
        entry.gradient = g;
        if (at_lo && at_hi) {
          entry.residual = 0.0;  // point box, nothing to optimize
          entry.bound_state = 'l';
        } else if (at_lo) {
          entry.residual = std::max(0.0, -g);
          entry.bound_state = 'l';
        } else if (at_hi) {
          entry.residual = std::max(0.0, g);
          entry.bound_state = 'u';
        } else {
          entry.residual = std::abs(g);
          entry.bound_state = 'i';
        }
        report.max_residual = std::max(report.max_residual, entry.residual);
        report.entries.push_back(entry);
      }
    }
  }
  return report;
}

namespace {

// Enumerates lattice weights (i_1..i_s)/T with sum T, lexicographically.
void simplex_lattice(int s, int T, std::vector<int>& partial,
                     const std::function<void(const std::vector<int>&)>& visit) {
  if (static_cast<int>(partial.size()) == s - 1) {
    int used = 0;
    for (int v : partial) used += v;
    partial.push_back(T - used);
    visit(partial);
    partial.pop_back();
    return;
  }
  int used = 0;
  for (int v : partial) used += v;
  for (int i = T - used; i >= 0; --i) {
    partial.push_back(i);
    simplex_lattice(s, T, partial, visit);
    partial.pop_back();
  }
}

struct DirectionPolicy {
  bool all_bounded = false;
  std::vector<AdaptedProcess> randoms;
};

// Certified lower bound on the directional derivative of the mixed cost at
// u_star over the admissible direction family.
double certified_inf_at(const PathSpace& ps, const ScenarioModel& model,
                        const AdaptedProcess& u_star, const AdaptedProcess& mixed,
                        const DirectionPolicy& policy) {
  double inf = 0.0;
  if (policy.all_bounded) {
    for (int k = 0; k < model.horizon; ++k) {
      const Eigen::VectorXd lo = model.lower_bound(k), hi = model.upper_bound(k);
      for (Index w = 0; w < ps.node_count(k); ++w) {
        const double prob = ps.node_probability(k, w);
        for (Index i = 0; i < model.control_dim; ++i) {
          const double g = mixed.value(k, w)(i);
          const double ui = u_star.value(k, w)(i);
          inf += prob * std::min(g * (lo(i) - ui), g * (hi(i) - ui));
        }
      }
    }
    return inf;
  }
  // Unit steps clipped to the box, one slot at a time.
  for (int k = 0; k < model.horizon; ++k) {
    const Eigen::VectorXd lo = model.lower_bound(k), hi = model.upper_bound(k);
    for (Index w = 0; w < ps.node_count(k); ++w) {
      const double prob = ps.node_probability(k, w);
      for (Index i = 0; i < model.control_dim; ++i) {
        const double g = mixed.value(k, w)(i);
        const double ui = u_star.value(k, w)(i);
        const double up = std::isfinite(hi(i)) ? std::min(1.0, hi(i) - ui) : 1.0;
        const double down = std::isfinite(lo(i)) ? std::max(-1.0, lo(i) - ui) : -1.0;
        inf = std::min({inf, prob * g * up, prob * g * down});
      }
    }
  }
  for (const AdaptedProcess& dir : policy.randoms) {
    double value = 0.0;
    for (int k = 0; k < model.horizon; ++k) {
      const Eigen::VectorXd lo = model.lower_bound(k), hi = model.upper_bound(k);
      for (Index w = 0; w < ps.node_count(k); ++w) {
        const double prob = ps.node_probability(k, w);
        for (Index i = 0; i < model.control_dim; ++i) {
          // Clip the draw so u* + direction stays admissible.
          const double ui = u_star.value(k, w)(i);
          const double step = std::clamp(dir.value(k, w)(i), lo(i) - ui, hi(i) - ui);
          value += prob * mixed.value(k, w)(i) * step;
        }
      }
    }
    inf = std::min(inf, value);
  }
  return inf;
}

}  // namespace

std::string CommonMeasureCertificate::summary() const {
  std::ostringstream os;
  os << "common reference measure certificate\n";
  os << "  active face vertices:";
  for (int v : face_vertices) os << ' ' << v;
  os << "\n  measure:";
  for (Index i = 0; i < lambda.size(); ++i) os << ' ' << lambda(i);
  os << "\n  lattice density per face dimension: " << lambda_grid_density;
  os << "\n  local refinement rounds: " << refinement_rounds;
  if (exact_directions) {
    os << "\n  inner minimum: exact over the control boxes (componentwise endpoint test)";
  } else {
    os << "\n  inner minimum: " << direction_count
       << " directions (clipped unit steps per node plus seeded random draws);"
       << "\n  the bound certifies only this finite family, not all admissible directions";
  }
  os << "\n  certified directional-derivative lower bound: " << certified_inf;
  os << "\n  caveat: the measure was located by a finite lattice scan with local refinement;"
     << "\n  a maximizer between lattice points is recovered only up to the refinement accuracy\n";
  return os.str();
}

CommonMeasureCertificate find_common_reference_measure(
    const PathSpace& ps, const ScenarioModel& model, const AmbiguitySet& set,
    const AdaptedProcess& u_star, int lambda_grid_density, double active_tol,
    int random_directions, std::uint64_t seed, int refinement_rounds) {
  check_measure_shape(set, model);
  if (lambda_grid_density < 2) throw BadSpec("lattice density must be at least 2");
  const ActiveFace face = active_measure_set(ps, model, set, u_star, active_tol);
  if (face.vertices.empty()) throw EmptyActiveSet("no vertex attains the robust cost");
  const int s = static_cast<int>(face.vertices.size());

  const std::vector<AdaptedProcess> fields = gradient_fields(ps, model, u_star);
  DirectionPolicy policy;
  policy.all_bounded = true;
  for (int k = 0; k < model.horizon; ++k) policy.all_bounded &= model.bounded(k);
  if (!policy.all_bounded) {
    std::mt19937_64 rng(seed);
    for (int r = 0; r < random_directions; ++r) {
      policy.randoms.push_back(
          random_adapted(ps, 0, model.horizon - 1, model.control_dim, 1, -1.0, 1.0, rng));
    }
  }

  auto lambda_of = [&](const Eigen::VectorXd& alpha) {
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(model.scenario_count());
    for (int j = 0; j < s; ++j) lambda += alpha(j) * face.vertices[static_cast<size_t>(j)];
    return lambda;
  };
  auto value_of = [&](const Eigen::VectorXd& alpha) {
    const AdaptedProcess mixed = mix_fields(ps, model, fields, lambda_of(alpha));
    return certified_inf_at(ps, model, u_star, mixed, policy);
  };

  Eigen::VectorXd best_alpha = Eigen::VectorXd::Zero(s);
  best_alpha(0) = 1.0;
  double best_value = -kInf;
  const int T = lambda_grid_density - 1;
  std::vector<int> partial;
  simplex_lattice(s, T, partial, [&](const std::vector<int>& weights) {
    Eigen::VectorXd alpha(s);
    for (int j = 0; j < s; ++j) alpha(j) = static_cast<double>(weights[static_cast<size_t>(j)]) / T;
    const double v = value_of(alpha);
    if (v > best_value) {
      best_value = v;
      best_alpha = alpha;
    }
  });

  // Pairwise exchange refinement: the certified bound is concave in the
  // measure, so 1-D ternary searches between vertex weights converge to the
  // face maximizer well below the lattice resolution.
  for (int round = 0; round < refinement_rounds && s > 1; ++round) {
    for (int a = 0; a < s; ++a) {
      for (int b = a + 1; b < s; ++b) {
        const double budget = best_alpha(a) + best_alpha(b);
        if (budget <= 0.0) continue;
        double lo = 0.0, hi = budget;
        Eigen::VectorXd trial = best_alpha;
        for (int it = 0; it < 80; ++it) {
          const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
          trial(a) = m1;
          trial(b) = budget - m1;
          const double v1 = value_of(trial);
          trial(a) = m2;
          trial(b) = budget - m2;
          const double v2 = value_of(trial);
          if (v1 < v2) {
            lo = m1;
          } else {
            hi = m2;
          }
        }
        trial(a) = 0.5 * (lo + hi);
        trial(b) = budget - trial(a);
        if (value_of(trial) > best_value) {
          best_alpha = trial;
          best_value = value_of(trial);
        }
      }
    }
  }

  CommonMeasureCertificate cert;
  cert.lambda = lambda_of(best_alpha);
  cert.certified_inf = value_of(best_alpha);
  cert.face_vertices = face.vertex_indices;
  cert.lambda_grid_density = lambda_grid_density;
  cert.refinement_rounds = refinement_rounds;
  cert.exact_directions = policy.all_bounded;
  if (!policy.all_bounded) {
    Index slots = 0;
    for (int k = 0; k < model.horizon; ++k) slots += ps.node_count(k) * model.control_dim;
    cert.direction_count = static_cast<int>(2 * slots) + random_directions;
  }
  return cert;
}

SufficiencyCertificate check_sufficiency(const PathSpace& ps, const ScenarioModel& model,
                                         const AmbiguitySet& set, const AdaptedProcess& u_star,
                                         const Eigen::VectorXd& lambda_star, double tol,
                                         bool assume_convex) {
  check_measure_shape(set, model);
  SufficiencyCertificate cert;
  cert.min_cost_curvature = kInf;

  const ActiveFace face = active_measure_set(ps, model, set, u_star, 1e-6);
  AmbiguitySet face_set;
  face_set.vertices = face.vertices;
  if (!contains_measure(face_set, lambda_star)) {
    cert.status = SufficiencyStatus::NotApplicable;
    cert.detail = "the reference measure does not lie on the active face at the candidate";
    return cert;
  }

  bool convex = true;
  auto min_eig = [](const Eigen::MatrixXd& M) {
    if (M.size() == 0) return 0.0;
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues().minCoeff();
  };
  if (model.family == ModelFamily::LinearQuadratic && model.lq) {
    for (const auto& sc : model.lq->scenarios) {
      for (const auto& st : sc.stages) {
        cert.min_cost_curvature = std::min({cert.min_cost_curvature, min_eig(st.Q), min_eig(st.R)});
      }
      cert.min_cost_curvature = std::min(cert.min_cost_curvature, min_eig(sc.S));
    }
    convex = cert.min_cost_curvature >= -1e-12;
    cert.detail = convex ? "quadratic cost blocks positive semidefinite, dynamics affine"
                         : "a quadratic cost block has a negative eigenvalue";
  } else if (model.family == ModelFamily::Investment && model.investment) {
    for (int g = 0; g < 2; ++g) {
      for (int k = 0; k < model.horizon; ++k) {
        for (Index w = 0; w < ps.node_count(k); ++w) {
          cert.min_cost_curvature =
              std::min(cert.min_cost_curvature,
                       min_eig(model.investment->tracking_weight(g, k, w)));
        }
      }
    }
    convex = cert.min_cost_curvature > 0.0;
    cert.detail = convex ? "tracking weights positive definite, terminal cost linear"
                         : "a tracking weight matrix is not positive definite";
  } else if (assume_convex) {
    cert.min_cost_curvature = std::numeric_limits<double>::quiet_NaN();
    cert.detail = "convexity assumed by caller";
  } else {
    throw UnsupportedFamily(
        "convexity cannot be decided for generic evaluator models; pass assume_convex to "
        "override");
  }

  if (!convex) {
    cert.status = SufficiencyStatus::NotConvex;
    return cert;
  }
  const StationarityReport report = stationarity_residual(ps, model, set, u_star, lambda_star);
  cert.stationarity_residual = report.max_residual;
  cert.status = report.max_residual <= tol ? SufficiencyStatus::Optimal
                                           : SufficiencyStatus::StationarityViolated;
  if (cert.status == SufficiencyStatus::StationarityViolated) {
    cert.detail += "; stationarity residual " + std::to_string(report.max_residual) +
                   " exceeds " + std::to_string(tol);
  }
  return cert;
}

AdaptedProcess solve_stationary_control(const PathSpace& ps, const ScenarioModel& model,
                                        const Eigen::VectorXd& lambda, double tol) {
  if (lambda.size() != model.scenario_count()) {
    throw ShapeMismatch("measure has wrong length");
  }
  for (int k = 0; k < model.horizon; ++k) {
    if ((model.lower_bound(k).array() > -kInf).any() ||
        (model.upper_bound(k).array() < kInf).any()) {
      throw UnsupportedFamily("the affine stationarity solve needs unconstrained controls");
    }
  }

  std::vector<std::pair<int, Index>> slots;  // (stage, node) blocks of size m
  for (int k = 0; k < model.horizon; ++k) {
    for (Index w = 0; w < ps.node_count(k); ++w) slots.emplace_back(k, w);
  }
  const Index m = model.control_dim;
  const Index dim = static_cast<Index>(slots.size()) * m;

  auto residual_of = [&](const AdaptedProcess& u) {
    const std::vector<AdaptedProcess> fields = gradient_fields(ps, model, u);
    const AdaptedProcess mixed = mix_fields(ps, model, fields, lambda);
    Eigen::VectorXd r(dim);
    for (size_t sidx = 0; sidx < slots.size(); ++sidx) {
      const auto [k, w] = slots[sidx];
      r.segment(static_cast<Index>(sidx) * m, m) = mixed.value(k, w);
    }
    return r;
  };

  AdaptedProcess u(ps, 0, model.horizon - 1, m);
  const Eigen::VectorXd h = residual_of(u);
  Eigen::MatrixXd K(dim, dim);
  for (Index j = 0; j < dim; ++j) {
    const size_t sidx = static_cast<size_t>(j / m);
    const auto [k, w] = slots[sidx];
    u.value(k, w)(j % m) = 1.0;
    K.col(j) = residual_of(u) - h;
    u.value(k, w)(j % m) = 0.0;
  }

  const Eigen::VectorXd solution = K.colPivHouseholderQr().solve(-h);
  AdaptedProcess out(ps, 0, model.horizon - 1, m);
  for (size_t sidx = 0; sidx < slots.size(); ++sidx) {
    const auto [k, w] = slots[sidx];
    out.value(k, w) = solution.segment(static_cast<Index>(sidx) * m, m);
  }
  const double check = residual_of(out).lpNorm<Eigen::Infinity>();
  if (!(check <= tol)) {
    throw UnsupportedFamily("stationarity map is not affine in the control (verification residual " +
                            std::to_string(check) + ")");
  }
  return out;
}

}  // namespace rsmp
