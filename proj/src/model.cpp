#include "rsmp/model.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace rsmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool cond, const std::string& msg) {
  if (!cond) throw BadSpec(msg);
}

void check_symmetric(const Eigen::MatrixXd& M, const std::string& name) {
  require(M.rows() == M.cols(), name + " must be square");
  if ((M - M.transpose()).lpNorm<Eigen::Infinity>() > 1e-12) {
    throw BadSpec(name + " must be symmetric within 1e-12");
  }
}

}  // namespace

Eigen::VectorXd ScenarioModel::lower_bound(int stage) const {
  if (control_lo.empty()) return Eigen::VectorXd::Constant(control_dim, -kInf);
  return control_lo.at(static_cast<size_t>(stage));
}

Eigen::VectorXd ScenarioModel::upper_bound(int stage) const {
  if (control_hi.empty()) return Eigen::VectorXd::Constant(control_dim, kInf);
  return control_hi.at(static_cast<size_t>(stage));
}

bool ScenarioModel::bounded(int stage) const {
  return lower_bound(stage).allFinite() && upper_bound(stage).allFinite();
}

ScenarioModel build_lq_model(const LqFamilySpec& spec) {
  const Index n = spec.state_dim, m = spec.control_dim, d = spec.noise_dim;
  require(n >= 1 && m >= 1 && d >= 1, "state, control and noise dimensions must be positive");
  require(spec.horizon >= 1, "horizon must be at least 1");
  require(spec.x0.size() == n, "x0 has wrong dimension");
  require(!spec.scenarios.empty(), "at least one scenario is required");
  for (const auto& bounds : {spec.control_lo, spec.control_hi}) {
    if (!bounds.empty()) {
      require(bounds.size() == static_cast<size_t>(spec.horizon),
              "control bounds must cover every stage");
      for (const auto& v : bounds) require(v.size() == m, "control bound has wrong dimension");
    }
  }

  for (const auto& sc : spec.scenarios) {
    require(sc.stages.size() == static_cast<size_t>(spec.horizon),
            "scenario '" + sc.label + "' must define every stage");
    for (size_t k = 0; k < sc.stages.size(); ++k) {
      const auto& st = sc.stages[k];
      const std::string where = "scenario '" + sc.label + "' stage " + std::to_string(k);
      require(st.A.rows() == n && st.A.cols() == n, where + ": A must be n x n");
      require(st.B.rows() == n && st.B.cols() == m, where + ": B must be n x m");
      require(st.a.size() == n, where + ": a must have length n");
      require(st.C.size() == static_cast<size_t>(d) && st.D.size() == static_cast<size_t>(d) &&
                  st.c.size() == static_cast<size_t>(d),
              where + ": C, D, c must have one entry per noise component");
      for (Index i = 0; i < d; ++i) {
        require(st.C[i].rows() == n && st.C[i].cols() == n, where + ": C[i] must be n x n");
        require(st.D[i].rows() == n && st.D[i].cols() == m, where + ": D[i] must be n x m");
        require(st.c[i].size() == n, where + ": c[i] must have length n");
      }
      require(st.q.size() == n && st.r.size() == m, where + ": q, r have wrong dimension");
      check_symmetric(st.Q, where + ": Q");
      check_symmetric(st.R, where + ": R");
      require(st.Q.rows() == n && st.R.rows() == m, where + ": Q, R have wrong dimension");
    }
    check_symmetric(sc.S, "scenario '" + sc.label + "': S");
    require(sc.S.rows() == n && sc.s.size() == n,
            "scenario '" + sc.label + "': terminal cost has wrong dimension");
  }

  ScenarioModel model;
  model.state_dim = n;
  model.control_dim = m;
  model.noise_dim = d;
  model.horizon = spec.horizon;
  model.x0 = spec.x0;
  model.control_lo = spec.control_lo;
  model.control_hi = spec.control_hi;
  model.family = ModelFamily::LinearQuadratic;
  auto shared = std::make_shared<const LqFamilySpec>(spec);
  model.lq = shared;

  for (size_t g = 0; g < spec.scenarios.size(); ++g) {
    model.gamma_labels.push_back(spec.scenarios[g].label);
    const LqScenario* sc = &shared->scenarios[g];
    ScenarioCoefficients co;
    co.drift = [sc](int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
      const auto& st = sc->stages[static_cast<size_t>(k)];
      return Eigen::VectorXd(st.A * x + st.B * u + st.a);
    };
    co.diffusion = [sc, d](int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
      const auto& st = sc->stages[static_cast<size_t>(k)];
      Eigen::MatrixXd sigma(x.size(), d);
      for (Index i = 0; i < d; ++i) sigma.col(i) = st.C[i] * x + st.D[i] * u + st.c[i];
      return sigma;
    };
    co.running_cost = [sc](int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
      const auto& st = sc->stages[static_cast<size_t>(k)];
      return 0.5 * x.dot(st.Q * x) + 0.5 * u.dot(st.R * u) + st.q.dot(x) + st.r.dot(u);
    };
    co.terminal_cost = [sc](const Eigen::VectorXd& x) {
      return 0.5 * x.dot(sc->S * x) + sc->s.dot(x);
    };
    co.derivatives = [sc](int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
      const auto& st = sc->stages[static_cast<size_t>(k)];
      DerivativeBundle bundle;
      bundle.drift_dx = st.A;
      bundle.drift_du = st.B;
      bundle.diffusion_dx.assign(st.C.begin(), st.C.end());
      bundle.diffusion_du.assign(st.D.begin(), st.D.end());
      bundle.cost_dx = (st.Q * x + st.q).transpose();
      bundle.cost_du = (st.R * u + st.r).transpose();
      return bundle;
    };
    co.terminal_gradient = [sc](const Eigen::VectorXd& x) {
      return Eigen::RowVectorXd((sc->S * x + sc->s).transpose());
    };
    model.scenarios.push_back(std::move(co));
  }
  return model;
}

namespace {

void check_point(const ScenarioModel& model, int gamma, int k,
                 const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  if (k < 0 || k >= model.horizon) {
    throw StageOutOfRange("stage " + std::to_string(k) + " outside [0, " +
                          std::to_string(model.horizon - 1) + "]");
  }
  if (x.size() != model.state_dim || u.size() != model.control_dim) {
    throw ShapeMismatch("state or control has wrong dimension for scenario " +
                        std::to_string(gamma));
  }
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> eval_dynamics(const ScenarioModel& model, int gamma,
                                                          int k, const Eigen::VectorXd& x,
                                                          const Eigen::VectorXd& u) {
  check_point(model, gamma, k, x, u);
  const auto& sc = model.scenario(gamma);
  return {sc.drift(k, x, u), sc.diffusion(k, x, u)};
}

DerivativeBundle eval_derivatives(const ScenarioModel& model, int gamma, int k,
                                  const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  check_point(model, gamma, k, x, u);
  return model.scenario(gamma).derivatives(k, x, u);
}

Eigen::RowVectorXd eval_terminal_gradient(const ScenarioModel& model, int gamma,
                                          const Eigen::VectorXd& x) {
  if (x.size() != model.state_dim) throw ShapeMismatch("terminal state has wrong dimension");
  return model.scenario(gamma).terminal_gradient(x);
}

double eval_running_cost(const ScenarioModel& model, int gamma, int k,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  check_point(model, gamma, k, x, u);
  return model.scenario(gamma).running_cost(k, x, u);
}

double eval_terminal_cost(const ScenarioModel& model, int gamma, const Eigen::VectorXd& x) {
  if (x.size() != model.state_dim) throw ShapeMismatch("terminal state has wrong dimension");
  return model.scenario(gamma).terminal_cost(x);
}

AssumptionAudit validate_assumptions(const ScenarioModel& model, double L,
                                     int samples_per_stage, double radius, std::uint64_t seed) {
  AssumptionAudit audit;
  audit.constant = L;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-radius, radius);
  auto draw = [&](Index size) {
    Eigen::VectorXd v(size);
    for (Index i = 0; i < size; ++i) v(i) = unif(rng);
    return v;
  };
  auto record = [&](int gamma, int k, const std::string& what, double observed, double bound) {
    if (observed > bound) audit.violations.push_back({gamma, k, what, observed, bound});
  };

  for (int gamma = 0; gamma < model.scenario_count(); ++gamma) {
    for (int k = 0; k < model.horizon; ++k) {
      for (int s = 0; s < samples_per_stage; ++s) {
        const Eigen::VectorXd x = draw(model.state_dim), u = draw(model.control_dim);
        const Eigen::VectorXd x2 = draw(model.state_dim), u2 = draw(model.control_dim);
        const auto [b, sigma] = eval_dynamics(model, gamma, k, x, u);
        const auto [b2, sigma2] = eval_dynamics(model, gamma, k, x2, u2);
        const double growth = L * (1.0 + x.norm() + u.norm());
        record(gamma, k, "drift growth", b.norm(), growth);
        record(gamma, k, "diffusion growth", sigma.norm(), growth);
        const double dist = std::hypot((x - x2).norm(), (u - u2).norm());
        if (dist > 1e-12) {
          record(gamma, k, "drift Lipschitz", (b - b2).norm() / dist, L);
          record(gamma, k, "diffusion Lipschitz", (sigma - sigma2).norm() / dist, L);
          const double df = std::abs(eval_running_cost(model, gamma, k, x, u) -
                                     eval_running_cost(model, gamma, k, x2, u2));
          record(gamma, k, "cost Lipschitz", df / dist, L * (1.0 + x.norm() + x2.norm() +
                                                             u.norm() + u2.norm()));
        }
        if (k == 0) {
          const double dphi = std::abs(eval_terminal_cost(model, gamma, x) -
                                       eval_terminal_cost(model, gamma, x2));
          if ((x - x2).norm() > 1e-12) {
            record(gamma, model.horizon, "terminal cost Lipschitz", dphi / (x - x2).norm(),
                   L * (1.0 + x.norm() + x2.norm()));
          }
        }
      }
    }
  }
  return audit;
}

}  // namespace rsmp
