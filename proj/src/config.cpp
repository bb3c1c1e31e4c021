#include "rsmp/config.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "rsmp/errors.hpp"

namespace rsmp {
namespace {

using nlohmann::json;

struct Issues {
  std::vector<std::string> items;
  void add(const std::string& where, const std::string& what) {
    items.push_back(where + ": " + what);
  }
};

std::string at(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

std::string idx(const std::string& where, size_t i) {
  return where + "[" + std::to_string(i) + "]";
}

bool expect_object(const json& j, const std::string& where, Issues& issues) {
  if (j.is_object()) return true;
  issues.add(where, std::string("expected object, got ") + j.type_name());
  return false;
}

// Unknown keys are rejected at every level so typos cannot silently change a
// run.
void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed, Issues& issues) {
  if (!j.is_object()) return;
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) issues.add(at(where, item.key()), "unknown key");
  }
}

std::optional<double> read_number(const json& j, const char* key, const std::string& where,
                                  Issues& issues, bool required) {
  if (!j.contains(key)) {
    if (required) issues.add(at(where, key), "missing required key");
    return std::nullopt;
  }
  const json& v = j.at(key);
  if (!v.is_number()) {
    issues.add(at(where, key), std::string("expected number, got ") + v.type_name());
    return std::nullopt;
  }
  return v.get<double>();
}

std::optional<std::int64_t> read_integer(const json& j, const char* key, const std::string& where,
                                         Issues& issues, bool required) {
  if (!j.contains(key)) {
    if (required) issues.add(at(where, key), "missing required key");
    return std::nullopt;
  }
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    issues.add(at(where, key), std::string("expected integer, got ") + v.type_name());
    return std::nullopt;
  }
  return v.get<std::int64_t>();
}

std::optional<bool> read_bool(const json& j, const char* key, const std::string& where,
                              Issues& issues, bool required) {
  if (!j.contains(key)) {
    if (required) issues.add(at(where, key), "missing required key");
    return std::nullopt;
  }
  const json& v = j.at(key);
  if (!v.is_boolean()) {
    issues.add(at(where, key), std::string("expected boolean, got ") + v.type_name());
    return std::nullopt;
  }
  return v.get<bool>();
}

std::optional<std::string> read_string(const json& j, const char* key, const std::string& where,
                                       Issues& issues, bool required) {
  if (!j.contains(key)) {
    if (required) issues.add(at(where, key), "missing required key");
    return std::nullopt;
  }
  const json& v = j.at(key);
  if (!v.is_string()) {
    issues.add(at(where, key), std::string("expected string, got ") + v.type_name());
    return std::nullopt;
  }
  return v.get<std::string>();
}

// expected < 0 skips the length check.
std::optional<Eigen::VectorXd> as_vector(const json& v, const std::string& where, Issues& issues,
                                         Index expected = -1) {
  if (!v.is_array()) {
    issues.add(where, std::string("expected array of numbers, got ") + v.type_name());
    return std::nullopt;
  }
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  bool ok = true;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      issues.add(idx(where, i), std::string("expected number, got ") + v[i].type_name());
      ok = false;
      continue;
    }
    out[static_cast<Index>(i)] = v[i].get<double>();
  }
  if (!ok) return std::nullopt;
  if (expected >= 0 && out.size() != expected) {
    issues.add(where, "expected length " + std::to_string(expected) + ", got " +
                          std::to_string(out.size()));
    return std::nullopt;
  }
  return out;
}

std::optional<Eigen::MatrixXd> as_matrix(const json& v, const std::string& where, Issues& issues,
                                         Index rows = -1, Index cols = -1) {
  if (!v.is_array() || v.empty()) {
    issues.add(where, "expected non-empty array of rows");
    return std::nullopt;
  }
  std::vector<Eigen::VectorXd> parsed;
  parsed.reserve(v.size());
  Index width = -1;
  bool ok = true;
  for (size_t i = 0; i < v.size(); ++i) {
    auto row = as_vector(v[i], idx(where, i), issues);
    if (!row) {
      ok = false;
      continue;
    }
    if (width < 0) width = row->size();
    if (row->size() != width) {
      issues.add(idx(where, i), "ragged rows");
      ok = false;
      continue;
    }
    parsed.push_back(std::move(*row));
  }
  if (!ok) return std::nullopt;
  Eigen::MatrixXd out(static_cast<Index>(parsed.size()), width);
  for (size_t i = 0; i < parsed.size(); ++i) out.row(static_cast<Index>(i)) = parsed[i];
  if ((rows >= 0 && out.rows() != rows) || (cols >= 0 && out.cols() != cols)) {
    issues.add(where, "expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " matrix, got " + std::to_string(out.rows()) + "x" +
                          std::to_string(out.cols()));
    return std::nullopt;
  }
  return out;
}

std::optional<std::vector<Eigen::VectorXd>> as_vector_list(const json& v, const std::string& where,
                                                           Issues& issues, size_t count,
                                                           Index length) {
  if (!v.is_array()) {
    issues.add(where, std::string("expected array of arrays, got ") + v.type_name());
    return std::nullopt;
  }
  if (v.size() != count) {
    issues.add(where, "expected " + std::to_string(count) + " entries, got " +
                          std::to_string(v.size()));
    return std::nullopt;
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  bool ok = true;
  for (size_t i = 0; i < v.size(); ++i) {
    auto entry = as_vector(v[i], idx(where, i), issues, length);
    if (!entry) {
      ok = false;
      continue;
    }
    out.push_back(std::move(*entry));
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<std::vector<Eigen::MatrixXd>> as_matrix_list(const json& v, const std::string& where,
                                                           Issues& issues, size_t count, Index rows,
                                                           Index cols) {
  if (!v.is_array()) {
    issues.add(where, std::string("expected array of matrices, got ") + v.type_name());
    return std::nullopt;
  }
  if (v.size() != count) {
    issues.add(where, "expected " + std::to_string(count) + " entries, got " +
                          std::to_string(v.size()));
    return std::nullopt;
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  bool ok = true;
  for (size_t i = 0; i < v.size(); ++i) {
    auto entry = as_matrix(v[i], idx(where, i), issues, rows, cols);
    if (!entry) {
      ok = false;
      continue;
    }
    out.push_back(std::move(*entry));
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<NoiseSpec> parse_noise(const json& j, Issues& issues) {
  const std::string where = "noise";
  if (!expect_object(j, where, issues)) return std::nullopt;
  check_keys(j, where, {"horizon", "dim", "steps", "standardized"}, issues);
  auto horizon = read_integer(j, "horizon", where, issues, true);
  auto dim = read_integer(j, "dim", where, issues, true);
  if (!horizon || !dim) return std::nullopt;
  if (*horizon < 1 || *dim < 1) {
    issues.add(where, "horizon and dim must be positive");
    return std::nullopt;
  }
  NoiseSpec spec;
  spec.horizon = static_cast<int>(*horizon);
  spec.dim = static_cast<Index>(*dim);
  if (auto flag = read_bool(j, "standardized", where, issues, false)) spec.standardized = *flag;
  if (!j.contains("steps")) {
    issues.add(at(where, "steps"), "missing required key");
    return std::nullopt;
  }
  const json& steps = j.at("steps");
  if (!steps.is_array() || static_cast<int>(steps.size()) != spec.horizon) {
    issues.add(at(where, "steps"),
               "expected array of " + std::to_string(spec.horizon) + " step objects");
    return std::nullopt;
  }
  bool ok = true;
  for (size_t k = 0; k < steps.size(); ++k) {
    const std::string step_where = idx(at(where, "steps"), k);
    if (!expect_object(steps[k], step_where, issues)) {
      ok = false;
      continue;
    }
    check_keys(steps[k], step_where, {"atoms"}, issues);
    if (!steps[k].contains("atoms")) {
      issues.add(at(step_where, "atoms"), "missing required key");
      ok = false;
      continue;
    }
    const json& atoms = steps[k].at("atoms");
    if (!atoms.is_array() || atoms.empty()) {
      issues.add(at(step_where, "atoms"), "expected non-empty array");
      ok = false;
      continue;
    }
    std::vector<NoiseAtom> parsed;
    double total = 0.0;
    for (size_t a = 0; a < atoms.size(); ++a) {
      const std::string atom_where = idx(at(step_where, "atoms"), a);
      const json& atom = atoms[a];
      // An atom is the pair [[v_1, ..., v_d], p].
      if (!atom.is_array() || atom.size() != 2) {
        issues.add(atom_where, "expected [values, probability] pair");
        ok = false;
        continue;
      }
      auto value = as_vector(atom[0], atom_where + "[0]", issues, spec.dim);
      if (!atom[1].is_number()) {
        issues.add(atom_where + "[1]", "expected probability");
        ok = false;
        continue;
      }
      if (!value) {
        ok = false;
        continue;
      }
      NoiseAtom na;
      na.value = std::move(*value);
      na.prob = atom[1].get<double>();
      if (!(na.prob > 0.0) || !std::isfinite(na.prob)) {
        issues.add(atom_where + "[1]", "probability must be positive and finite");
        ok = false;
        continue;
      }
      total += na.prob;
      parsed.push_back(std::move(na));
    }
    if (!ok) continue;
    if (std::abs(total - 1.0) > 1e-12) {
      issues.add(at(step_where, "atoms"),
                 "probabilities sum to " + std::to_string(total) + ", expected 1");
      ok = false;
      continue;
    }
    spec.steps.push_back(std::move(parsed));
  }
  if (!ok) return std::nullopt;
  return spec;
}

LqStage zero_stage(Index n, Index m, Index d) {
  LqStage st;
  st.A = Eigen::MatrixXd::Zero(n, n);
  st.B = Eigen::MatrixXd::Zero(n, m);
  st.a = Eigen::VectorXd::Zero(n);
  st.C.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(n, n));
  st.D.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(n, m));
  st.c.assign(static_cast<size_t>(d), Eigen::VectorXd::Zero(n));
  st.Q = Eigen::MatrixXd::Zero(n, n);
  st.R = Eigen::MatrixXd::Zero(m, m);
  st.q = Eigen::VectorXd::Zero(n);
  st.r = Eigen::VectorXd::Zero(m);
  return st;
}

constexpr const char* kStageKeys[] = {"A", "B", "a", "C", "D", "c", "Q", "R", "q", "r"};

// Every coefficient is optional and defaults to zero, so minimal examples stay
// short. `j` may be a scenario object (flat form) or one entry of `stages`.
void parse_lq_stage_into(const json& j, const std::string& where, Index n, Index m, Index d,
                         LqStage& st, Issues& issues) {
  auto mat = [&](const char* key, Eigen::MatrixXd& dst, Index rows, Index cols) {
    if (!j.contains(key)) return;
    if (auto v = as_matrix(j.at(key), at(where, key), issues, rows, cols)) dst = std::move(*v);
  };
  auto vec = [&](const char* key, Eigen::VectorXd& dst, Index length) {
    if (!j.contains(key)) return;
    if (auto v = as_vector(j.at(key), at(where, key), issues, length)) dst = std::move(*v);
  };
  mat("A", st.A, n, n);
  mat("B", st.B, n, m);
  vec("a", st.a, n);
  if (j.contains("C")) {
    if (auto v = as_matrix_list(j.at("C"), at(where, "C"), issues, static_cast<size_t>(d), n, n))
      st.C = std::move(*v);
  }
  if (j.contains("D")) {
    if (auto v = as_matrix_list(j.at("D"), at(where, "D"), issues, static_cast<size_t>(d), n, m))
      st.D = std::move(*v);
  }
  if (j.contains("c")) {
    if (auto v = as_vector_list(j.at("c"), at(where, "c"), issues, static_cast<size_t>(d), n))
      st.c = std::move(*v);
  }
  mat("Q", st.Q, n, n);
  mat("R", st.R, m, m);
  vec("q", st.q, n);
  vec("r", st.r, m);
}

LqScenario parse_lq_scenario(const json& j, const std::string& where, Index n, Index m, Index d,
                             int horizon, Issues& issues) {
  LqScenario sc;
  sc.S = Eigen::MatrixXd::Zero(n, n);
  sc.s = Eigen::VectorXd::Zero(n);
  sc.stages.assign(static_cast<size_t>(horizon), zero_stage(n, m, d));
  if (!expect_object(j, where, issues)) return sc;
  check_keys(j, where,
             {"label", "stages", "A", "B", "a", "C", "D", "c", "Q", "R", "q", "r", "S", "s"},
             issues);
  if (auto label = read_string(j, "label", where, issues, true)) sc.label = *label;
  bool has_flat = false;
  for (const char* key : kStageKeys) has_flat = has_flat || j.contains(key);
  if (j.contains("stages")) {
    if (has_flat) {
      issues.add(where, "give coefficients either flat or under `stages`, not both");
    }
    const json& stages = j.at("stages");
    if (!stages.is_array() || static_cast<int>(stages.size()) != horizon) {
      issues.add(at(where, "stages"),
                 "expected array of " + std::to_string(horizon) + " stage objects");
    } else {
      for (size_t k = 0; k < stages.size(); ++k) {
        const std::string stage_where = idx(at(where, "stages"), k);
        if (!expect_object(stages[k], stage_where, issues)) continue;
        check_keys(stages[k], stage_where, {"A", "B", "a", "C", "D", "c", "Q", "R", "q", "r"},
                   issues);
        parse_lq_stage_into(stages[k], stage_where, n, m, d, sc.stages[k], issues);
      }
    }
  } else if (has_flat) {
    LqStage st = zero_stage(n, m, d);
    parse_lq_stage_into(j, where, n, m, d, st, issues);
    sc.stages.assign(static_cast<size_t>(horizon), st);
  }
  if (j.contains("S")) {
    if (auto v = as_matrix(j.at("S"), at(where, "S"), issues, n, n)) sc.S = std::move(*v);
  }
  if (j.contains("s")) {
    if (auto v = as_vector(j.at("s"), at(where, "s"), issues, n)) sc.s = std::move(*v);
  }
  return sc;
}

std::optional<LqFamilySpec> parse_lq(const json& j, const NoiseSpec* noise, Issues& issues) {
  const std::string where = "model.lq";
  if (!expect_object(j, where, issues)) return std::nullopt;
  check_keys(j, where,
             {"state_dim", "control_dim", "noise_dim", "horizon", "x0", "scenarios", "control_lo",
              "control_hi"},
             issues);
  auto n = read_integer(j, "state_dim", where, issues, true);
  auto m = read_integer(j, "control_dim", where, issues, true);
  auto d = read_integer(j, "noise_dim", where, issues, true);
  auto horizon = read_integer(j, "horizon", where, issues, true);
  if (!n || !m || !d || !horizon) return std::nullopt;
  if (*n < 1 || *m < 1 || *d < 1 || *horizon < 1) {
    issues.add(where, "dimensions and horizon must be positive");
    return std::nullopt;
  }
  LqFamilySpec spec;
  spec.state_dim = static_cast<Index>(*n);
  spec.control_dim = static_cast<Index>(*m);
  spec.noise_dim = static_cast<Index>(*d);
  spec.horizon = static_cast<int>(*horizon);
  if (noise) {
    if (spec.noise_dim != noise->dim) {
      issues.add(at(where, "noise_dim"), "does not match noise.dim");
    }
    if (spec.horizon != noise->horizon) {
      issues.add(at(where, "horizon"), "does not match noise.horizon");
    }
  }
  if (j.contains("x0")) {
    if (auto v = as_vector(j.at("x0"), at(where, "x0"), issues, spec.state_dim))
      spec.x0 = std::move(*v);
  } else {
    issues.add(at(where, "x0"), "missing required key");
  }
  if (!j.contains("scenarios")) {
    issues.add(at(where, "scenarios"), "missing required key");
  } else {
    const json& scenarios = j.at("scenarios");
    if (!scenarios.is_array() || scenarios.empty()) {
      issues.add(at(where, "scenarios"), "expected non-empty array");
    } else {
      for (size_t g = 0; g < scenarios.size(); ++g) {
        spec.scenarios.push_back(parse_lq_scenario(scenarios[g], idx(at(where, "scenarios"), g),
                                                   spec.state_dim, spec.control_dim,
                                                   spec.noise_dim, spec.horizon, issues));
      }
    }
  }
  // A flat bound is replicated across stages; a nested array gives one box per
  // stage. Bounds must come in pairs.
  if (j.contains("control_lo") != j.contains("control_hi")) {
    issues.add(where, "control_lo and control_hi must be given together");
  }
  auto parse_bound = [&](const char* key, std::vector<Eigen::VectorXd>& dst) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (v.is_array() && !v.empty() && v[0].is_array()) {
      if (static_cast<int>(v.size()) != spec.horizon) {
        issues.add(at(where, key),
                   "expected " + std::to_string(spec.horizon) + " per-stage bounds");
        return;
      }
      for (size_t k = 0; k < v.size(); ++k) {
        if (auto b = as_vector(v[k], idx(at(where, key), k), issues, spec.control_dim)) {
          dst.push_back(std::move(*b));
        }
      }
    } else if (auto b = as_vector(v, at(where, key), issues, spec.control_dim)) {
      dst.assign(static_cast<size_t>(spec.horizon), *b);
    }
  };
  parse_bound("control_lo", spec.control_lo);
  parse_bound("control_hi", spec.control_hi);
  return spec;
}

std::optional<InvestmentSpec> parse_investment(const json& j, const NoiseSpec* noise,
                                               Issues& issues) {
  const std::string where = "model.investment";
  if (!expect_object(j, where, issues)) return std::nullopt;
  check_keys(j, where,
             {"horizon", "stocks", "rate", "mu1", "mu2", "beta1", "beta2", "G1", "G2", "H1", "H2",
              "psi", "x0"},
             issues);
  auto horizon = read_integer(j, "horizon", where, issues, true);
  auto stocks = read_integer(j, "stocks", where, issues, true);
  if (!horizon || !stocks) return std::nullopt;
  if (*horizon < 1 || *stocks < 1) {
    issues.add(where, "horizon and stocks must be positive");
    return std::nullopt;
  }
  InvestmentSpec spec;
  spec.horizon = static_cast<int>(*horizon);
  spec.stocks = static_cast<Index>(*stocks);
  spec.noise_dim = noise ? noise->dim : 1;
  if (noise) {
    if (spec.horizon != noise->horizon) {
      issues.add(at(where, "horizon"), "does not match noise.horizon");
    }
    if (!noise->standardized) {
      issues.add("noise.standardized", "investment model requires standardized noise");
    }
  }
  const size_t steps = static_cast<size_t>(spec.horizon);
  if (j.contains("rate")) {
    if (auto v = as_vector(j.at("rate"), at(where, "rate"), issues,
                           static_cast<Index>(spec.horizon))) {
      spec.rate.assign(v->data(), v->data() + v->size());
      for (size_t k = 0; k < spec.rate.size(); ++k) {
        if (!(spec.rate[k] > 0.0)) {
          issues.add(idx(at(where, "rate"), k), "interest rate must be positive");
        }
      }
    }
  } else {
    issues.add(at(where, "rate"), "missing required key");
  }
  auto vec_table = [&](const char* key, std::vector<Eigen::VectorXd>& dst) {
    if (!j.contains(key)) {
      issues.add(at(where, key), "missing required key");
      return;
    }
    if (auto v = as_vector_list(j.at(key), at(where, key), issues, steps, spec.stocks))
      dst = std::move(*v);
  };
  auto mat_table = [&](const char* key, std::vector<Eigen::MatrixXd>& dst, Index rows,
                       Index cols) {
    if (!j.contains(key)) {
      issues.add(at(where, key), "missing required key");
      return;
    }
    if (auto v = as_matrix_list(j.at(key), at(where, key), issues, steps, rows, cols))
      dst = std::move(*v);
  };
  vec_table("mu1", spec.mu[0]);
  vec_table("mu2", spec.mu[1]);
  mat_table("beta1", spec.beta[0], spec.stocks, spec.noise_dim);
  mat_table("beta2", spec.beta[1], spec.stocks, spec.noise_dim);
  mat_table("G1", spec.G[0], spec.stocks, spec.stocks);
  mat_table("G2", spec.G[1], spec.stocks, spec.stocks);
  vec_table("psi", spec.psi);
  auto h1 = read_number(j, "H1", where, issues, true);
  auto h2 = read_number(j, "H2", where, issues, true);
  auto x0 = read_number(j, "x0", where, issues, true);
  if (h1) spec.H[0] = *h1;
  if (h2) spec.H[1] = *h2;
  if (x0) spec.x0 = *x0;
  if (h1 && !(*h1 > 0.0)) issues.add(at(where, "H1"), "must be positive");
  if (h2 && !(*h2 > 0.0)) issues.add(at(where, "H2"), "must be positive");
  if (x0 && !(*x0 > 0.0)) issues.add(at(where, "x0"), "must be positive");
  return spec;
}

void parse_ambiguity(const json& j, int scenario_count, ScenarioConfig& cfg, Issues& issues) {
  const std::string where = "ambiguity";
  if (!expect_object(j, where, issues)) return;
  check_keys(j, where, {"vertices"}, issues);
  if (!j.contains("vertices")) {
    issues.add(at(where, "vertices"), "missing required key");
    return;
  }
  const json& vertices = j.at("vertices");
  if (!vertices.is_array() || vertices.empty()) {
    issues.add(at(where, "vertices"), "expected non-empty array");
    return;
  }
  std::vector<Eigen::VectorXd> parsed;
  for (size_t i = 0; i < vertices.size(); ++i) {
    const std::string vertex_where = idx(at(where, "vertices"), i);
    auto v = as_vector(vertices[i], vertex_where, issues,
                       scenario_count > 0 ? static_cast<Index>(scenario_count) : Index{-1});
    if (!v) continue;
    if ((v->array() < -1e-15).any()) {
      issues.add(vertex_where, "weights must be nonnegative");
      continue;
    }
    if (std::abs(v->sum() - 1.0) > 1e-12) {
      issues.add(vertex_where, "weights sum to " + std::to_string(v->sum()) + ", expected 1");
      continue;
    }
    parsed.push_back(std::move(*v));
  }
  if (parsed.size() == vertices.size()) cfg.ambiguity_vertices = std::move(parsed);
}

void parse_control(const json& j, int scenario_count, Index control_dim, ControlChoice& out,
                   Issues& issues) {
  const std::string where = "run.control";
  if (!expect_object(j, where, issues)) return;
  check_keys(j, where, {"type", "value", "lambda", "theta"}, issues);
  auto type = read_string(j, "type", where, issues, true);
  if (!type) return;
  if (*type == "default") {
    out.type = ControlChoice::Type::Default;
  } else if (*type == "zero") {
    out.type = ControlChoice::Type::Zero;
  } else if (*type == "constant") {
    out.type = ControlChoice::Type::Constant;
  } else if (*type == "stationary") {
    out.type = ControlChoice::Type::Stationary;
  } else if (*type == "portfolio") {
    out.type = ControlChoice::Type::Portfolio;
  } else {
    issues.add(at(where, "type"),
               "unknown type `" + *type + "` (use zero, constant, stationary or portfolio)");
    return;
  }
  if (j.contains("value")) {
    if (out.type != ControlChoice::Type::Constant) {
      issues.add(at(where, "value"), "only meaningful for type `constant`");
    } else if (auto v = as_vector(j.at("value"), at(where, "value"), issues,
                                  control_dim >= 0 ? control_dim : Index{-1})) {
      out.value = std::move(*v);
    }
  } else if (out.type == ControlChoice::Type::Constant) {
    issues.add(at(where, "value"), "missing required key for type `constant`");
  }
  if (j.contains("lambda")) {
    if (out.type != ControlChoice::Type::Stationary) {
      issues.add(at(where, "lambda"), "only meaningful for type `stationary`");
    } else if (auto v = as_vector(j.at("lambda"), at(where, "lambda"), issues,
                                  scenario_count > 0 ? static_cast<Index>(scenario_count)
                                                     : Index{-1})) {
      if ((v->array() < -1e-15).any() || std::abs(v->sum() - 1.0) > 1e-12) {
        issues.add(at(where, "lambda"), "must be a probability vector");
      } else {
        out.lambda = std::move(*v);
      }
    }
  }
  if (j.contains("theta")) {
    if (out.type != ControlChoice::Type::Portfolio) {
      issues.add(at(where, "theta"), "only meaningful for type `portfolio`");
    } else if (auto v = read_number(j, "theta", where, issues, false)) {
      if (*v < 0.0 || *v > 1.0) {
        issues.add(at(where, "theta"), "must lie in [0, 1]");
      } else {
        out.theta = *v;
      }
    }
  }
}

void parse_run(const json& j, int scenario_count, Index control_dim, RunConfig& run,
               Issues& issues) {
  const std::string where = "run";
  if (!expect_object(j, where, issues)) return;
  check_keys(j, where,
             {"seed", "max_leaves", "tol", "deltas", "lambda_grid_density", "directions",
              "control"},
             issues);
  if (auto v = read_integer(j, "seed", where, issues, false)) {
    if (*v < 0) {
      issues.add(at(where, "seed"), "must be nonnegative");
    } else {
      run.seed = static_cast<std::uint64_t>(*v);
    }
  }
  if (auto v = read_integer(j, "max_leaves", where, issues, false)) {
    if (*v < 1) {
      issues.add(at(where, "max_leaves"), "must be positive");
    } else {
      run.max_leaves = *v;
    }
  }
  if (auto v = read_number(j, "tol", where, issues, false)) {
    if (!(*v > 0.0)) {
      issues.add(at(where, "tol"), "must be positive");
    } else {
      run.tol = *v;
    }
  }
  if (j.contains("deltas")) {
    if (auto v = as_vector(j.at("deltas"), at(where, "deltas"), issues)) {
      if ((v->array() <= 0.0).any()) {
        issues.add(at(where, "deltas"), "step sizes must be positive");
      } else {
        run.deltas.assign(v->data(), v->data() + v->size());
      }
    }
  }
  if (auto v = read_integer(j, "lambda_grid_density", where, issues, false)) {
    if (*v < 2) {
      issues.add(at(where, "lambda_grid_density"), "must be at least 2");
    } else {
      run.lambda_grid_density = static_cast<int>(*v);
    }
  }
  if (auto v = read_integer(j, "directions", where, issues, false)) {
    if (*v < 0) {
      issues.add(at(where, "directions"), "must be nonnegative");
    } else {
      run.directions = static_cast<int>(*v);
    }
  }
  if (j.contains("control")) {
    parse_control(j.at("control"), scenario_count, control_dim, run.control, issues);
  }
}

void parse_oracle(const json& j, Index control_dim, ScenarioConfig& cfg, Issues& issues) {
  const std::string where = "oracle";
  if (!expect_object(j, where, issues)) return;
  check_keys(j, where, {"grid"}, issues);
  if (!j.contains("grid")) {
    issues.add(at(where, "grid"), "missing required key");
    return;
  }
  const json& grid = j.at("grid");
  const std::string grid_where = at(where, "grid");
  if (!expect_object(grid, grid_where, issues)) return;
  check_keys(grid, grid_where, {"points", "lo", "hi"}, issues);
  OracleGridConfig out;
  if (auto v = read_integer(grid, "points", grid_where, issues, false)) {
    if (*v < 2) {
      issues.add(at(grid_where, "points"), "must be at least 2");
    } else {
      out.points = static_cast<int>(*v);
    }
  }
  if (grid.contains("lo") != grid.contains("hi")) {
    issues.add(grid_where, "lo and hi must be given together");
  }
  auto parse_edge = [&](const char* key, std::vector<double>& dst) {
    if (!grid.contains(key)) return;
    const json& v = grid.at(key);
    if (v.is_number()) {
      dst.assign(control_dim >= 0 ? static_cast<size_t>(control_dim) : size_t{1},
                 v.get<double>());
    } else if (auto vec = as_vector(v, at(grid_where, key), issues,
                                    control_dim >= 0 ? control_dim : Index{-1})) {
      dst.assign(vec->data(), vec->data() + vec->size());
    }
  };
  parse_edge("lo", out.lo);
  parse_edge("hi", out.hi);
  for (size_t i = 0; i < out.lo.size() && i < out.hi.size(); ++i) {
    if (!(out.lo[i] < out.hi[i])) {
      issues.add(grid_where, "lo must be strictly below hi in every component");
      break;
    }
  }
  cfg.oracle_grid = std::move(out);
}

json vec_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json mat_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

json vec_list_json(const std::vector<Eigen::VectorXd>& v) {
  json out = json::array();
  for (const auto& entry : v) out.push_back(vec_json(entry));
  return out;
}

json mat_list_json(const std::vector<Eigen::MatrixXd>& v) {
  json out = json::array();
  for (const auto& entry : v) out.push_back(mat_json(entry));
  return out;
}

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool same_stage(const LqStage& a, const LqStage& b) {
  if (!same(a.A, b.A) || !same(a.B, b.B) || !same(a.a, b.a) || !same(a.Q, b.Q) ||
      !same(a.R, b.R) || !same(a.q, b.q) || !same(a.r, b.r)) {
    return false;
  }
  if (a.C.size() != b.C.size() || a.D.size() != b.D.size() || a.c.size() != b.c.size()) {
    return false;
  }
  for (size_t i = 0; i < a.C.size(); ++i) {
    if (!same(a.C[i], b.C[i])) return false;
  }
  for (size_t i = 0; i < a.D.size(); ++i) {
    if (!same(a.D[i], b.D[i])) return false;
  }
  for (size_t i = 0; i < a.c.size(); ++i) {
    if (!same(a.c[i], b.c[i])) return false;
  }
  return true;
}

json stage_json(const LqStage& st) {
  json out;
  out["A"] = mat_json(st.A);
  out["B"] = mat_json(st.B);
  out["a"] = vec_json(st.a);
  out["C"] = mat_list_json(st.C);
  out["D"] = mat_list_json(st.D);
  out["c"] = vec_list_json(st.c);
  out["Q"] = mat_json(st.Q);
  out["R"] = mat_json(st.R);
  out["q"] = vec_json(st.q);
  out["r"] = vec_json(st.r);
  return out;
}

json lq_json(const LqFamilySpec& spec) {
  json out;
  out["state_dim"] = spec.state_dim;
  out["control_dim"] = spec.control_dim;
  out["noise_dim"] = spec.noise_dim;
  out["horizon"] = spec.horizon;
  out["x0"] = vec_json(spec.x0);
  json scenarios = json::array();
  for (const auto& sc : spec.scenarios) {
    bool constant = true;
    for (size_t k = 1; k < sc.stages.size(); ++k) {
      constant = constant && same_stage(sc.stages[0], sc.stages[k]);
    }
    json entry;
    if (constant && !sc.stages.empty()) {
      entry = stage_json(sc.stages[0]);
    } else {
      json stages = json::array();
      for (const auto& st : sc.stages) stages.push_back(stage_json(st));
      entry["stages"] = std::move(stages);
    }
    entry["label"] = sc.label;
    entry["S"] = mat_json(sc.S);
    entry["s"] = vec_json(sc.s);
    scenarios.push_back(std::move(entry));
  }
  out["scenarios"] = std::move(scenarios);
  if (!spec.control_lo.empty()) {
    for (const auto& b : spec.control_lo) {
      if (!b.allFinite()) throw BadSpec("control bounds with infinite entries cannot be written");
    }
    for (const auto& b : spec.control_hi) {
      if (!b.allFinite()) throw BadSpec("control bounds with infinite entries cannot be written");
    }
    bool constant = true;
    for (size_t k = 1; k < spec.control_lo.size(); ++k) {
      constant = constant && same(spec.control_lo[0], spec.control_lo[k]) &&
                 same(spec.control_hi[0], spec.control_hi[k]);
    }
    if (constant) {
      out["control_lo"] = vec_json(spec.control_lo[0]);
      out["control_hi"] = vec_json(spec.control_hi[0]);
    } else {
      out["control_lo"] = vec_list_json(spec.control_lo);
      out["control_hi"] = vec_list_json(spec.control_hi);
    }
  }
  return out;
}

json investment_json(const InvestmentSpec& spec) {
  if (!spec.stage_deterministic()) {
    throw BadSpec("per-node coefficient tables cannot be written to a configuration file");
  }
  json out;
  out["horizon"] = spec.horizon;
  out["stocks"] = spec.stocks;
  out["rate"] = json(spec.rate);
  out["mu1"] = vec_list_json(spec.mu[0]);
  out["mu2"] = vec_list_json(spec.mu[1]);
  out["beta1"] = mat_list_json(spec.beta[0]);
  out["beta2"] = mat_list_json(spec.beta[1]);
  out["G1"] = mat_list_json(spec.G[0]);
  out["G2"] = mat_list_json(spec.G[1]);
  out["H1"] = spec.H[0];
  out["H2"] = spec.H[1];
  out["psi"] = vec_list_json(spec.psi);
  out["x0"] = spec.x0;
  return out;
}

json noise_json(const NoiseSpec& spec) {
  json out;
  out["horizon"] = spec.horizon;
  out["dim"] = spec.dim;
  out["standardized"] = spec.standardized;
  json steps = json::array();
  for (const auto& step : spec.steps) {
    json atoms = json::array();
    for (const auto& atom : step) {
      atoms.push_back(json::array({vec_json(atom.value), atom.prob}));
    }
    json entry;
    entry["atoms"] = std::move(atoms);
    steps.push_back(std::move(entry));
  }
  out["steps"] = std::move(steps);
  return out;
}

json run_json(const RunConfig& run) {
  json out;
  out["seed"] = run.seed;
  out["max_leaves"] = run.max_leaves;
  out["tol"] = run.tol;
  out["deltas"] = json(run.deltas);
  out["lambda_grid_density"] = run.lambda_grid_density;
  out["directions"] = run.directions;
  if (run.control.type != ControlChoice::Type::Default) {
    json control;
    switch (run.control.type) {
      case ControlChoice::Type::Zero:
        control["type"] = "zero";
        break;
      case ControlChoice::Type::Constant:
        control["type"] = "constant";
        control["value"] = vec_json(run.control.value);
        break;
      case ControlChoice::Type::Stationary:
        control["type"] = "stationary";
        if (run.control.lambda.size() > 0) control["lambda"] = vec_json(run.control.lambda);
        break;
      case ControlChoice::Type::Portfolio:
        control["type"] = "portfolio";
        if (run.control.theta >= 0.0) control["theta"] = run.control.theta;
        break;
      case ControlChoice::Type::Default:
        break;
    }
    out["control"] = std::move(control);
  }
  return out;
}

}  // namespace

ScenarioConfig parse_scenario_json(const json& root) {
  Issues issues;
  ScenarioConfig cfg;
  if (!root.is_object()) {
    throw ValidationError({std::string("top level: expected object, got ") + root.type_name()});
  }
  check_keys(root, "", {"noise", "model", "ambiguity", "run", "oracle"}, issues);

  const NoiseSpec* noise = nullptr;
  if (!root.contains("noise")) {
    issues.add("noise", "missing required key");
  } else if (auto parsed = parse_noise(root.at("noise"), issues)) {
    cfg.noise = std::move(*parsed);
    noise = &cfg.noise;
  }

  int scenario_count = -1;
  Index control_dim = -1;
  if (!root.contains("model")) {
    issues.add("model", "missing required key");
  } else {
    const json& model = root.at("model");
    if (expect_object(model, "model", issues)) {
      check_keys(model, "model", {"lq", "investment"}, issues);
      const bool has_lq = model.contains("lq");
      const bool has_investment = model.contains("investment");
      if (has_lq == has_investment) {
        issues.add("model", "give exactly one of `lq` and `investment`");
      } else if (has_lq) {
        if (auto parsed = parse_lq(model.at("lq"), noise, issues)) {
          scenario_count = static_cast<int>(parsed->scenarios.size());
          control_dim = parsed->control_dim;
          cfg.lq = std::move(*parsed);
        }
      } else {
        if (auto parsed = parse_investment(model.at("investment"), noise, issues)) {
          scenario_count = 2;
          control_dim = parsed->stocks;
          cfg.investment = std::move(*parsed);
        }
      }
    }
  }

  if (root.contains("ambiguity")) {
    parse_ambiguity(root.at("ambiguity"), scenario_count, cfg, issues);
  }
  if (root.contains("run")) {
    parse_run(root.at("run"), scenario_count, control_dim, cfg.run, issues);
  }
  if (root.contains("oracle")) {
    parse_oracle(root.at("oracle"), control_dim, cfg, issues);
  }

  if (!issues.items.empty()) throw ValidationError(std::move(issues.items));
  return cfg;
}

ScenarioConfig parse_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_scenario_json(root);
}

json scenario_config_to_json(const ScenarioConfig& config) {
  json root;
  root["noise"] = noise_json(config.noise);
  json model;
  if (config.lq) model["lq"] = lq_json(*config.lq);
  if (config.investment) model["investment"] = investment_json(*config.investment);
  root["model"] = std::move(model);
  if (config.ambiguity_vertices) {
    json vertices = json::array();
    for (const auto& v : *config.ambiguity_vertices) vertices.push_back(vec_json(v));
    root["ambiguity"]["vertices"] = std::move(vertices);
  }
  root["run"] = run_json(config.run);
  if (config.oracle_grid) {
    json grid;
    grid["points"] = config.oracle_grid->points;
    if (!config.oracle_grid->lo.empty()) {
      grid["lo"] = json(config.oracle_grid->lo);
      grid["hi"] = json(config.oracle_grid->hi);
    }
    root["oracle"]["grid"] = std::move(grid);
  }
  return root;
}

}  // namespace rsmp
