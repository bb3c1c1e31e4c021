#include "rsmp/path_space.hpp"

#include <cmath>
#include <limits>

namespace rsmp {

NoiseSpec fair_coin_spec(int horizon, Index dim) {
  NoiseSpec spec;
  spec.horizon = horizon;
  spec.dim = dim;
  spec.standardized = true;
  const int atoms = 1 << dim;
  std::vector<NoiseAtom> step(static_cast<size_t>(atoms));
  for (int a = 0; a < atoms; ++a) {
    Eigen::VectorXd v(dim);
    for (Index i = 0; i < dim; ++i) {
      v(i) = ((a >> (dim - 1 - i)) & 1) ? -1.0 : 1.0;
    }
    step[static_cast<size_t>(a)] = {v, 1.0 / atoms};
  }
  spec.steps.assign(static_cast<size_t>(horizon), step);
  return spec;
}

PathSpace build_path_space(const NoiseSpec& spec, std::int64_t max_leaves) {
  if (spec.horizon < 1) throw BadSpec("horizon must be at least 1");
  if (spec.dim < 1) throw BadSpec("noise dimension must be at least 1");
  if (spec.steps.size() != static_cast<size_t>(spec.horizon)) {
    throw BadSpec("expected " + std::to_string(spec.horizon) + " noise steps, got " +
                  std::to_string(spec.steps.size()));
  }
  constexpr double kTol = 1e-12;
  for (int k = 1; k <= spec.horizon; ++k) {
    const auto& atoms = spec.steps[static_cast<size_t>(k - 1)];
    if (atoms.empty()) throw BadSpec("step " + std::to_string(k) + " has no atoms");
    double total = 0.0;
    for (const auto& atom : atoms) {
      if (atom.value.size() != spec.dim) {
        throw BadSpec("step " + std::to_string(k) + " atom has dimension " +
                      std::to_string(atom.value.size()) + ", expected " +
                      std::to_string(spec.dim));
      }
      if (!atom.value.allFinite() || !std::isfinite(atom.prob)) {
        throw BadSpec("step " + std::to_string(k) + " atom is not finite");
      }
      if (atom.prob <= 0.0) {
        throw BadSpec("step " + std::to_string(k) + " atom probability must be positive");
      }
      total += atom.prob;
    }
    if (std::abs(total - 1.0) > kTol) {
      throw BadSpec("step " + std::to_string(k) + " probabilities sum to " +
                    std::to_string(total) + ", expected 1");
    }
    if (spec.standardized) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(spec.dim);
      Eigen::MatrixXd second = Eigen::MatrixXd::Zero(spec.dim, spec.dim);
      for (const auto& atom : atoms) {
        mean += atom.prob * atom.value;
        second += atom.prob * atom.value * atom.value.transpose();
      }
      if (mean.lpNorm<Eigen::Infinity>() > kTol ||
          (second - Eigen::MatrixXd::Identity(spec.dim, spec.dim)).lpNorm<Eigen::Infinity>() > kTol) {
        throw BadSpec("step " + std::to_string(k) +
                      " violates the standardization moments (zero mean, identity second moment)");
      }
    }
  }

  PathSpace ps;
  ps.spec_ = spec;
  ps.node_counts_.assign(static_cast<size_t>(spec.horizon) + 1, 1);
  std::int64_t count = 1;
  for (int k = 1; k <= spec.horizon; ++k) {
    count *= static_cast<std::int64_t>(spec.steps[static_cast<size_t>(k - 1)].size());
    if (count > max_leaves) {
      throw TreeTooLarge("stage " + std::to_string(k) + " already has " + std::to_string(count) +
                         " nodes, budget is " + std::to_string(max_leaves));
    }
    ps.node_counts_[static_cast<size_t>(k)] = static_cast<Index>(count);
  }

  ps.node_probs_.resize(static_cast<size_t>(spec.horizon) + 1);
  ps.node_probs_[0] = Eigen::VectorXd::Ones(1);
  for (int k = 1; k <= spec.horizon; ++k) {
    const auto& atoms = spec.steps[static_cast<size_t>(k - 1)];
    const Eigen::VectorXd& prev = ps.node_probs_[static_cast<size_t>(k - 1)];
    Eigen::VectorXd cur(ps.node_counts_[static_cast<size_t>(k)]);
    Index j = 0;
    for (Index w = 0; w < prev.size(); ++w) {
      for (const auto& atom : atoms) cur(j++) = prev(w) * atom.prob;
    }
    ps.node_probs_[static_cast<size_t>(k)] = std::move(cur);
  }
  return ps;
}

AdaptedProcess::AdaptedProcess(const PathSpace& ps, int first_stage, int last_stage,
                               Index rows, Index cols)
    : first_stage_(first_stage), rows_(rows), cols_(cols) {
  if (first_stage < 0 || last_stage > ps.horizon() || first_stage > last_stage) {
    throw StageOutOfRange("process range [" + std::to_string(first_stage) + ", " +
                          std::to_string(last_stage) + "] invalid for horizon " +
                          std::to_string(ps.horizon()));
  }
  if (rows < 1 || cols < 1) throw ShapeMismatch("process values must be non-empty");
  data_.reserve(static_cast<size_t>(last_stage - first_stage + 1));
  for (int k = first_stage; k <= last_stage; ++k) {
    data_.emplace_back(Eigen::MatrixXd::Zero(rows * cols, ps.node_count(k)));
  }
}

Eigen::MatrixXd expectation(const PathSpace& ps, const AdaptedProcess& x, int stage) {
  const Eigen::VectorXd mean = x.stage_data(stage) * ps.stage_probabilities(stage);
  return Eigen::Map<const Eigen::MatrixXd>(mean.data(), x.rows(), x.cols());
}

AdaptedProcess conditional_expectation(const PathSpace& ps, const AdaptedProcess& x,
                                       int from_stage, int to_stage) {
  if (to_stage > from_stage) {
    throw StageOutOfRange("conditioning stage must not exceed the value stage");
  }
  AdaptedProcess out(ps, to_stage, to_stage, x.rows(), x.cols());
  const Eigen::MatrixXd& source = x.stage_data(from_stage);
  // Descendants of a stage-to node form a contiguous block; their conditional
  // probabilities are products of the step probabilities on the connecting path.
  Index block = 1;
  for (int k = to_stage + 1; k <= from_stage; ++k) block *= ps.atom_count(k);
  Eigen::VectorXd cond_probs = Eigen::VectorXd::Ones(block);
  for (int k = to_stage + 1; k <= from_stage; ++k) {
    Index repeat = 1;
    for (int j = k + 1; j <= from_stage; ++j) repeat *= ps.atom_count(j);
    Index i = 0;
    while (i < block) {
      for (int a = 0; a < ps.atom_count(k); ++a) {
        const double p = ps.atom_probability(k, a);
        for (Index r = 0; r < repeat; ++r) cond_probs(i++) *= p;
      }
    }
  }
  Eigen::MatrixXd& target = out.stage_data(to_stage);
  for (Index w = 0; w < target.cols(); ++w) {
    target.col(w) = source.middleCols(w * block, block) * cond_probs;
  }
  return out;
}

std::vector<Eigen::MatrixXd> sample_paths(const NoiseSpec& spec, int count, std::uint64_t seed) {
  // Validates the spec as a side effect; the tree itself is not needed.
  build_path_space(spec, std::numeric_limits<std::int64_t>::max());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::MatrixXd> paths;
  paths.reserve(static_cast<size_t>(count));
  for (int s = 0; s < count; ++s) {
    Eigen::MatrixXd path(spec.dim, spec.horizon);
    for (int k = 1; k <= spec.horizon; ++k) {
      const auto& atoms = spec.steps[static_cast<size_t>(k - 1)];
      // Inverse CDF over the atom list keeps the draw reproducible across
      // standard library implementations.
      double u = unif(rng);
      size_t pick = atoms.size() - 1;
      double acc = 0.0;
      for (size_t a = 0; a < atoms.size(); ++a) {
        acc += atoms[a].prob;
        if (u <= acc) {
          pick = a;
          break;
        }
      }
      path.col(k - 1) = atoms[pick].value;
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

AdaptedProcess random_adapted(const PathSpace& ps, int first_stage, int last_stage,
                              Index rows, Index cols, double lo, double hi,
                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(lo, hi);
  AdaptedProcess out(ps, first_stage, last_stage, rows, cols);
  for (int k = first_stage; k <= last_stage; ++k) {
    Eigen::MatrixXd& data = out.stage_data(k);
    for (Index w = 0; w < data.cols(); ++w) {
      for (Index i = 0; i < data.rows(); ++i) data(i, w) = unif(rng);
    }
  }
  return out;
}

}  // namespace rsmp
