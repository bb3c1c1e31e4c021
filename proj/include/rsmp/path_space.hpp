#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "rsmp/errors.hpp"

namespace rsmp {

using Eigen::Index;

// One support point of the step-k noise together with its probability.
struct NoiseAtom {
  Eigen::VectorXd value;
  double prob = 0.0;
};

// Finite-support description of an independent noise sequence B(1..N) in R^d.
// When `standardized` is set, every step must satisfy sum p_i v_i = 0 and
// sum p_i v_i v_i^T = I (both within 1e-12).
struct NoiseSpec {
  int horizon = 0;
  Index dim = 0;
  std::vector<std::vector<NoiseAtom>> steps;  // steps[k-1] describes B(k)
  bool standardized = false;
};

// Fair coin in each of d independent components: 2^d product atoms per step,
// each with probability 2^-d. Standardized by construction.
NoiseSpec fair_coin_spec(int horizon, Index dim = 1);

// Product scenario tree. Stage-k nodes enumerate the noise prefixes
// (B(1),...,B(k)) lexicographically by atom index, so the node index is a
// mixed-radix number with the step-1 digit most significant. Children of a
// stage-k node occupy the contiguous block [node*c, (node+1)*c) at stage k+1
// where c is the step-(k+1) atom count.
class PathSpace {
 public:
  PathSpace() = default;

  const NoiseSpec& spec() const { return spec_; }
  int horizon() const { return spec_.horizon; }
  Index dim() const { return spec_.dim; }

  Index node_count(int stage) const {
    check_stage(stage, 0, horizon());
    return node_counts_[static_cast<size_t>(stage)];
  }
  Index leaf_count() const { return node_counts_.back(); }

  int atom_count(int step) const {
    check_stage(step, 1, horizon());
    return static_cast<int>(spec_.steps[static_cast<size_t>(step - 1)].size());
  }
  double atom_probability(int step, int atom) const {
    return spec_.steps[static_cast<size_t>(step - 1)][static_cast<size_t>(atom)].prob;
  }
  const Eigen::VectorXd& atom_value(int step, int atom) const {
    return spec_.steps[static_cast<size_t>(step - 1)][static_cast<size_t>(atom)].value;
  }

  Index child(int stage, Index node, int atom) const {
    return node * atom_count(stage + 1) + atom;
  }
  Index parent(int stage, Index node) const {
    check_stage(stage, 1, horizon());
    return node / atom_count(stage);
  }
  // Atom index of the step-`stage` noise on the edge entering `node`.
  int incoming_atom(int stage, Index node) const {
    check_stage(stage, 1, horizon());
    return static_cast<int>(node % atom_count(stage));
  }
  Index ancestor(int stage, Index node, int ancestor_stage) const {
    check_stage(ancestor_stage, 0, stage);
    Index a = node;
    for (int k = stage; k > ancestor_stage; --k) a = parent(k, a);
    return a;
  }

  double node_probability(int stage, Index node) const {
    check_stage(stage, 0, horizon());
    return node_probs_[static_cast<size_t>(stage)](node);
  }
  // All stage probabilities as a vector, for weighted columnwise reductions.
  const Eigen::VectorXd& stage_probabilities(int stage) const {
    check_stage(stage, 0, horizon());
    return node_probs_[static_cast<size_t>(stage)];
  }

  friend PathSpace build_path_space(const NoiseSpec& spec, std::int64_t max_leaves);

 private:
  static void check_stage(int stage, int lo, int hi) {
    if (stage < lo || stage > hi) {
      throw StageOutOfRange("stage " + std::to_string(stage) + " outside [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }

  NoiseSpec spec_;
  std::vector<Index> node_counts_;          // per stage 0..N
  std::vector<Eigen::VectorXd> node_probs_; // per stage 0..N
};

// Validates the spec (probabilities sum to one within 1e-12 per step, positive
// probabilities, consistent dimensions, standardization moments when claimed)
// and materializes node counts and probabilities. Throws BadSpec or
// TreeTooLarge.
PathSpace build_path_space(const NoiseSpec& spec, std::int64_t max_leaves = (std::int64_t{1} << 22));

// Process adapted to the tree filtration: one value per node for each stage in
// [first_stage, last_stage]. Values are rows x cols matrices stored as
// column-major columns of a per-stage (rows*cols) x node_count matrix.
class AdaptedProcess {
 public:
  AdaptedProcess() = default;
  AdaptedProcess(const PathSpace& ps, int first_stage, int last_stage,
                 Index rows, Index cols = 1);

  int first_stage() const { return first_stage_; }
  int last_stage() const { return first_stage_ + static_cast<int>(data_.size()) - 1; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index node_count(int stage) const { return stage_data(stage).cols(); }

  // Column of length rows*cols holding the node value.
  Eigen::MatrixXd::ColXpr value(int stage, Index node) {
    return stage_data(stage).col(node);
  }
  Eigen::MatrixXd::ConstColXpr value(int stage, Index node) const {
    return stage_data(stage).col(node);
  }
  // The node value viewed with its matrix shape.
  Eigen::Map<const Eigen::MatrixXd> matrix_value(int stage, Index node) const {
    return {stage_data(stage).col(node).data(), rows_, cols_};
  }
  void set_matrix_value(int stage, Index node, const Eigen::Ref<const Eigen::MatrixXd>& v) {
    if (v.rows() != rows_ || v.cols() != cols_) {
      throw ShapeMismatch("value shape " + std::to_string(v.rows()) + "x" +
                          std::to_string(v.cols()) + " does not match process shape");
    }
    stage_data(stage).col(node) = Eigen::Map<const Eigen::VectorXd>(v.eval().data(), rows_ * cols_);
  }

  Eigen::MatrixXd& stage_data(int stage) {
    return data_[checked_offset(stage)];
  }
  const Eigen::MatrixXd& stage_data(int stage) const {
    return data_[checked_offset(stage)];
  }

 private:
  size_t checked_offset(int stage) const {
    int off = stage - first_stage_;
    if (off < 0 || static_cast<size_t>(off) >= data_.size()) {
      throw StageOutOfRange("process has no stage " + std::to_string(stage));
    }
    return static_cast<size_t>(off);
  }

  int first_stage_ = 0;
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Eigen::MatrixXd> data_;
};

// E[X(stage)] as a rows x cols matrix.
Eigen::MatrixXd expectation(const PathSpace& ps, const AdaptedProcess& x, int stage);

// E[X(from_stage) | F_to_stage] as a single-stage process at to_stage.
// Requires to_stage <= from_stage.
AdaptedProcess conditional_expectation(const PathSpace& ps, const AdaptedProcess& x,
                                       int from_stage, int to_stage);

// Monte Carlo fallback: `count` independent noise paths drawn from the spec,
// each a dim x horizon matrix (column k-1 holds B(k)). Deterministic in seed.
std::vector<Eigen::MatrixXd> sample_paths(const NoiseSpec& spec, int count, std::uint64_t seed);

// Adapted process with independent uniform [lo, hi] entries, filled stage by
// stage, node by node, entry by entry. Deterministic in the generator state.
AdaptedProcess random_adapted(const PathSpace& ps, int first_stage, int last_stage,
                              Index rows, Index cols, double lo, double hi,
                              std::mt19937_64& rng);

}  // namespace rsmp
