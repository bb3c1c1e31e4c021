#pragma once

#include <cstdint>
#include <vector>

#include "rsmp/model.hpp"
#include "rsmp/path_space.hpp"
#include "rsmp/robust.hpp"

namespace rsmp {

// Finite candidate values per stage and control component, shared by every
// node of the stage.
struct ControlGrid {
  std::vector<std::vector<std::vector<double>>> values;  // [stage][component][candidates]

  static ControlGrid linspace(const ScenarioModel& model, const std::vector<double>& lo,
                              const std::vector<double>& hi, int points);
  // Grids centered per stage on a reference control (same list at every node).
  static ControlGrid centered(const ScenarioModel& model, const AdaptedProcess& reference,
                              double radius, int points);
  double spacing(int stage, Index component) const;
};

// Lexicographic streaming enumeration of every adapted control assignment:
// slots ordered by stage, then node, then component, with the last slot
// cycling fastest. Construction throws GridTooLarge past the assignment cap.
class ControlEnumerator {
 public:
  ControlEnumerator(const PathSpace& ps, const ScenarioModel& model, const ControlGrid& grid,
                    std::uint64_t max_assignments = 10'000'000);

  std::uint64_t total() const { return total_; }
  // Writes the next assignment; false once exhausted.
  bool next(AdaptedProcess& out);
  void reset();

 private:
  struct Slot {
    int stage;
    Index node;
    Index component;
    const std::vector<double>* candidates;
  };
  const PathSpace* ps_;
  std::vector<Slot> slots_;
  std::vector<size_t> odometer_;
  std::uint64_t total_ = 0;
  bool exhausted_ = false;
  bool first_ = true;
  Index control_dim_ = 0;
  int horizon_ = 0;
};

struct BruteForceResult {
  AdaptedProcess minimizer;
  double value = 0.0;
  std::uint64_t assignment_index = 0;  // position in the enumeration order
  std::uint64_t assignments = 0;
};

// Exhaustive scan of the robust cost over the grid. Ties keep the
// lexicographically earliest assignment.
BruteForceResult brute_force_minimum(const PathSpace& ps, const ScenarioModel& model,
                                     const AmbiguitySet& set, const ControlGrid& grid,
                                     std::uint64_t max_assignments = 10'000'000);

struct CertificationReport {
  bool pass = false;
  double candidate_value = 0.0;
  double grid_minimum = 0.0;
  double margin = 0.0;  // grid_minimum - candidate_value
  std::uint64_t assignments = 0;
};

// Passes when the candidate's robust cost does not exceed the grid minimum by
// more than `slack`.
CertificationReport certify_candidate(const PathSpace& ps, const ScenarioModel& model,
                                      const AmbiguitySet& set, const ControlGrid& grid,
                                      const AdaptedProcess& candidate, double slack = 1e-6,
                                      std::uint64_t max_assignments = 10'000'000);

// Heuristic refinement: cycles through the slots, replacing each value by the
// best grid candidate with the others held fixed. Monotone in the robust cost
// but with no global guarantee; a cheap polish before certification.
AdaptedProcess coordinate_descent_refine(const PathSpace& ps, const ScenarioModel& model,
                                         const AmbiguitySet& set, const ControlGrid& grid,
                                         const AdaptedProcess& start, int sweeps = 4);

}  // namespace rsmp
