#include "rsmp/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace rsmp {

ControlGrid ControlGrid::linspace(const ScenarioModel& model, const std::vector<double>& lo,
                                  const std::vector<double>& hi, int points) {
  if (points < 1) throw BadSpec("a grid needs at least one point per axis");
  if (lo.size() != static_cast<size_t>(model.control_dim) || lo.size() != hi.size()) {
    throw ShapeMismatch("grid bounds must have one entry per control component");
  }
  ControlGrid grid;
  grid.values.resize(static_cast<size_t>(model.horizon));
  for (auto& stage : grid.values) {
    stage.resize(static_cast<size_t>(model.control_dim));
    for (size_t i = 0; i < stage.size(); ++i) {
      std::vector<double>& axis = stage[i];
      if (points == 1) {
        axis = {0.5 * (lo[i] + hi[i])};
        continue;
      }
      axis.reserve(static_cast<size_t>(points));
      for (int p = 0; p < points; ++p) {
        axis.push_back(lo[i] + (hi[i] - lo[i]) * p / (points - 1));
      }
    }
  }
  return grid;
}

ControlGrid ControlGrid::centered(const ScenarioModel& model, const AdaptedProcess& reference,
                                  double radius, int points) {
  if (points < 1) throw BadSpec("a grid needs at least one point per axis");
  ControlGrid grid;
  grid.values.resize(static_cast<size_t>(model.horizon));
  for (int k = 0; k < model.horizon; ++k) {
    auto& stage = grid.values[static_cast<size_t>(k)];
    stage.resize(static_cast<size_t>(model.control_dim));
    for (Index i = 0; i < model.control_dim; ++i) {
      const double center = reference.value(k, 0)(i);
      std::vector<double>& axis = stage[static_cast<size_t>(i)];
      if (points == 1) {
        axis = {center};
        continue;
      }
      for (int p = 0; p < points; ++p) {
        axis.push_back(center - radius + 2.0 * radius * p / (points - 1));
      }
    }
  }
  return grid;
}

double ControlGrid::spacing(int stage, Index component) const {
  const auto& axis = values.at(static_cast<size_t>(stage)).at(static_cast<size_t>(component));
  if (axis.size() < 2) return 0.0;
  double widest = 0.0;
  for (size_t p = 1; p < axis.size(); ++p) widest = std::max(widest, axis[p] - axis[p - 1]);
  return widest;
}

ControlEnumerator::ControlEnumerator(const PathSpace& ps, const ScenarioModel& model,
                                     const ControlGrid& grid, std::uint64_t max_assignments)
    : ps_(&ps), control_dim_(model.control_dim), horizon_(model.horizon) {
  if (grid.values.size() != static_cast<size_t>(model.horizon)) {
    throw ShapeMismatch("grid must cover every stage");
  }
  total_ = 1;
  for (int k = 0; k < model.horizon; ++k) {
    const auto& stage = grid.values[static_cast<size_t>(k)];
    if (stage.size() != static_cast<size_t>(model.control_dim)) {
      throw ShapeMismatch("grid must cover every control component");
    }
    for (Index w = 0; w < ps.node_count(k); ++w) {
      for (Index i = 0; i < model.control_dim; ++i) {
        const auto& axis = stage[static_cast<size_t>(i)];
        if (axis.empty()) throw BadSpec("grid axis has no candidates");
        slots_.push_back({k, w, i, &axis});
        if (total_ > max_assignments / axis.size()) {
          throw GridTooLarge("grid enumerates more than " + std::to_string(max_assignments) +
                             " assignments");
        }
        total_ *= axis.size();
      }
    }
  }
  odometer_.assign(slots_.size(), 0);
}

void ControlEnumerator::reset() {
  odometer_.assign(slots_.size(), 0);
  exhausted_ = false;
  first_ = true;
}

bool ControlEnumerator::next(AdaptedProcess& out) {
  if (exhausted_) return false;
  if (first_) {
    out = AdaptedProcess(*ps_, 0, horizon_ - 1, control_dim_);
    first_ = false;
  } else {
    // Advance the odometer, last slot fastest.
    size_t pos = slots_.size();
    while (pos > 0) {
      --pos;
      if (++odometer_[pos] < slots_[pos].candidates->size()) break;
      odometer_[pos] = 0;
      if (pos == 0) {
        exhausted_ = true;
        return false;
      }
    }
  }
  for (size_t s = 0; s < slots_.size(); ++s) {
    const Slot& slot = slots_[s];
    out.value(slot.stage, slot.node)(slot.component) = (*slot.candidates)[odometer_[s]];
  }
  return true;
}

BruteForceResult brute_force_minimum(const PathSpace& ps, const ScenarioModel& model,
                                     const AmbiguitySet& set, const ControlGrid& grid,
                                     std::uint64_t max_assignments) {
  ControlEnumerator enumerator(ps, model, grid, max_assignments);
  BruteForceResult result;
  result.assignments = enumerator.total();
  AdaptedProcess u;
  std::uint64_t index = 0;
  bool found = false;
  while (enumerator.next(u)) {
    const double value = robust_cost(ps, model, set, u).value;
    if (!found || value < result.value) {
      found = true;
      result.value = value;
      result.minimizer = u;
      result.assignment_index = index;
    }
    ++index;
  }
  if (!found) throw BadSpec("grid enumerates no assignments");
  return result;
}

CertificationReport certify_candidate(const PathSpace& ps, const ScenarioModel& model,
                                      const AmbiguitySet& set, const ControlGrid& grid,
                                      const AdaptedProcess& candidate, double slack,
                                      std::uint64_t max_assignments) {
  const BruteForceResult best = brute_force_minimum(ps, model, set, grid, max_assignments);
  CertificationReport report;
  report.candidate_value = robust_cost(ps, model, set, candidate).value;
  report.grid_minimum = best.value;
  report.margin = report.grid_minimum - report.candidate_value;
  report.assignments = best.assignments;
  report.pass = report.candidate_value <= report.grid_minimum + slack;
  return report;
}

AdaptedProcess coordinate_descent_refine(const PathSpace& ps, const ScenarioModel& model,
                                         const AmbiguitySet& set, const ControlGrid& grid,
                                         const AdaptedProcess& start, int sweeps) {
  AdaptedProcess current = start;
  double current_value = robust_cost(ps, model, set, current).value;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    bool improved = false;
    for (int k = 0; k < model.horizon; ++k) {
      for (Index w = 0; w < ps.node_count(k); ++w) {
        for (Index i = 0; i < model.control_dim; ++i) {
          const auto& axis =
              grid.values.at(static_cast<size_t>(k)).at(static_cast<size_t>(i));
          double best_value = current_value;
          double best_candidate = current.value(k, w)(i);
          const double original = best_candidate;
          for (double candidate : axis) {
            if (candidate == original) continue;
            current.value(k, w)(i) = candidate;
            const double value = robust_cost(ps, model, set, current).value;
            if (value < best_value) {
              best_value = value;
              best_candidate = candidate;
            }
          }
          current.value(k, w)(i) = best_candidate;
          if (best_value < current_value) improved = true;
          current_value = best_value;
        }
      }
    }
    if (!improved) break;
  }
  return current;
}

}  // namespace rsmp
