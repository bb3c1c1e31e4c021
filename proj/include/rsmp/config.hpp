#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsmp/investment.hpp"
#include "rsmp/model.hpp"
#include "rsmp/path_space.hpp"

namespace rsmp {

// How the commands obtain their candidate control.
struct ControlChoice {
  enum class Type { Default, Zero, Constant, Stationary, Portfolio };
  Type type = Type::Default;
  Eigen::VectorXd value;    // Constant
  Eigen::VectorXd lambda;   // Stationary; empty means uniform over scenarios
  double theta = -1.0;      // Portfolio; negative means solve for theta*
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::int64_t max_leaves = std::int64_t{1} << 22;
  double tol = 1e-8;
  std::vector<double> deltas = {1e-1, 5e-2, 2.5e-2, 1.25e-2};
  int lambda_grid_density = 33;
  int directions = 8;
  ControlChoice control;
};

struct OracleGridConfig {
  int points = 41;
  std::vector<double> lo, hi;  // per control component; empty means candidate +- 1
};

struct ScenarioConfig {
  NoiseSpec noise;
  std::optional<LqFamilySpec> lq;
  std::optional<InvestmentSpec> investment;
  std::optional<std::vector<Eigen::VectorXd>> ambiguity_vertices;
  RunConfig run;
  std::optional<OracleGridConfig> oracle_grid;
};

// Throws ParseError on malformed JSON and ValidationError with every schema
// violation (unknown keys included) otherwise.
ScenarioConfig parse_scenario_file(const std::filesystem::path& path);
ScenarioConfig parse_scenario_json(const nlohmann::json& root);

nlohmann::json scenario_config_to_json(const ScenarioConfig& config);

}  // namespace rsmp
