#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nbwpg/mdp.hpp"

namespace nbwpg {

// Whether a built-in model is specified completely by its source or had
// missing pieces filled in to match the published summary statistics.
enum class Provenance { full, reconstructed };

// Published summary statistics for a built-in environment. NaN or -1 marks
// values the source does not state. `tol` is the comparison tolerance the
// checks use for this environment.
struct ExpectedStats {
  std::vector<double> gains;   // distinct gains over deterministic policies
  std::vector<double> biases;  // distinct start-state biases, when all known
  int n_distinct_gains = -1;
  int n_distinct_biases = -1;
  double gain_min = std::numeric_limits<double>::quiet_NaN();
  double gain_max = std::numeric_limits<double>::quiet_NaN();
  double bias_min = std::numeric_limits<double>::quiet_NaN();
  double bias_max = std::numeric_limits<double>::quiet_NaN();
  double nbw_bias = std::numeric_limits<double>::quiet_NaN();
  int n_nbw = -1;
  double tol = 1e-9;
};

struct EnvCatalogEntry {
  std::string name;
  MdpModel model;
  Provenance provenance = Provenance::full;
  ExpectedStats expected;
  double default_beta0 = 0.1;
};

// Built-in environments A1, A2, A3, B1, B2, B3. Lookup is case insensitive
// and tolerates an "env" prefix with '_' or '-' separators ("env_a1").
EnvCatalogEntry builtin(const std::string& name);
std::vector<std::string> builtin_names();

struct DetPolicyRow {
  std::vector<int> actions;  // action index per state
  double gain = 0.0;
  double bias_s0 = 0.0;
};

struct EnumerationTable {
  std::vector<DetPolicyRow> rows;
  std::vector<double> distinct_gains;   // ascending, merged within 1e-6
  std::vector<double> distinct_biases;  // ascending, merged within 1e-6
  std::vector<std::size_t> gain_optimal_indices;
  std::vector<std::size_t> nbw_indices;  // max bias among the gain optimal
  double nbw_bias = 0.0;
};

// Exact evaluation of all 2^n deterministic policies.
EnumerationTable enumerate_deterministic(const MdpModel& mdp);

// JSON on-disk format, "format": 1. Transitions are indexed [s][a][s'],
// rewards [s][a], and every transition row must sum to 1.
EnvCatalogEntry load_env(const std::string& path);
void save_env(const EnvCatalogEntry& env, const std::string& path);

// Catalog entry for a named built-in, or a file when the name is a path.
EnvCatalogEntry resolve_env(const std::string& name_or_path);

}  // namespace nbwpg
