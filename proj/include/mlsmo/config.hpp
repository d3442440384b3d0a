#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mlsmo/moo.hpp"
#include "mlsmo/oracle.hpp"

namespace mlsmo {

inline constexpr int kConfigVersion = 1;

struct DataSourceConfig {
  enum class Kind { kOracle, kCsv };
  Kind kind = Kind::kOracle;
  // oracle source
  std::string problem = "zdt1";
  Sampler sampler = Sampler::kLatinHypercube;
  std::size_t n = 1000;
  // csv source
  std::filesystem::path path;
  std::size_t n_feature_columns = 0;
  std::vector<Direction> directions;  // empty: minimize everything
};

struct TuningConfig {
  std::size_t budget = 10;
  std::size_t folds = 3;
  std::size_t ensemble_pool = 5;
  double ensemble_holdout = 0.2;
};

struct OptimizerConfig {
  std::size_t pop_size = 100;
  std::size_t generations = 200;
  double crossover_prob = 0.9;
  double eta_c = 15.0;
  double eta_m = 20.0;
  double mutation_rate = -1.0;  // negative: 1/d
};

struct ValidationConfig {
  enum class Mode { kOracle, kNone };
  Mode mode = Mode::kOracle;
  std::string problem;  // defaults to the data source problem
  std::size_t cap = 200;
};

struct XaiConfig {
  std::size_t grid_size = 20;
  std::size_t permutation_repeats = 3;
  std::size_t top_features = 3;
};

// Model names a run may list. "mlp2" is a second MLP configuration (two
// tanh hidden layers) with its own search space.
inline const std::vector<std::string>& known_model_names() {
  static const std::vector<std::string> names{"gbt", "ensemble", "mlp", "mlp2"};
  return names;
}

struct PipelineConfig {
  int config_version = kConfigVersion;
  std::uint64_t seed = 0;
  DataSourceConfig data;
  double test_fraction = 0.2;
  std::vector<std::string> models{"gbt", "ensemble", "mlp"};
  TuningConfig tuning;
  OptimizerConfig optimizer;
  ValidationConfig validation;
  XaiConfig xai;
  bool retrain_cycle = false;
  std::filesystem::path output_dir = "out";
  std::size_t threads = 1;

  // Problem used for validation, or empty when there is none.
  std::string validation_problem() const;
};

// All parse and range failures raise Error(kConfig).
PipelineConfig parse_config(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
void validate_config(const PipelineConfig& config);
// Echo used in report.json. Omits output_dir and threads, which do not
// affect results.
nlohmann::json config_to_json(const PipelineConfig& config);

}  // namespace mlsmo
