#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mlsmo/config.hpp"
#include "mlsmo/dataset.hpp"
#include "mlsmo/indicators.hpp"
#include "mlsmo/oracle.hpp"
#include "mlsmo/surrogate.hpp"
#include "mlsmo/tuning.hpp"

namespace mlsmo {

inline constexpr int kReportFormatVersion = 1;

// Candidates proposed by the optimizer for one model. ids index the predicted
// front and survive thinning and validation.
struct PredictedFront {
  std::vector<std::size_t> ids;
  Matrix designs;
  Matrix predicted;
};

struct ValidationResult {
  std::vector<std::size_t> ids;
  Matrix designs;
  Matrix predicted;
  Matrix validated;
  std::size_t candidates = 0;
  std::size_t dropped = 0;
  double simulation_rate = 0.0;
  bool all_infeasible = false;
  // Per objective MAPE of predictions against validated values (NaN when
  // undefined, e.g. no survivors).
  std::vector<double> candidate_mape;
};

// Indices of at most `cap` rows, thinned by repeatedly dropping the point
// closest to its nearest neighbour in range-normalized objective space.
std::vector<std::size_t> thin_to_cap(const Matrix& objectives, std::size_t cap);

ValidationResult validate_candidates(const PredictedFront& front, const OracleProblem& problem,
                                     std::size_t cap);

struct TuningLog {
  std::string target;  // target name, or "all" for joint models
  std::size_t best_index = 0;
  std::vector<Trial> trials;
};

struct ModelReport {
  std::string name;
  std::string kind;
  std::vector<Hyperparameters> hyperparameters;
  double cv_score = 0.0;
  std::vector<std::string> members;  // ensemble member descriptions
  std::vector<double> weights;       // ensemble weights
  std::vector<RegressionMetrics> metrics;
  std::vector<TuningLog> tuning;
  std::string model_path;
  std::string metrics_path;
  std::string residuals_path;
  std::optional<std::string> predicted_front_path;
  std::size_t front_size = 0;
  std::size_t evaluations = 0;
  std::size_t infeasible_evaluations = 0;
  std::optional<std::string> validated_front_path;
  std::optional<ValidationResult> validation;  // designs/values are not serialized
  std::optional<IndicatorRow> indicators;
};

struct DatasetProvenance {
  std::string source;  // "oracle" or "csv"
  std::string name;    // problem name or csv path
  std::string sampler;
  std::size_t rows = 0;
  std::size_t dropped_rows = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::vector<Direction> directions;
  FeatureBounds bounds;
};

struct RunReport {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string kernel_backend;
  std::optional<DatasetProvenance> dataset;
  std::vector<ModelReport> models;
  // Second cycle: models refit on train + validated candidates (retrain_cycle).
  std::vector<ModelReport> retrained;
  std::vector<std::string> importances_files;
  std::vector<std::string> pdp_files;
  std::vector<IndicatorRow> indicators;
  std::optional<std::string> indicators_path;
  std::vector<std::string> stages_completed;
  std::optional<std::pair<std::string, std::string>> error;  // stage, message
  std::map<std::string, double> timing;

  ModelReport* find_model(const std::string& name);
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

// Runs the stages in order. Single-stage entry points reload what earlier
// stages left in the output directory.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  // Everything: acquire, train, explain, optimize, validate, report.
  RunReport run();

  void generate();  // oracle -> dataset.csv only
  void train();     // acquire + split + tune/train/evaluate
  void explain();
  void optimize();
  void validate();
  void report();

  const RunReport& run_report() const noexcept { return report_; }
  void emit_report() const;

 private:
  template <typename Fn>
  void stage(const std::string& name, Fn&& fn);

  void reset_report();
  void load_previous_report();
  void ensure_split();
  void ensure_models();
  void ensure_predicted_fronts();
  void ensure_validated_fronts();

  void acquire();
  void do_split();
  void do_train();
  void do_explain();
  void do_optimize();
  void do_validate();
  void do_retrain_cycle();
  void do_report();

  const std::vector<TuneResult>& gbt_tuning();
  const TuneResult& mlp_tuning(const std::string& name);
  std::shared_ptr<const TrainedSurrogate> train_model(const std::string& name, ModelReport& entry);
  std::shared_ptr<const TrainedSurrogate> build_ensemble(ModelReport& entry);
  void persist_model(const TrainedSurrogate& model, ModelReport& entry);
  void optimize_model(const TrainedSurrogate& model, ModelReport& entry, std::uint64_t nsga_seed);
  void validate_model(const OracleProblem& problem, ModelReport& entry);

  std::filesystem::path out(const std::string& file) const;
  std::uint64_t seed(std::initializer_list<std::uint64_t> path) const;
  std::vector<Direction> directions() const;
  const std::vector<std::string>& target_names() const;

  PipelineConfig config_;
  RunReport report_;
  std::optional<TabularDataset> dataset_;
  std::optional<TabularDataset> train_;
  std::optional<TabularDataset> test_;
  std::map<std::string, std::shared_ptr<const TrainedSurrogate>> models_;
  std::map<std::string, PredictedFront> predicted_;
  std::map<std::string, ValidationResult> validated_;
  std::optional<std::vector<TuneResult>> gbt_tuning_;
  std::map<std::string, TuneResult> mlp_tuning_;
};

}  // namespace mlsmo
