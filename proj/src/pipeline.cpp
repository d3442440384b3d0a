#include "mlsmo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mlsmo/error.hpp"
#include "mlsmo/kernels.hpp"
#include "mlsmo/moo.hpp"
#include "mlsmo/parallel.hpp"
#include "mlsmo/xai.hpp"

namespace mlsmo {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Seed stream tags; every random draw in a run descends from the config seed.
constexpr std::uint64_t kTagData = 1;
constexpr std::uint64_t kTagSplit = 2;
constexpr std::uint64_t kTagTune = 3;
constexpr std::uint64_t kTagFit = 4;
constexpr std::uint64_t kTagEnsemble = 5;
constexpr std::uint64_t kTagXai = 6;
constexpr std::uint64_t kTagNsga = 7;
constexpr std::uint64_t kTagRetrain = 8;
// Distinct from every model code, so it never collides with the per-model xai streams.
constexpr std::uint64_t kTagPdpBackground = 1000;
constexpr std::size_t kMaxPdpBackground = 10000;

std::uint64_t model_code(const std::string& name) {
  const auto& names = known_model_names();
  return static_cast<std::uint64_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

std::string base_model_name(const std::string& name) {
  const std::string suffix = "_retrained";
  if (name.size() > suffix.size() && name.ends_with(suffix)) {
    return name.substr(0, name.size() - suffix.size());
  }
  return name;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void write_metrics_csv(const fs::path& path, const std::vector<std::string>& targets,
                       const std::vector<RegressionMetrics>& metrics) {
  std::ostringstream out;
  out << "target,mape,mse,evaluated_rows,excluded_zero_targets\n";
  for (std::size_t t = 0; t < metrics.size(); ++t) {
    out << targets[t] << ',' << format_double(metrics[t].mape) << ','
        << format_double(metrics[t].mse) << ',' << metrics[t].residuals.size() << ','
        << metrics[t].excluded_zero_targets << '\n';
  }
  write_text(path, out.str());
}

void write_residuals_csv(const fs::path& path, const std::vector<std::string>& targets,
                         const std::vector<RegressionMetrics>& metrics) {
  std::ostringstream out;
  out << "target,residual\n";
  for (std::size_t t = 0; t < metrics.size(); ++t) {
    for (double r : metrics[t].residuals) out << targets[t] << ',' << format_double(r) << '\n';
  }
  write_text(path, out.str());
}

std::vector<std::string> front_header(std::size_t d, const std::vector<std::string>& targets,
                                      bool with_validated) {
  std::vector<std::string> header{"id"};
  for (std::size_t j = 0; j < d; ++j) header.push_back("x_" + std::to_string(j));
  for (const auto& t : targets) header.push_back("pred_" + t);
  if (with_validated) {
    for (const auto& t : targets) header.push_back("val_" + t);
  }
  return header;
}

void write_front(const fs::path& path, const std::vector<std::size_t>& ids, const Matrix& designs,
                 const Matrix& predicted, const Matrix* validated,
                 const std::vector<std::string>& targets) {
  const std::size_t d = designs.cols();
  NumericTable table;
  table.header = front_header(d, targets, validated != nullptr);
  table.values = Matrix(0, table.header.size());
  std::vector<double> row(table.header.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::size_t c = 0;
    row[c++] = static_cast<double>(ids[i]);
    for (double v : designs.row(i)) row[c++] = v;
    for (double v : predicted.row(i)) row[c++] = v;
    if (validated != nullptr) {
      for (double v : validated->row(i)) row[c++] = v;
    }
    table.values.append_row(row);
  }
  write_numeric_csv(path, table);
}

struct FrontFile {
  std::vector<std::size_t> ids;
  Matrix designs;
  Matrix predicted;
  Matrix validated;
};

FrontFile read_front(const fs::path& path, std::size_t d, const std::vector<std::string>& targets,
                     bool with_validated) {
  const NumericTable table = read_numeric_csv(path);
  if (table.header != front_header(d, targets, with_validated)) {
    throw Error(ErrorCode::kParse, path.string() + ": unexpected front header");
  }
  const std::size_t m = targets.size();
  FrontFile f;
  f.designs = Matrix(table.values.rows(), d);
  f.predicted = Matrix(table.values.rows(), m);
  if (with_validated) f.validated = Matrix(table.values.rows(), m);
  for (std::size_t i = 0; i < table.values.rows(); ++i) {
    f.ids.push_back(static_cast<std::size_t>(table.values(i, 0)));
    for (std::size_t j = 0; j < d; ++j) f.designs(i, j) = table.values(i, 1 + j);
    for (std::size_t j = 0; j < m; ++j) f.predicted(i, j) = table.values(i, 1 + d + j);
    if (with_validated) {
      for (std::size_t j = 0; j < m; ++j) f.validated(i, j) = table.values(i, 1 + d + m + j);
    }
  }
  return f;
}

}  // namespace

// ---------------------------------------------------------------- validation

std::vector<std::size_t> thin_to_cap(const Matrix& objectives, std::size_t cap) {
  const std::size_t n = objectives.rows();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n <= cap) return all;
  if (cap == 0) throw Error(ErrorCode::kInvalidArgument, "thinning cap must be >= 1");

  const std::size_t m = objectives.cols();
  Matrix z = objectives;
  for (std::size_t j = 0; j < m; ++j) {
    double lo = objectives(0, j);
    double hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, objectives(i, j));
      hi = std::max(hi, objectives(i, j));
    }
    const double range = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < n; ++i) z(i, j) = (objectives(i, j) - lo) / range;
  }

  std::vector<bool> alive(n, true);
  std::vector<double> nn_dist(n);
  std::vector<std::size_t> nn(n);
  const auto refresh = [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !alive[j]) continue;
      const double dist = kernels::squared_distance(z.row(i), z.row(j));
      if (dist < best) {
        best = dist;
        arg = j;
      }
    }
    nn_dist[i] = best;
    nn[i] = arg;
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  // Drop the most crowded point; on ties the later index goes first.
  for (std::size_t count = n; count > cap; --count) {
    std::size_t victim = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && (victim == n || nn_dist[i] <= nn_dist[victim])) victim = i;
    }
    alive[victim] = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && nn[i] == victim) refresh(i);
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) kept.push_back(i);
  }
  return kept;
}

ValidationResult validate_candidates(const PredictedFront& front, const OracleProblem& problem,
                                     std::size_t cap) {
  if (front.designs.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidates to validate");
  if (front.ids.size() != front.designs.rows() || front.predicted.rows() != front.designs.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "front ids/designs/predictions differ in length");
  }
  if (front.designs.cols() != problem.n_features() ||
      front.predicted.cols() != problem.n_objectives()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "front shape does not match problem '" + problem.name() + "'");
  }
  const std::size_t d = problem.n_features();
  const std::size_t m = problem.n_objectives();
  const std::vector<std::size_t> keep = thin_to_cap(front.predicted, cap);
  const Matrix designs = front.designs.select_rows(keep);
  const std::vector<EvaluationOutcome> outcomes = evaluate_batch(problem, designs);

  ValidationResult r;
  r.candidates = keep.size();
  r.designs = Matrix(0, d);
  r.predicted = Matrix(0, m);
  r.validated = Matrix(0, m);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (!outcomes[k].feasible()) continue;
    r.ids.push_back(front.ids[keep[k]]);
    r.designs.append_row(designs.row(k));
    r.predicted.append_row(front.predicted.row(keep[k]));
    r.validated.append_row(outcomes[k].objectives);
  }
  r.dropped = r.candidates - r.ids.size();
  r.simulation_rate = simulation_rate(r.candidates, r.ids.size());
  r.all_infeasible = r.ids.empty();
  r.candidate_mape.assign(m, std::numeric_limits<double>::quiet_NaN());
  if (!r.all_infeasible) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::vector<double> truth = r.validated.column(j);
      const std::vector<double> pred = r.predicted.column(j);
      try {
        r.candidate_mape[j] = regression_metrics(truth, pred).mape;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUndefinedMape) throw;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------- pipeline

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  validate_config(config_);
  set_worker_count(config_.threads);
  reset_report();
}

void Pipeline::reset_report() {
  report_ = RunReport{};
  report_.config = config_to_json(config_);
  report_.seed = config_.seed;
  report_.kernel_backend = std::string(kernels::backend_name(kernels::active_backend()));
}

fs::path Pipeline::out(const std::string& file) const { return config_.output_dir / file; }

std::uint64_t Pipeline::seed(std::initializer_list<std::uint64_t> path) const {
  return derive_seed(config_.seed, path);
}

std::vector<Direction> Pipeline::directions() const { return report_.dataset->directions; }

const std::vector<std::string>& Pipeline::target_names() const {
  return report_.dataset->target_names;
}

void Pipeline::emit_report() const {
  fs::create_directories(config_.output_dir);
  write_text(out("report.json"), report_to_json(report_).dump(2) + "\n");
}

template <typename Fn>
void Pipeline::stage(const std::string& name, Fn&& fn) {
  const auto start = Clock::now();
  try {
    fs::create_directories(config_.output_dir);
    fn();
  } catch (const std::exception& e) {
    report_.error = std::make_pair(name, std::string(e.what()));
    report_.timing[name] = seconds_since(start);
    try {
      emit_report();
    } catch (const std::exception&) {
      // The original failure is the one worth reporting.
    }
    throw Error(ErrorCode::kStage, "stage '" + name + "' failed: " + e.what());
  }
  report_.timing[name] = seconds_since(start);
  auto& done = report_.stages_completed;
  done.erase(std::remove(done.begin(), done.end(), name), done.end());
  done.push_back(name);
  report_.error.reset();
  emit_report();
}

RunReport Pipeline::run() {
  reset_report();
  stage("acquire", [&] {
    acquire();
    do_split();
  });
  stage("train", [&] { do_train(); });
  stage("explain", [&] { do_explain(); });
  stage("optimize", [&] { do_optimize(); });
  if (!config_.validation_problem().empty()) {
    stage("validate", [&] { do_validate(); });
    if (config_.retrain_cycle) stage("retrain", [&] { do_retrain_cycle(); });
  }
  stage("report", [&] { do_report(); });
  return report_;
}

void Pipeline::generate() {
  if (config_.data.kind != DataSourceConfig::Kind::kOracle) {
    throw Error(ErrorCode::kConfig, "generate needs an oracle data source");
  }
  reset_report();
  stage("acquire", [&] { acquire(); });
}

void Pipeline::train() {
  reset_report();
  stage("acquire", [&] {
    acquire();
    do_split();
  });
  stage("train", [&] { do_train(); });
}

void Pipeline::explain() {
  stage("explain", [&] {
    load_previous_report();
    ensure_split();
    ensure_models();
    do_explain();
  });
}

void Pipeline::optimize() {
  stage("optimize", [&] {
    load_previous_report();
    ensure_split();
    ensure_models();
    do_optimize();
  });
}

void Pipeline::validate() {
  if (config_.validation_problem().empty()) {
    throw Error(ErrorCode::kConfig, "validation mode is none; nothing to validate");
  }
  stage("validate", [&] {
    load_previous_report();
    ensure_split();
    ensure_predicted_fronts();
    do_validate();
  });
}

void Pipeline::report() {
  stage("report", [&] {
    load_previous_report();
    ensure_split();
    ensure_validated_fronts();
    do_report();
  });
}

// ---------------------------------------------------------------- resume

void Pipeline::load_previous_report() {
  const fs::path path = out("report.json");
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingFile, "no report.json in " + config_.output_dir.string() +
                                             "; run the train stage first");
  }
  std::ifstream in(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  RunReport previous = report_from_json(doc);
  const nlohmann::json current = config_to_json(config_);
  for (const char* key : {"seed", "data", "split", "models", "tuning"}) {
    if (previous.config.value(key, nlohmann::json()) != current.at(key)) {
      throw Error(ErrorCode::kConfig, std::string("config '") + key +
                                          "' differs from the run recorded in report.json");
    }
  }
  if (!previous.dataset) throw Error(ErrorCode::kStage, "report.json has no dataset; run train");
  previous.config = current;
  previous.kernel_backend = report_.kernel_backend;
  previous.error.reset();
  report_ = std::move(previous);
}

void Pipeline::ensure_split() {
  if (train_ && test_ && dataset_) return;
  const std::size_t d = report_.dataset->feature_names.size();
  dataset_.emplace(load_csv(out("dataset.csv"), d).dataset);
  train_.emplace(load_csv(out("train.csv"), d).dataset);
  test_.emplace(load_csv(out("test.csv"), d).dataset);
}

void Pipeline::ensure_models() {
  if (report_.models.empty()) throw Error(ErrorCode::kStage, "no trained models; run train");
  for (const auto& entry : report_.models) {
    if (!models_.count(entry.name)) models_[entry.name] = load_surrogate(out(entry.model_path));
  }
}

void Pipeline::ensure_predicted_fronts() {
  for (const auto& entry : report_.models) {
    if (predicted_.count(entry.name)) continue;
    if (!entry.predicted_front_path) {
      throw Error(ErrorCode::kStage, "model '" + entry.name + "' has no front; run optimize");
    }
    FrontFile f = read_front(out(*entry.predicted_front_path), train_->n_features(),
                             target_names(), false);
    predicted_[entry.name] = PredictedFront{std::move(f.ids), std::move(f.designs),
                                            std::move(f.predicted)};
  }
}

void Pipeline::ensure_validated_fronts() {
  const auto load = [&](const ModelReport& entry) {
    if (validated_.count(entry.name) || !entry.validation || !entry.validated_front_path) return;
    FrontFile f = read_front(out(*entry.validated_front_path), train_->n_features(),
                             target_names(), true);
    ValidationResult v = *entry.validation;
    v.ids = std::move(f.ids);
    v.designs = std::move(f.designs);
    v.predicted = std::move(f.predicted);
    v.validated = std::move(f.validated);
    validated_[entry.name] = std::move(v);
  };
  for (const auto& entry : report_.models) load(entry);
  for (const auto& entry : report_.retrained) load(entry);
}

// ---------------------------------------------------------------- stages

void Pipeline::acquire() {
  DatasetProvenance prov;
  std::vector<Direction> dirs = config_.data.directions;
  if (config_.data.kind == DataSourceConfig::Kind::kOracle) {
    const auto problem = make_problem(config_.data.problem);
    GeneratedDataset gen =
        generate_dataset(*problem, config_.data.sampler, config_.data.n, seed({kTagData}));
    prov.source = "oracle";
    prov.name = problem->name();
    prov.sampler = std::string(sampler_name(config_.data.sampler));
    prov.dropped_rows = gen.dropped_rows;
    prov.bounds = problem->bounds();
    if (dirs.empty()) dirs = problem->directions();
    dataset_.emplace(std::move(gen.dataset));
  } else {
    LoadResult loaded = load_csv(config_.data.path, config_.data.n_feature_columns);
    prov.source = "csv";
    prov.name = config_.data.path.generic_string();
    prov.dropped_rows = loaded.dropped_rows;
    prov.bounds = FeatureBounds::from_data(loaded.dataset.features());
    dataset_.emplace(std::move(loaded.dataset));
  }
  if (dirs.empty()) dirs.assign(dataset_->n_targets(), Direction::kMinimize);
  if (dirs.size() != dataset_->n_targets()) {
    throw Error(ErrorCode::kDimensionMismatch, "data.directions has " +
                                                   std::to_string(dirs.size()) + " entries for " +
                                                   std::to_string(dataset_->n_targets()) + " targets");
  }
  prov.rows = dataset_->rows();
  prov.feature_names = dataset_->feature_names();
  prov.target_names = dataset_->target_names();
  prov.directions = std::move(dirs);
  write_csv(out("dataset.csv"), *dataset_);
  report_.dataset = std::move(prov);
}

void Pipeline::do_split() {
  Split s = split(*dataset_, config_.test_fraction, seed({kTagSplit}));
  write_csv(out("train.csv"), s.train);
  write_csv(out("test.csv"), s.test);
  report_.dataset->train_rows = s.train.rows();
  report_.dataset->test_rows = s.test.rows();
  train_.emplace(std::move(s.train));
  test_.emplace(std::move(s.test));
}

const std::vector<TuneResult>& Pipeline::gbt_tuning() {
  if (!gbt_tuning_) {
    std::vector<TuneResult> results;
    for (std::size_t t = 0; t < train_->n_targets(); ++t) {
      results.push_back(tune(train_->select_target(t), ModelKind::kGbt,
                             default_search_space(ModelKind::kGbt), config_.tuning.budget,
                             config_.tuning.folds, seed({kTagTune, model_code("gbt"), t})));
    }
    gbt_tuning_ = std::move(results);
  }
  return *gbt_tuning_;
}

const TuneResult& Pipeline::mlp_tuning(const std::string& name) {
  auto it = mlp_tuning_.find(name);
  if (it == mlp_tuning_.end()) {
    const SearchSpace space =
        name == "mlp" ? default_search_space(ModelKind::kMlp) : alternate_mlp_search_space();
    it = mlp_tuning_
             .emplace(name, tune(*train_, ModelKind::kMlp, space, config_.tuning.budget,
                                 config_.tuning.folds, seed({kTagTune, model_code(name)})))
             .first;
  }
  return it->second;
}

std::shared_ptr<const TrainedSurrogate> Pipeline::build_ensemble(ModelReport& entry) {
  struct Candidate {
    std::string label;
    ModelKind kind;
    std::vector<Hyperparameters> hp;
    double score;
  };
  std::vector<Candidate> pool;

  // The r-th best configuration of every target forms one gbt bundle.
  const auto& gbt = gbt_tuning();
  std::vector<std::vector<std::size_t>> order;
  for (const auto& t : gbt) order.push_back(t.ranking());
  for (std::size_t r = 0; r < config_.tuning.budget; ++r) {
    Candidate c{"gbt#rank" + std::to_string(r), ModelKind::kGbt, {}, 0.0};
    for (std::size_t t = 0; t < gbt.size(); ++t) {
      const Trial& trial = gbt[t].trials[order[t][r]];
      c.hp.push_back(trial.hyperparameters);
      c.score += trial.score / static_cast<double>(gbt.size());
    }
    if (std::isfinite(c.score)) pool.push_back(std::move(c));
  }
  const TuneResult& mlp = mlp_tuning("mlp");
  for (std::size_t i : mlp.ranking()) {
    const Trial& trial = mlp.trials[i];
    if (!std::isfinite(trial.score)) continue;
    pool.push_back({"mlp#trial" + std::to_string(trial.index), ModelKind::kMlp,
                    {trial.hyperparameters}, trial.score});
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score < b.score; });
  if (pool.size() > config_.tuning.ensemble_pool) pool.resize(config_.tuning.ensemble_pool);
  if (pool.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "ensemble needs at least two trainable candidates");
  }

  Split parts = split(*train_, config_.tuning.ensemble_holdout, seed({kTagEnsemble}));
  std::vector<std::shared_ptr<const TrainedSurrogate>> members;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    members.push_back(std::make_shared<const TrainedSurrogate>(
        fit_surrogate(pool[i].kind, parts.train, pool[i].hp, seed({kTagEnsemble, 1, i}))));
    entry.members.push_back(pool[i].label);
  }
  EnsembleModel ensemble = train_ensemble(std::move(members), parts.test);
  entry.weights = ensemble.weights;
  entry.cv_score = ensemble.holdout_mse;
  return std::make_shared<const TrainedSurrogate>(make_ensemble_surrogate(std::move(ensemble)));
}

std::shared_ptr<const TrainedSurrogate> Pipeline::train_model(const std::string& name,
                                                              ModelReport& entry) {
  if (name == "ensemble") {
    entry.kind = "ensemble";
    return build_ensemble(entry);
  }
  if (name == "gbt") {
    const auto& tunes = gbt_tuning();
    double cv = 0.0;
    for (std::size_t t = 0; t < tunes.size(); ++t) {
      entry.hyperparameters.push_back(tunes[t].best);
      cv += tunes[t].best_score / static_cast<double>(tunes.size());
      entry.tuning.push_back({target_names()[t], tunes[t].best_index, tunes[t].trials});
    }
    auto model = std::make_shared<TrainedSurrogate>(fit_surrogate(
        ModelKind::kGbt, *train_, entry.hyperparameters, seed({kTagFit, model_code(name)})));
    model->mutable_record().cv_score = cv;
    entry.kind = "gbt";
    entry.cv_score = cv;
    return model;
  }
  const TuneResult& tuned = mlp_tuning(name);
  entry.hyperparameters = {tuned.best};
  entry.tuning.push_back({"all", tuned.best_index, tuned.trials});
  auto model = std::make_shared<TrainedSurrogate>(
      fit_surrogate(ModelKind::kMlp, *train_, entry.hyperparameters, seed({kTagFit, model_code(name)})));
  model->mutable_record().cv_score = tuned.best_score;
  entry.kind = "mlp";
  entry.cv_score = tuned.best_score;
  return model;
}

void Pipeline::persist_model(const TrainedSurrogate& model, ModelReport& entry) {
  entry.metrics = evaluate(model, *test_);
  entry.model_path = "model_" + entry.name + ".json";
  entry.metrics_path = "metrics_" + entry.name + ".csv";
  entry.residuals_path = "residuals_" + entry.name + ".csv";
  save_surrogate(out(entry.model_path), model);
  write_metrics_csv(out(entry.metrics_path), target_names(), entry.metrics);
  write_residuals_csv(out(entry.residuals_path), target_names(), entry.metrics);
}

void Pipeline::do_train() {
  report_.models.clear();
  report_.retrained.clear();
  models_.clear();
  predicted_.clear();
  validated_.clear();
  for (const auto& name : config_.models) {
    ModelReport entry;
    entry.name = name;
    auto model = train_model(name, entry);
    persist_model(*model, entry);
    models_[name] = std::move(model);
    report_.models.push_back(std::move(entry));
  }
}

void Pipeline::do_explain() {
  const TabularDataset& train = *train_;
  const TabularDataset& test = *test_;
  const std::size_t d = train.n_features();
  const auto& features = train.feature_names();
  const auto& targets = target_names();

  std::ostringstream importances;
  importances << "feature,target,method,value,model\n";
  const auto emit = [&](const ImportanceVector& iv, std::size_t t, const std::string& model) {
    const std::string method(importance_method_name(iv.method));
    for (std::size_t f = 0; f < d; ++f) {
      importances << features[f] << ',' << targets[t] << ',' << method << ','
                  << format_double(iv.values[f]) << ',' << model << '\n';
    }
  };

  Matrix background = train.features();
  if (train.rows() > kMaxPdpBackground) {
    std::vector<std::size_t> rows(train.rows());
    std::iota(rows.begin(), rows.end(), 0);
    Rng rng = make_rng(config_.seed, {kTagXai, kTagPdpBackground});
    shuffle_indices(rows, rng);
    rows.resize(kMaxPdpBackground);
    std::sort(rows.begin(), rows.end());
    background = train.select_rows(rows).features();
  }

  report_.pdp_files.clear();
  for (std::size_t t = 0; t < train.n_targets(); ++t) {
    std::vector<double> consensus(d, 0.0);
    for (const auto& entry : report_.models) {
      const TrainedSurrogate& model = *models_.at(entry.name);
      if (model.kind() == ModelKind::kGbt) emit(gain_importance(model, t), t, entry.name);
      const ImportanceVector perm =
          permutation_importance(model, test, t, config_.xai.permutation_repeats,
                                 seed({kTagXai, model_code(entry.name), t}));
      emit(perm, t, entry.name);
      for (std::size_t f = 0; f < d; ++f) consensus[f] += perm.values[f];
    }

    // PDPs for the features the models agree matter most; constant columns
    // have no range to sweep.
    const ImportanceVector ranked{ImportanceMethod::kPermutation, consensus};
    std::size_t plotted = 0;
    for (std::size_t f : ranked.ranking()) {
      if (plotted == config_.xai.top_features) break;
      const std::vector<double> column = train.features().column(f);
      const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
      if (!(*hi > *lo)) continue;

      const std::size_t feature[] = {f};
      std::vector<std::string> header{"grid"};
      std::vector<PdpCurve> curves;
      for (const auto& entry : report_.models) {
        header.push_back(entry.name);
        curves.push_back(
            partial_dependence(*models_.at(entry.name), background, feature, config_.xai.grid_size));
      }
      NumericTable table;
      table.header = header;
      const auto& grid = curves.front().grids.front();
      table.values = Matrix(grid.size(), header.size());
      for (std::size_t g = 0; g < grid.size(); ++g) {
        table.values(g, 0) = grid[g];
        for (std::size_t k = 0; k < curves.size(); ++k) table.values(g, 1 + k) = curves[k].response(g, t);
      }
      const std::string file = "pdp_" + targets[t] + "_" + features[f] + ".csv";
      write_numeric_csv(out(file), table);
      report_.pdp_files.push_back(file);
      ++plotted;
    }
  }
  write_text(out("importances.csv"), importances.str());
  report_.importances_files = {"importances.csv"};
}

void Pipeline::optimize_model(const TrainedSurrogate& model, ModelReport& entry,
                              std::uint64_t nsga_seed) {
  ProblemSpec spec;
  spec.bounds = report_.dataset->bounds;
  spec.objective_names = target_names();
  spec.directions = directions();
  spec.evaluator = [&model](const Matrix& x) { return model.predict(x); };

  NsgaSettings settings;
  settings.pop_size = config_.optimizer.pop_size;
  settings.generations = config_.optimizer.generations;
  settings.crossover_prob = config_.optimizer.crossover_prob;
  settings.eta_c = config_.optimizer.eta_c;
  settings.eta_m = config_.optimizer.eta_m;
  settings.mutation_rate = config_.optimizer.mutation_rate;
  settings.seed = nsga_seed;
  const NsgaResult result = nsga2_run(spec, settings);

  PredictedFront front;
  front.designs = result.front.designs();
  front.predicted = result.front.objectives();
  front.ids.resize(front.designs.rows());
  std::iota(front.ids.begin(), front.ids.end(), std::size_t{0});

  entry.predicted_front_path = "front_predicted_" + entry.name + ".csv";
  write_front(out(*entry.predicted_front_path), front.ids, front.designs, front.predicted, nullptr,
              target_names());
  entry.front_size = front.ids.size();
  entry.evaluations = result.evaluations;
  entry.infeasible_evaluations = result.infeasible_evaluations;
  predicted_[entry.name] = std::move(front);
}

void Pipeline::do_optimize() {
  for (auto& entry : report_.models) {
    optimize_model(*models_.at(entry.name), entry, seed({kTagNsga, model_code(entry.name)}));
  }
}

void Pipeline::validate_model(const OracleProblem& problem, ModelReport& entry) {
  const PredictedFront& front = predicted_.at(entry.name);
  ValidationResult result;
  if (front.ids.empty()) {
    // Nothing survived on the predicted side either; report it as all-infeasible.
    result.designs = Matrix(0, problem.n_features());
    result.predicted = Matrix(0, problem.n_objectives());
    result.validated = Matrix(0, problem.n_objectives());
    result.all_infeasible = true;
    result.candidate_mape.assign(problem.n_objectives(), std::numeric_limits<double>::quiet_NaN());
  } else {
    result = validate_candidates(front, problem, config_.validation.cap);
  }
  entry.validated_front_path = "front_validated_" + entry.name + ".csv";
  write_front(out(*entry.validated_front_path), result.ids, result.designs, result.predicted,
              &result.validated, target_names());
  entry.validation = result;
  validated_[entry.name] = std::move(result);
}

void Pipeline::do_validate() {
  const auto problem = make_problem(config_.validation_problem());
  if (problem->n_features() != train_->n_features() ||
      problem->n_objectives() != train_->n_targets()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "validation problem '" + problem->name() + "' does not match the dataset shape");
  }
  for (auto& entry : report_.models) validate_model(*problem, entry);
}

void Pipeline::do_retrain_cycle() {
  const auto problem = make_problem(config_.validation_problem());
  Matrix x(0, train_->n_features());
  Matrix y(0, train_->n_targets());
  for (const auto& entry : report_.models) {
    const ValidationResult& v = validated_.at(entry.name);
    for (std::size_t i = 0; i < v.ids.size(); ++i) {
      x.append_row(v.designs.row(i));
      y.append_row(v.validated.row(i));
    }
  }
  const TabularDataset augmented = x.empty() ? *train_ : train_->with_appended_rows(x, y);

  report_.retrained.clear();
  for (const auto& base : report_.models) {
    if (base.kind == "ensemble") continue;
    ModelReport entry;
    entry.name = base.name + "_retrained";
    entry.kind = base.kind;
    entry.hyperparameters = base.hyperparameters;
    entry.cv_score = std::numeric_limits<double>::quiet_NaN();
    const std::uint64_t code = model_code(base_model_name(entry.name));
    const auto model = std::make_shared<const TrainedSurrogate>(fit_surrogate(
        parse_model_kind(base.kind), augmented, base.hyperparameters, seed({kTagRetrain, code})));
    persist_model(*model, entry);
    optimize_model(*model, entry, seed({kTagRetrain, code, 1}));
    validate_model(*problem, entry);
    models_[entry.name] = model;
    report_.retrained.push_back(std::move(entry));
  }
}

void Pipeline::do_report() {
  report_.indicators.clear();
  report_.indicators_path.reset();
  std::vector<ModelReport*> entries;
  for (auto& entry : report_.models) entries.push_back(&entry);
  for (auto& entry : report_.retrained) entries.push_back(&entry);
  std::vector<RunFront> runs;
  std::vector<ModelReport*> ran;
  for (ModelReport* entry : entries) {
    entry->indicators.reset();
    const auto it = validated_.find(entry->name);
    if (it == validated_.end()) continue;
    runs.push_back({entry->name, it->second.validated, it->second.candidates});
    ran.push_back(entry);
  }
  if (runs.empty()) return;
  const std::vector<Direction> dirs = directions();
  report_.indicators = compare_runs(runs, dataset_->targets(), dirs);
  for (std::size_t i = 0; i < ran.size(); ++i) ran[i]->indicators = report_.indicators[i + 1];
  report_.indicators_path = "indicators.csv";
  write_indicators_csv(out(*report_.indicators_path), report_.indicators);
}

}  // namespace mlsmo
