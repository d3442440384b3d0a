#include <cmath>
#include <limits>

#include "mlsmo/error.hpp"
#include "mlsmo/pipeline.hpp"

namespace mlsmo {

namespace {

using nlohmann::json;

// JSON has no NaN or infinity; both are written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::optional<double> read_optional(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json optional_string(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> read_optional_string(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<std::string>();
}

json hp_json(const Hyperparameters& hp) {
  json out = json::object();
  for (const auto& [k, v] : hp.values()) out[k] = v;
  return out;
}

Hyperparameters hp_from(const json& doc) {
  Hyperparameters hp;
  for (const auto& item : doc.items()) hp.set(item.key(), item.value().get<double>());
  return hp;
}

json indicator_json(const IndicatorRow& row) {
  return {{"label", row.label},
          {"simulation_rate", optional_number(row.simulation_rate)},
          {"gd", optional_number(row.gd)},
          {"gd_plus", optional_number(row.gd_plus)},
          {"hv", number(row.hv)}};
}

IndicatorRow indicator_from(const json& doc) {
  IndicatorRow row;
  row.label = doc.at("label").get<std::string>();
  row.simulation_rate = read_optional(doc.at("simulation_rate"));
  row.gd = read_optional(doc.at("gd"));
  row.gd_plus = read_optional(doc.at("gd_plus"));
  row.hv = number_or_nan(doc.at("hv"));
  return row;
}

json validation_json(const ValidationResult& v) {
  json mape = json::array();
  for (double x : v.candidate_mape) mape.push_back(number(x));
  return {{"candidates", v.candidates},
          {"validated", v.ids.size()},
          {"validated_ids", v.ids},
          {"dropped", v.dropped},
          {"simulation_rate", number(v.simulation_rate)},
          {"all_infeasible", v.all_infeasible},
          {"candidate_mape", mape}};
}

ValidationResult validation_from(const json& doc) {
  ValidationResult v;
  v.candidates = doc.at("candidates").get<std::size_t>();
  v.ids = doc.at("validated_ids").get<std::vector<std::size_t>>();
  v.dropped = doc.at("dropped").get<std::size_t>();
  v.simulation_rate = number_or_nan(doc.at("simulation_rate"));
  v.all_infeasible = doc.at("all_infeasible").get<bool>();
  for (const auto& x : doc.at("candidate_mape")) v.candidate_mape.push_back(number_or_nan(x));
  return v;
}

json model_json(const ModelReport& m, const std::vector<std::string>& targets) {
  json hps = json::array();
  for (const auto& hp : m.hyperparameters) hps.push_back(hp_json(hp));
  json metrics = json::array();
  for (std::size_t t = 0; t < m.metrics.size(); ++t) {
    const auto& r = m.metrics[t];
    metrics.push_back({{"target", t < targets.size() ? targets[t] : std::to_string(t)},
                       {"mape", number(r.mape)},
                       {"mse", number(r.mse)},
                       {"evaluated_rows", r.residuals.size()},
                       {"excluded_zero_targets", r.excluded_zero_targets}});
  }
  json tuning = json::array();
  for (const auto& log : m.tuning) {
    json trials = json::array();
    for (const auto& t : log.trials) {
      trials.push_back({{"index", t.index},
                        {"hyperparameters", hp_json(t.hyperparameters)},
                        {"score", number(t.score)},
                        {"status", t.status}});
    }
    tuning.push_back({{"target", log.target}, {"best_index", log.best_index}, {"trials", trials}});
  }
  json weights = json::array();
  for (double w : m.weights) weights.push_back(number(w));
  return {{"name", m.name},
          {"kind", m.kind},
          {"hyperparameters", hps},
          {"cv_score", number(m.cv_score)},
          {"members", m.members},
          {"weights", weights},
          {"metrics", metrics},
          {"tuning", tuning},
          {"model_path", m.model_path},
          {"metrics_path", m.metrics_path},
          {"residuals_path", m.residuals_path},
          {"predicted_front_path", optional_string(m.predicted_front_path)},
          {"front_size", m.front_size},
          {"evaluations", m.evaluations},
          {"infeasible_evaluations", m.infeasible_evaluations},
          {"validated_front_path", optional_string(m.validated_front_path)},
          {"validation", m.validation ? validation_json(*m.validation) : json(nullptr)},
          {"indicators", m.indicators ? indicator_json(*m.indicators) : json(nullptr)}};
}

ModelReport model_from(const json& doc) {
  ModelReport m;
  m.name = doc.at("name").get<std::string>();
  m.kind = doc.at("kind").get<std::string>();
  for (const auto& hp : doc.at("hyperparameters")) m.hyperparameters.push_back(hp_from(hp));
  m.cv_score = number_or_nan(doc.at("cv_score"));
  m.members = doc.at("members").get<std::vector<std::string>>();
  for (const auto& w : doc.at("weights")) m.weights.push_back(number_or_nan(w));
  for (const auto& r : doc.at("metrics")) {
    RegressionMetrics metrics;
    metrics.mape = number_or_nan(r.at("mape"));
    metrics.mse = number_or_nan(r.at("mse"));
    metrics.excluded_zero_targets = r.at("excluded_zero_targets").get<std::size_t>();
    // Residual values live in residuals_<model>.csv; only the count is kept.
    metrics.residuals.assign(r.at("evaluated_rows").get<std::size_t>(), 0.0);
    m.metrics.push_back(std::move(metrics));
  }
  for (const auto& l : doc.at("tuning")) {
    TuningLog log;
    log.target = l.at("target").get<std::string>();
    log.best_index = l.at("best_index").get<std::size_t>();
    for (const auto& t : l.at("trials")) {
      Trial trial;
      trial.index = t.at("index").get<std::size_t>();
      trial.hyperparameters = hp_from(t.at("hyperparameters"));
      trial.score = t.at("score").is_null() ? std::numeric_limits<double>::infinity()
                                           : t.at("score").get<double>();
      trial.status = t.at("status").get<std::string>();
      log.trials.push_back(std::move(trial));
    }
    m.tuning.push_back(std::move(log));
  }
  m.model_path = doc.at("model_path").get<std::string>();
  m.metrics_path = doc.at("metrics_path").get<std::string>();
  m.residuals_path = doc.at("residuals_path").get<std::string>();
  m.predicted_front_path = read_optional_string(doc, "predicted_front_path");
  m.front_size = doc.at("front_size").get<std::size_t>();
  m.evaluations = doc.at("evaluations").get<std::size_t>();
  m.infeasible_evaluations = doc.at("infeasible_evaluations").get<std::size_t>();
  m.validated_front_path = read_optional_string(doc, "validated_front_path");
  if (!doc.at("validation").is_null()) m.validation = validation_from(doc.at("validation"));
  if (!doc.at("indicators").is_null()) m.indicators = indicator_from(doc.at("indicators"));
  return m;
}

json dataset_json(const DatasetProvenance& d) {
  json dirs = json::array();
  for (Direction dir : d.directions) dirs.push_back(std::string(direction_name(dir)));
  json lower = json::array();
  json upper = json::array();
  for (double v : d.bounds.lower) lower.push_back(v);
  for (double v : d.bounds.upper) upper.push_back(v);
  return {{"source", d.source},
          {"name", d.name},
          {"sampler", d.sampler},
          {"rows", d.rows},
          {"dropped_rows", d.dropped_rows},
          {"train_rows", d.train_rows},
          {"test_rows", d.test_rows},
          {"feature_names", d.feature_names},
          {"target_names", d.target_names},
          {"directions", dirs},
          {"bounds", {{"lower", lower}, {"upper", upper}}}};
}

DatasetProvenance dataset_from(const json& doc) {
  DatasetProvenance d;
  d.source = doc.at("source").get<std::string>();
  d.name = doc.at("name").get<std::string>();
  d.sampler = doc.at("sampler").get<std::string>();
  d.rows = doc.at("rows").get<std::size_t>();
  d.dropped_rows = doc.at("dropped_rows").get<std::size_t>();
  d.train_rows = doc.at("train_rows").get<std::size_t>();
  d.test_rows = doc.at("test_rows").get<std::size_t>();
  d.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  d.target_names = doc.at("target_names").get<std::vector<std::string>>();
  for (const auto& dir : doc.at("directions")) d.directions.push_back(parse_direction(dir.get<std::string>()));
  d.bounds = FeatureBounds(doc.at("bounds").at("lower").get<std::vector<double>>(),
                           doc.at("bounds").at("upper").get<std::vector<double>>());
  return d;
}

}  // namespace

ModelReport* RunReport::find_model(const std::string& name) {
  for (auto& m : models) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

json report_to_json(const RunReport& report) {
  const std::vector<std::string> targets =
      report.dataset ? report.dataset->target_names : std::vector<std::string>{};
  json models = json::array();
  for (const auto& m : report.models) models.push_back(model_json(m, targets));
  json retrained = json::array();
  for (const auto& m : report.retrained) retrained.push_back(model_json(m, targets));
  json indicators = json::array();
  for (const auto& row : report.indicators) indicators.push_back(indicator_json(row));
  json timing = json::object();
  for (const auto& [stage, seconds] : report.timing) timing[stage] = seconds;
  json error = nullptr;
  if (report.error) error = {{"stage", report.error->first}, {"message", report.error->second}};
  return {{"format", "mlsmo-report"},
          {"format_version", kReportFormatVersion},
          {"config", report.config},
          {"seed", report.seed},
          {"kernel_backend", report.kernel_backend},
          {"dataset", report.dataset ? dataset_json(*report.dataset) : json(nullptr)},
          {"models", models},
          {"retrained", retrained},
          {"xai", {{"importances", report.importances_files}, {"pdp", report.pdp_files}}},
          {"indicators", indicators},
          {"indicators_path", optional_string(report.indicators_path)},
          {"stages_completed", report.stages_completed},
          {"error", error},
          {"timing", timing}};
}

RunReport report_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "mlsmo-report") {
      throw Error(ErrorCode::kParse, "not a report document");
    }
    if (doc.at("format_version").get<int>() != kReportFormatVersion) {
      throw Error(ErrorCode::kParse, "unsupported report format_version");
    }
    RunReport r;
    r.config = doc.at("config");
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.kernel_backend = doc.at("kernel_backend").get<std::string>();
    if (!doc.at("dataset").is_null()) r.dataset = dataset_from(doc.at("dataset"));
    for (const auto& m : doc.at("models")) r.models.push_back(model_from(m));
    for (const auto& m : doc.at("retrained")) r.retrained.push_back(model_from(m));
    r.importances_files = doc.at("xai").at("importances").get<std::vector<std::string>>();
    r.pdp_files = doc.at("xai").at("pdp").get<std::vector<std::string>>();
    for (const auto& row : doc.at("indicators")) r.indicators.push_back(indicator_from(row));
    r.indicators_path = read_optional_string(doc, "indicators_path");
    r.stages_completed = doc.at("stages_completed").get<std::vector<std::string>>();
    if (!doc.at("error").is_null()) {
      r.error = std::make_pair(doc.at("error").at("stage").get<std::string>(),
                               doc.at("error").at("message").get<std::string>());
    }
    for (const auto& item : doc.at("timing").items()) r.timing[item.key()] = item.value().get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("report: ") + e.what());
  }
}

}  // namespace mlsmo
