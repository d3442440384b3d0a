#include "mlsmo/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mlsmo/error.hpp"

namespace mlsmo {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorCode::kConfig, message); }

void reject_unknown(const json& section, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!section.is_object()) fail(where + " must be an object");
  for (const auto& item : section.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known) fail("unknown key " + where + "." + item.key());
  }
}

std::size_t read_count(const json& section, const char* key, std::size_t fallback,
                       const std::string& where) {
  if (!section.contains(key)) return fallback;
  const json& v = section.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    fail(where + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

double read_real(const json& section, const char* key, double fallback, const std::string& where) {
  if (!section.contains(key)) return fallback;
  const json& v = section.at(key);
  if (!v.is_number()) fail(where + "." + key + " must be a number");
  return v.get<double>();
}

std::string read_string(const json& section, const char* key, const std::string& fallback,
                        const std::string& where) {
  if (!section.contains(key)) return fallback;
  const json& v = section.at(key);
  if (!v.is_string()) fail(where + "." + key + " must be a string");
  return v.get<std::string>();
}

const json& section_or_empty(const json& doc, const char* key) {
  static const json empty = json::object();
  return doc.contains(key) ? doc.at(key) : empty;
}

}  // namespace

std::string PipelineConfig::validation_problem() const {
  if (validation.mode == ValidationConfig::Mode::kNone) return {};
  if (!validation.problem.empty()) return validation.problem;
  if (data.kind == DataSourceConfig::Kind::kOracle) return data.problem;
  return {};
}

PipelineConfig parse_config(const json& doc) {
  PipelineConfig c;
  reject_unknown(doc, "config",
                 {"config_version", "seed", "data", "split", "models", "tuning", "optimizer",
                  "validation", "xai", "retrain_cycle", "output_dir", "threads"});

  if (!doc.contains("config_version")) fail("config_version is required");
  if (!doc.at("config_version").is_number_integer()) fail("config_version must be an integer");
  c.config_version = doc.at("config_version").get<int>();
  if (c.config_version != kConfigVersion)
    fail("unsupported config_version " + std::to_string(c.config_version));

  if (!doc.contains("seed")) fail("seed is required");
  const json& seed = doc.at("seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    fail("seed must be a non-negative integer");
  c.seed = doc.at("seed").get<std::uint64_t>();

  const json& data = section_or_empty(doc, "data");
  reject_unknown(data, "data",
                 {"source", "problem", "sampler", "n", "path", "n_feature_columns", "directions"});
  const std::string source = read_string(data, "source", "oracle", "data");
  if (source == "oracle") {
    c.data.kind = DataSourceConfig::Kind::kOracle;
  } else if (source == "csv") {
    c.data.kind = DataSourceConfig::Kind::kCsv;
  } else {
    fail("data.source must be oracle or csv");
  }
  c.data.problem = read_string(data, "problem", c.data.problem, "data");
  try {
    c.data.sampler = parse_sampler(read_string(data, "sampler", "lhd", "data"));
  } catch (const Error& e) {
    fail(std::string("data.sampler: ") + e.what());
  }
  c.data.n = read_count(data, "n", c.data.n, "data");
  c.data.path = read_string(data, "path", "", "data");
  c.data.n_feature_columns = read_count(data, "n_feature_columns", 0, "data");
  if (data.contains("directions")) {
    if (!data.at("directions").is_array()) fail("data.directions must be an array");
    for (const auto& d : data.at("directions")) {
      if (!d.is_string()) fail("data.directions entries must be strings");
      try {
        c.data.directions.push_back(parse_direction(d.get<std::string>()));
      } catch (const Error& e) {
        fail(std::string("data.directions: ") + e.what());
      }
    }
  }

  const json& split = section_or_empty(doc, "split");
  reject_unknown(split, "split", {"test_fraction"});
  c.test_fraction = read_real(split, "test_fraction", c.test_fraction, "split");

  if (doc.contains("models")) {
    const json& models = doc.at("models");
    if (!models.is_array()) fail("models must be an array");
    c.models.clear();
    for (const auto& m : models) {
      if (!m.is_string()) fail("models entries must be strings");
      c.models.push_back(m.get<std::string>());
    }
  }

  const json& tuning = section_or_empty(doc, "tuning");
  reject_unknown(tuning, "tuning", {"budget", "folds", "ensemble_pool", "ensemble_holdout"});
  c.tuning.budget = read_count(tuning, "budget", c.tuning.budget, "tuning");
  c.tuning.folds = read_count(tuning, "folds", c.tuning.folds, "tuning");
  c.tuning.ensemble_pool = read_count(tuning, "ensemble_pool", c.tuning.ensemble_pool, "tuning");
  c.tuning.ensemble_holdout =
      read_real(tuning, "ensemble_holdout", c.tuning.ensemble_holdout, "tuning");

  const json& opt = section_or_empty(doc, "optimizer");
  reject_unknown(opt, "optimizer",
                 {"pop_size", "generations", "crossover_prob", "eta_c", "eta_m", "mutation_rate"});
  c.optimizer.pop_size = read_count(opt, "pop_size", c.optimizer.pop_size, "optimizer");
  c.optimizer.generations = read_count(opt, "generations", c.optimizer.generations, "optimizer");
  c.optimizer.crossover_prob =
      read_real(opt, "crossover_prob", c.optimizer.crossover_prob, "optimizer");
  c.optimizer.eta_c = read_real(opt, "eta_c", c.optimizer.eta_c, "optimizer");
  c.optimizer.eta_m = read_real(opt, "eta_m", c.optimizer.eta_m, "optimizer");
  c.optimizer.mutation_rate =
      read_real(opt, "mutation_rate", c.optimizer.mutation_rate, "optimizer");

  const json& val = section_or_empty(doc, "validation");
  reject_unknown(val, "validation", {"mode", "problem", "cap"});
  const std::string mode = read_string(val, "mode", "oracle", "validation");
  if (mode == "oracle") {
    c.validation.mode = ValidationConfig::Mode::kOracle;
  } else if (mode == "none") {
    c.validation.mode = ValidationConfig::Mode::kNone;
  } else {
    fail("validation.mode must be oracle or none");
  }
  c.validation.problem = read_string(val, "problem", "", "validation");
  c.validation.cap = read_count(val, "cap", c.validation.cap, "validation");

  const json& xai = section_or_empty(doc, "xai");
  reject_unknown(xai, "xai", {"grid_size", "permutation_repeats", "top_features"});
  c.xai.grid_size = read_count(xai, "grid_size", c.xai.grid_size, "xai");
  c.xai.permutation_repeats =
      read_count(xai, "permutation_repeats", c.xai.permutation_repeats, "xai");
  c.xai.top_features = read_count(xai, "top_features", c.xai.top_features, "xai");

  if (doc.contains("retrain_cycle")) {
    if (!doc.at("retrain_cycle").is_boolean()) fail("retrain_cycle must be a boolean");
    c.retrain_cycle = doc.at("retrain_cycle").get<bool>();
  }
  c.output_dir = read_string(doc, "output_dir", c.output_dir.string(), "config");
  c.threads = read_count(doc, "threads", c.threads, "config");

  validate_config(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    fail("config file " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

void validate_config(const PipelineConfig& c) {
  if (c.config_version != kConfigVersion) fail("unsupported config_version");
  if (c.models.empty()) fail("models must list at least one model");
  std::set<std::string> seen;
  for (const auto& m : c.models) {
    const auto& known = known_model_names();
    if (std::find(known.begin(), known.end(), m) == known.end()) fail("unknown model " + m);
    if (!seen.insert(m).second) fail("duplicate model " + m);
  }
  if (c.data.kind == DataSourceConfig::Kind::kOracle) {
    const auto names = problem_names();
    if (std::find(names.begin(), names.end(), c.data.problem) == names.end())
      fail("unknown problem " + c.data.problem);
    if (c.data.n < 10 || c.data.n > 10'000'000) fail("data.n must lie in [10, 1e7]");
  } else {
    if (c.data.path.empty()) fail("data.path is required for csv sources");
    if (c.data.n_feature_columns < 1) fail("data.n_feature_columns must be >= 1");
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
    fail("split.test_fraction must lie in (0, 1)");
  if (c.tuning.budget < 1 || c.tuning.budget > 10000) fail("tuning.budget must lie in [1, 10000]");
  if (c.tuning.folds < 2 || c.tuning.folds > 20) fail("tuning.folds must lie in [2, 20]");
  if (c.tuning.ensemble_pool < 2 || c.tuning.ensemble_pool > 50)
    fail("tuning.ensemble_pool must lie in [2, 50]");
  if (!(c.tuning.ensemble_holdout > 0.0 && c.tuning.ensemble_holdout < 0.9))
    fail("tuning.ensemble_holdout must lie in (0, 0.9)");
  if (c.optimizer.pop_size < 4 || c.optimizer.pop_size > 100000)
    fail("optimizer.pop_size must lie in [4, 1e5]");
  if (c.optimizer.generations > 1'000'000) fail("optimizer.generations must be <= 1e6");
  if (!(c.optimizer.crossover_prob >= 0.0 && c.optimizer.crossover_prob <= 1.0))
    fail("optimizer.crossover_prob must lie in [0, 1]");
  if (!(c.optimizer.eta_c >= 0.0 && c.optimizer.eta_c <= 1000.0))
    fail("optimizer.eta_c must lie in [0, 1000]");
  if (!(c.optimizer.eta_m >= 0.0 && c.optimizer.eta_m <= 1000.0))
    fail("optimizer.eta_m must lie in [0, 1000]");
  if (!std::isfinite(c.optimizer.mutation_rate) || c.optimizer.mutation_rate > 1.0)
    fail("optimizer.mutation_rate must be <= 1 (negative selects 1/d)");
  if (c.validation.mode == ValidationConfig::Mode::kOracle) {
    const std::string problem = c.validation_problem();
    if (problem.empty()) fail("validation.problem is required to validate a csv source");
    const auto names = problem_names();
    if (std::find(names.begin(), names.end(), problem) == names.end())
      fail("unknown validation problem " + problem);
  }
  if (c.validation.cap < 1) fail("validation.cap must be >= 1");
  if (c.xai.grid_size < 2 || c.xai.grid_size > 1000) fail("xai.grid_size must lie in [2, 1000]");
  if (c.xai.permutation_repeats < 1 || c.xai.permutation_repeats > 100)
    fail("xai.permutation_repeats must lie in [1, 100]");
  if (c.xai.top_features < 1) fail("xai.top_features must be >= 1");
  if (c.threads < 1 || c.threads > 1024) fail("threads must lie in [1, 1024]");
}

json config_to_json(const PipelineConfig& c) {
  json data;
  if (c.data.kind == DataSourceConfig::Kind::kOracle) {
    data = {{"source", "oracle"},
            {"problem", c.data.problem},
            {"sampler", std::string(sampler_name(c.data.sampler))},
            {"n", c.data.n}};
  } else {
    data = {{"source", "csv"},
            {"path", c.data.path.generic_string()},
            {"n_feature_columns", c.data.n_feature_columns}};
  }
  if (!c.data.directions.empty()) {
    json dirs = json::array();
    for (Direction d : c.data.directions) dirs.push_back(std::string(direction_name(d)));
    data["directions"] = dirs;
  }
  json validation = {
      {"mode", c.validation.mode == ValidationConfig::Mode::kOracle ? "oracle" : "none"},
      {"cap", c.validation.cap}};
  if (!c.validation.problem.empty()) validation["problem"] = c.validation.problem;
  return json{
      {"config_version", c.config_version},
      {"seed", c.seed},
      {"data", data},
      {"split", {{"test_fraction", c.test_fraction}}},
      {"models", c.models},
      {"tuning",
       {{"budget", c.tuning.budget},
        {"folds", c.tuning.folds},
        {"ensemble_pool", c.tuning.ensemble_pool},
        {"ensemble_holdout", c.tuning.ensemble_holdout}}},
      {"optimizer",
       {{"pop_size", c.optimizer.pop_size},
        {"generations", c.optimizer.generations},
        {"crossover_prob", c.optimizer.crossover_prob},
        {"eta_c", c.optimizer.eta_c},
        {"eta_m", c.optimizer.eta_m},
        {"mutation_rate", c.optimizer.mutation_rate}}},
      {"validation", validation},
      {"xai",
       {{"grid_size", c.xai.grid_size},
        {"permutation_repeats", c.xai.permutation_repeats},
        {"top_features", c.xai.top_features}}},
      {"retrain_cycle", c.retrain_cycle},
  };
}

}  // namespace mlsmo
