#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mlsmo/error.hpp"
#include "mlsmo/pipeline.hpp"

using namespace mlsmo;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mlsmo_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json report_without_timing(const fs::path& dir) {
  nlohmann::json doc = nlohmann::json::parse(slurp(dir / "report.json"));
  doc.erase("timing");
  return doc;
}

nlohmann::json small_config_json() {
  return nlohmann::json::parse(R"({
    "config_version": 1,
    "seed": 5,
    "data": {"source": "oracle", "problem": "zdt1", "n": 200},
    "models": ["gbt", "mlp"],
    "tuning": {"budget": 2, "folds": 2},
    "optimizer": {"pop_size": 20, "generations": 10},
    "xai": {"permutation_repeats": 1, "grid_size": 5, "top_features": 2}
  })");
}

PipelineConfig small_config(const fs::path& out) {
  PipelineConfig c = parse_config(small_config_json());
  c.output_dir = out;
  return c;
}

ErrorCode config_error_code(const nlohmann::json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("config was accepted");
  return ErrorCode::kInvalidArgument;
}

PredictedFront front_of(const Matrix& designs, const OracleProblem& p, double f1_bias = 0.0) {
  PredictedFront f;
  f.designs = designs;
  f.predicted = evaluate_or_nan(p, designs);
  for (std::size_t i = 0; i < designs.rows(); ++i) {
    f.ids.push_back(100 + i);
    if (std::isnan(f.predicted(i, 0))) {
      // Infeasible designs still carry a (made-up) prediction.
      f.predicted(i, 0) = designs(i, 0);
      f.predicted(i, 1) = 1.0;
    }
    f.predicted(i, 0) += f1_bias;
  }
  return f;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MLSMO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const PipelineConfig c = parse_config(small_config_json());
  CHECK(c.seed == 5);
  CHECK(c.models == std::vector<std::string>{"gbt", "mlp"});
  CHECK(c.test_fraction == 0.2);
  CHECK(c.validation_problem() == "zdt1");

  auto doc = small_config_json();
  doc["models"] = nlohmann::json::array();
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc["models"] = {"gbt", "cnn"};
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc["models"] = {"gbt", "gbt"};
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc["seed"] = -1;
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc.erase("seed");
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc["config_version"] = 2;
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc["optimizer"]["popsize"] = 10;
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc["split"]["test_fraction"] = 1.5;
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc = small_config_json();
  doc["data"] = {{"source", "csv"}, {"n_feature_columns", 2}};
  CHECK(config_error_code(doc) == ErrorCode::kConfig);
  doc["data"]["path"] = "x.csv";
  CHECK(config_error_code(doc) == ErrorCode::kConfig);  // oracle validation needs a problem
  doc["validation"] = {{"mode", "none"}};
  CHECK_NOTHROW(parse_config(doc));

  const nlohmann::json echo = config_to_json(c);
  CHECK_FALSE(echo.contains("output_dir"));
  CHECK(parse_config(echo).models == c.models);
}

TEST_CASE("thinning keeps spread points") {
  const Matrix pts{{0.0, 1.0}, {0.5, 0.5}, {0.501, 0.499}, {1.0, 0.0}, {0.25, 0.75}};
  CHECK(thin_to_cap(pts, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  const auto kept = thin_to_cap(pts, 4);
  CHECK(kept.size() == 4);
  CHECK(kept == std::vector<std::size_t>{0, 1, 3, 4});
  CHECK(thin_to_cap(pts, 2).size() == 2);
}

TEST_CASE("candidate validation") {
  const auto zdt1 = make_problem("zdt1");
  Matrix designs(6, 30, 0.0);
  for (std::size_t i = 0; i < 6; ++i) designs(i, 0) = 0.1 + 0.15 * static_cast<double>(i);

  SUBCASE("perfect surrogate") {
    const ValidationResult r = validate_candidates(front_of(designs, *zdt1), *zdt1, 200);
    CHECK(r.simulation_rate == 1.0);
    CHECK(r.validated == r.predicted);
    CHECK(r.candidate_mape == std::vector<double>{0.0, 0.0});
    CHECK(r.ids == std::vector<std::size_t>{100, 101, 102, 103, 104, 105});
  }
  SUBCASE("biased surrogate") {
    const ValidationResult r = validate_candidates(front_of(designs, *zdt1, 0.1), *zdt1, 200);
    double expected = 0.0;
    for (std::size_t i = 0; i < 6; ++i) expected += 100.0 * 0.1 / designs(i, 0) / 6.0;
    CHECK(r.candidate_mape[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.candidate_mape[1] == 0.0);
  }
  SUBCASE("disk constraint drops candidates inside the ball") {
    const auto disk = make_problem("zdt1-disk");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      const double dx = designs(i, 0) - 0.5;
      if (dx * dx < 0.04) ++inside;
    }
    REQUIRE(inside > 0);
    const ValidationResult r = validate_candidates(front_of(designs, *disk), *disk, 200);
    CHECK(r.dropped == inside);
    CHECK(r.simulation_rate < 1.0);
    CHECK(r.simulation_rate == doctest::Approx(static_cast<double>(6 - inside) / 6.0));
    const std::set<std::size_t> all{100, 101, 102, 103, 104, 105};
    for (std::size_t id : r.ids) CHECK(all.count(id) == 1);
  }
  SUBCASE("all infeasible is an outcome, not a crash") {
    const auto disk = make_problem("zdt1-disk");
    Matrix bad(3, 30, 0.0);
    for (std::size_t i = 0; i < 3; ++i) bad(i, 0) = 0.45 + 0.05 * static_cast<double>(i);
    const ValidationResult r = validate_candidates(front_of(bad, *disk), *disk, 200);
    CHECK(r.all_infeasible);
    CHECK(r.simulation_rate == 0.0);
    CHECK(r.ids.empty());
    CHECK(std::isnan(r.candidate_mape[0]));
  }
  SUBCASE("cap") {
    const ValidationResult r = validate_candidates(front_of(designs, *zdt1), *zdt1, 3);
    CHECK(r.candidates == 3);
  }
}

TEST_CASE("full run writes a consistent, reproducible report") {
  const fs::path a = fresh_dir("run_a");
  const fs::path b = fresh_dir("run_b");
  Pipeline(small_config(a)).run();
  const RunReport report = Pipeline(small_config(b)).run();

  CHECK(slurp(a / "indicators.csv") == slurp(b / "indicators.csv"));
  CHECK(report_without_timing(a) == report_without_timing(b));

  REQUIRE(report.models.size() == 2);
  CHECK(report.stages_completed ==
        std::vector<std::string>{"acquire", "train", "explain", "optimize", "validate", "report"});
  REQUIRE(report.indicators.size() == 3);
  for (const auto& m : report.models) {
    for (const std::string& p : {m.model_path, m.metrics_path, m.residuals_path, *m.predicted_front_path,
                                 *m.validated_front_path}) {
      CHECK(fs::exists(a / p));
    }
    REQUIRE(m.validation.has_value());
    CHECK(m.validation->simulation_rate == 1.0);
    CHECK(m.indicators->hv >= report.indicators[0].hv);
    CHECK(load_surrogate(a / m.model_path)->n_targets() == 2);

    const NumericTable predicted = read_numeric_csv(a / *m.predicted_front_path);
    const NumericTable validated = read_numeric_csv(a / *m.validated_front_path);
    std::set<double> ids;
    for (std::size_t i = 0; i < predicted.values.rows(); ++i) ids.insert(predicted.values(i, 0));
    for (std::size_t i = 0; i < validated.values.rows(); ++i) CHECK(ids.count(validated.values(i, 0)) == 1);
    CHECK(validated.header.back() == "val_f2");
  }
  CHECK(read_indicators_csv(a / "indicators.csv").size() == 3);
  CHECK(fs::exists(a / "importances.csv"));
  CHECK(report.pdp_files.size() == 4);
  for (const auto& f : report.pdp_files) CHECK(read_numeric_csv(a / f).header == std::vector<std::string>{"grid", "gbt", "mlp"});

  const nlohmann::json doc = report_to_json(report);
  CHECK(report_to_json(report_from_json(doc)) == doc);
}

TEST_CASE("stage-by-stage execution matches a full run") {
  const fs::path full = fresh_dir("full");
  const fs::path staged = fresh_dir("staged");
  Pipeline(small_config(full)).run();
  {
    Pipeline p(small_config(staged));
    p.train();
  }
  Pipeline(small_config(staged)).explain();
  Pipeline(small_config(staged)).optimize();
  Pipeline(small_config(staged)).validate();
  Pipeline(small_config(staged)).report();
  CHECK(report_without_timing(full) == report_without_timing(staged));
  CHECK(slurp(full / "indicators.csv") == slurp(staged / "indicators.csv"));
  CHECK(slurp(full / "importances.csv") == slurp(staged / "importances.csv"));
}

TEST_CASE("csv source without validation") {
  const fs::path gen = fresh_dir("gen");
  Pipeline(small_config(gen)).generate();
  REQUIRE(fs::exists(gen / "dataset.csv"));

  const fs::path out = fresh_dir("csv");
  auto doc = small_config_json();
  doc["data"] = {{"source", "csv"}, {"path", (gen / "dataset.csv").string()}, {"n_feature_columns", 30}};
  doc["validation"] = {{"mode", "none"}};
  doc["models"] = {"gbt", "mlp2"};
  PipelineConfig c = parse_config(doc);
  c.output_dir = out;
  const RunReport r = Pipeline(c).run();
  CHECK(r.indicators.empty());
  CHECK_FALSE(fs::exists(out / "indicators.csv"));
  for (const auto& m : r.models) {
    CHECK(fs::exists(out / *m.predicted_front_path));
    CHECK(m.metrics.size() == 2);
    CHECK_FALSE(m.validation.has_value());
    CHECK_FALSE(m.indicators.has_value());
  }
}

TEST_CASE("ensemble and retrain cycle") {
  const fs::path out = fresh_dir("ensemble");
  auto doc = small_config_json();
  doc["models"] = {"gbt", "ensemble", "mlp"};
  doc["tuning"]["ensemble_pool"] = 3;
  doc["retrain_cycle"] = true;
  PipelineConfig c = parse_config(doc);
  c.output_dir = out;
  const RunReport r = Pipeline(c).run();
  REQUIRE(r.models.size() == 3);
  const ModelReport& ens = r.models[1];
  CHECK(ens.kind == "ensemble");
  CHECK(ens.members.size() == 3);
  double sum = 0.0;
  for (double w : ens.weights) {
    CHECK(w >= 0.0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.retrained.size() == 2);
  CHECK(r.indicators.size() == 6);
  CHECK(fs::exists(out / "front_validated_gbt_retrained.csv"));
}

TEST_CASE("stage failures leave a labeled partial report") {
  const fs::path out = fresh_dir("failure");
  auto doc = small_config_json();
  doc["data"] = {{"source", "csv"}, {"path", (out / "missing.csv").string()}, {"n_feature_columns", 2}};
  doc["validation"] = {{"mode", "none"}};
  PipelineConfig c = parse_config(doc);
  c.output_dir = out;
  try {
    Pipeline(c).run();
    FAIL("expected a stage failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStage);
  }
  const RunReport partial = report_from_json(nlohmann::json::parse(slurp(out / "report.json")));
  REQUIRE(partial.error.has_value());
  CHECK(partial.error->first == "acquire");
  CHECK(partial.stages_completed.empty());
}

TEST_CASE("cli exit codes") {
  const fs::path out = fresh_dir("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("--config " + std::string(MLSMO_TEST_DATA) + "/no_models.json run") == 2);
  CHECK(run_cli("--out " + (out / "empty").string() + " explain") == 3);
  CHECK(run_cli("bogus") == 2);
}
