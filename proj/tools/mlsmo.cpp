#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mlsmo/config.hpp"
#include "mlsmo/error.hpp"
#include "mlsmo/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

mlsmo::PipelineConfig resolve_config(const GlobalOptions& opts) {
  mlsmo::PipelineConfig config;
  if (!opts.config_path.empty()) config = mlsmo::load_config(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  if (opts.out) config.output_dir = *opts.out;
  if (opts.threads) config.threads = *opts.threads;
  mlsmo::validate_config(config);
  return config;
}

void print_summary(const mlsmo::RunReport& report, const std::string& out_dir) {
  std::cout << "stages:";
  for (const auto& s : report.stages_completed) std::cout << ' ' << s;
  std::cout << '\n';
  for (const auto& m : report.models) {
    std::cout << m.name << ':';
    for (std::size_t t = 0; t < m.metrics.size(); ++t) {
      std::cout << " mape[" << t << "]=" << mlsmo::format_double(m.metrics[t].mape);
    }
    if (m.validation) {
      std::cout << " simulation_rate=" << mlsmo::format_double(m.validation->simulation_rate);
    }
    std::cout << '\n';
  }
  for (const auto& row : report.indicators) {
    std::cout << "hv " << row.label << ' ' << mlsmo::format_double(row.hv) << '\n';
  }
  std::cout << "report: " << out_dir << "/report.json\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted multiobjective optimization toolkit"};
  app.require_subcommand(1);
  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "Override the configured seed");
  app.add_option("--out", opts.out, "Output directory");
  app.add_option("--threads", opts.threads, "Worker threads")->check(CLI::Range(1, 1024));

  auto* generate = app.add_subcommand("generate", "Sample an oracle problem into dataset.csv");
  auto* train = app.add_subcommand("train", "Acquire data, split, tune, train and evaluate");
  auto* explain = app.add_subcommand("explain", "Write importances and partial dependence curves");
  auto* optimize = app.add_subcommand("optimize", "Run NSGA-II on every trained surrogate");
  auto* validate = app.add_subcommand("validate", "Re-evaluate predicted fronts with the oracle");
  auto* report = app.add_subcommand("report", "Compare validated fronts with the database");
  auto* run = app.add_subcommand("run", "All stages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  mlsmo::PipelineConfig config;
  try {
    config = resolve_config(opts);
  } catch (const mlsmo::Error& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }

  try {
    mlsmo::Pipeline pipeline(config);
    if (*generate) pipeline.generate();
    if (*train) pipeline.train();
    if (*explain) pipeline.explain();
    if (*optimize) pipeline.optimize();
    if (*validate) pipeline.validate();
    if (*report) pipeline.report();
    if (*run) pipeline.run();
    print_summary(pipeline.run_report(), config.output_dir.string());
  } catch (const mlsmo::Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == mlsmo::ErrorCode::kConfig ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitStage;
  }
  return kExitOk;
}
