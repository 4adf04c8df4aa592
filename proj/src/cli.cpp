#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "evo/runner.hpp"

namespace evo {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw StageError("report", "cannot write '" + path.string() + "'");
  out << content;
}

std::string describe_csv(const Frame& frame) {
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  std::string out = "column,min,max,mean,median,std\n";
  for (const auto& col : frame.schema()) {
    if (col.kind == ColumnKind::timestamp) continue;
    ColumnStats s = describe(frame, col.name);
    out += col.name + ',' + fmt(s.min) + ',' + fmt(s.max) + ',' + fmt(s.mean) +
           ',' + fmt(s.median) + ',' + fmt(s.std) + '\n';
  }
  return out;
}

std::string correlations_csv(const Frame& frame) {
  std::vector<std::string> cols;
  for (const auto& col : frame.schema()) {
    if (col.kind == ColumnKind::timestamp) continue;
    ColumnStats s = describe(frame, col.name);
    if (s.std > 0) cols.push_back(col.name);  // constant columns have no r
  }
  Eigen::MatrixXd corr = pearson_matrix(frame, cols);
  std::string out = "column";
  for (const auto& c : cols) out += ',' + c;
  out += '\n';
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out += cols[i];
    for (std::size_t j = 0; j < cols.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.6f",
                    corr(static_cast<Eigen::Index>(i),
                         static_cast<Eigen::Index>(j)));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> default_lof_columns(const Frame& frame) {
  std::vector<std::string> cols = frame.feature_columns(false);
  cols.push_back(frame.target_column());
  return cols;
}

Frame load_dataset(const ExperimentConfig& config) {
  const std::string path = resolve_dataset_path(config);
  try {
    return load_csv(path, SchemaMode::strict);
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }
}

Frame prepared_frame(const ExperimentConfig& config) {
  Frame frame = load_dataset(config);
  try {
    frame = derive_calendar(frame);
  } catch (const std::exception& e) {
    throw StageError("calendar", e.what());
  }
  if (config.lof.enabled) {
    try {
      std::vector<std::string> cols = config.lof.columns;
      if (cols.empty()) cols = default_lof_columns(frame);
      frame = filter_outliers(frame, cols, config.lof.k, config.lof.threshold,
                              config.jobs)
                  .frame;
    } catch (const std::exception& e) {
      throw StageError("clean", e.what());
    }
  }
  return frame;
}

int cmd_describe(const ExperimentConfig& config, const std::string& out_dir) {
  Frame frame = load_dataset(config);
  const std::string table = describe_csv(frame);
  std::cout << table;
  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "describe.csv", table);
    write_file(fs::path(out_dir) / "correlations.csv",
               correlations_csv(frame));
  }
  return 0;
}

int cmd_clean(const ExperimentConfig& config, const std::string& out_dir) {
  Frame frame = load_dataset(config);
  FilterResult result;
  try {
    std::vector<std::string> cols = config.lof.columns;
    if (cols.empty()) cols = default_lof_columns(frame);
    result = filter_outliers(frame, cols, config.lof.k, config.lof.threshold,
                             config.jobs);
  } catch (const std::exception& e) {
    throw StageError("clean", e.what());
  }
  const fs::path dir = out_dir.empty() ? config.output_dir : out_dir;
  fs::create_directories(dir);
  save_csv(result.frame, (dir / "cleaned.csv").string());
  write_file(dir / "lof.csv", lof_report_to_csv(result.report));
  std::cout << "removed " << result.removed << " of " << frame.n_active()
            << " rows (k=" << config.lof.k
            << ", threshold=" << config.lof.threshold << ")\n";
  return 0;
}

int cmd_train(const ExperimentConfig& config, const std::string& model_name,
              const std::string& out_dir) {
  Frame frame = prepared_frame(config);
  if (config.roster.empty())
    throw StageError("train", "config has no models");
  const RosterModel* model = &config.roster.front();
  if (!model_name.empty()) {
    model = nullptr;
    for (const auto& m : config.roster)
      if (m.name == model_name) model = &m;
    if (!model)
      throw StageError("train", "unknown model '" + model_name + "'");
  }

  auto rows = frame.active_rows();
  auto features = frame.feature_columns(!config.exclude_random_controls);
  Eigen::MatrixXd x = frame.matrix(features, rows);
  Eigen::VectorXd y = frame.gather(frame.target_column(), rows);

  ModelSpec seeded = with_seed(
      model->spec, mix_seed(config.folds.seed,
                            fnv1a(model->name.data(), model->name.size())));
  ModelPtr fitted;
  try {
    fitted = fit_model(seeded, x, y);
  } catch (const std::exception& e) {
    throw StageError("train", e.what());
  }

  const fs::path dir = out_dir.empty() ? config.output_dir : out_dir;
  const fs::path path = dir / (model->name + ".model.json");
  write_file(path, fitted->to_json().dump(2));

  // round-trip self check
  std::ifstream in(path);
  nlohmann::json doc;
  in >> doc;
  ModelPtr reloaded = model_from_json(doc);
  const Eigen::Index probe = std::min<Eigen::Index>(x.rows(), 256);
  Eigen::VectorXd a = fitted->predict(x.topRows(probe));
  Eigen::VectorXd b = reloaded->predict(x.topRows(probe));
  if (a != b)
    throw StageError("train", "serialized model predictions diverge");
  std::cout << "wrote " << path.string() << " (round-trip verified on "
            << probe << " rows)\n";
  return 0;
}

int cmd_tune(const ExperimentConfig& config, const std::string& block_name,
             const std::string& out_dir) {
  if (config.tuning.empty())
    throw StageError("tune", "config has no tuning blocks");
  const TuningBlock* block = &config.tuning.front();
  if (!block_name.empty()) {
    block = nullptr;
    for (const auto& b : config.tuning)
      if (b.name == block_name) block = &b;
    if (!block)
      throw StageError("tune", "unknown tuning block '" + block_name + "'");
  }

  Frame frame = prepared_frame(config);
  TuneResult result = run_tuning_block(config, *block, frame);

  const fs::path dir = out_dir.empty() ? config.output_dir : out_dir;
  write_file(dir / ("tune_" + block->name + "_best.json"),
             model_spec_to_json(result.best_spec).dump(2));
  write_file(dir / ("tune_" + block->name + "_trace.csv"),
             trace_to_csv(result.opt));
  write_file(dir / ("tune_" + block->name + "_folds.csv"),
             reports_to_csv(result.best_fold_reports));

  std::cout << "best fitness " << result.opt.best.fitness << " after "
            << result.opt.evaluations << " evaluations\n";
  for (const auto& [name, value] : result.best_params)
    std::cout << "  " << name << " = " << value << '\n';
  return 0;
}

int cmd_benchmark(const ExperimentConfig& config, const std::string& out_dir) {
  BenchmarkReport report = run(config);
  const fs::path dir = out_dir.empty() ? config.output_dir : out_dir;
  write_file(dir / "summary.csv", summary_csv(report));
  write_file(dir / "folds.csv", folds_csv(report));
  write_file(dir / "report.json", report_to_json(report).dump(2));
  std::cout << render_report_text(report);
  bool any_failed = false;
  for (const auto& m : report.models) any_failed |= m.failed;
  return any_failed ? 2 : 0;
}

int cmd_report(const std::string& input, const std::string& config_path) {
  std::ifstream in(input);
  if (!in) throw StageError("report", "cannot open '" + input + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw StageError("report", std::string("invalid JSON: ") + e.what());
  }
  BenchmarkReport report = report_from_json(doc);

  // summaries must be recomputable from the fold-level reports
  for (const auto& m : report.models) {
    if (m.failed) continue;
    RunSummary recomputed = summarize(m.fold_reports);
    for (int metric = 0; metric < 7; ++metric)
      for (int st = 0; st < 5; ++st) {
        const double a = stat_value(summary_stat(m.summary, metric), st);
        const double b = stat_value(summary_stat(recomputed, metric), st);
        if (!(std::abs(a - b) <= 1e-9 * (1 + std::abs(a))) &&
            !(std::isnan(a) && std::isnan(b)))
          throw StageError("report", "summary for '" + m.name +
                                         "' does not match its fold reports");
      }
  }

  if (!config_path.empty()) {
    ExperimentConfig config = load_config(config_path);
    const std::string dump = config_to_json(config).dump();
    const std::string hash = checksum_hex(fnv1a(dump.data(), dump.size()));
    if (hash != report.config_hash)
      throw StageError("report", "config hash mismatch: report was produced "
                                 "by a different configuration");
  }

  std::cout << render_report_text(report);
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"evoensemble: ensemble regression benchmark on sensor data"};
  app.require_subcommand(1);

  std::string config_path, out_dir, model_name, input_path, block_name;
  long long seed_override = -1;
  int jobs_override = -1;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "config JSON path");
    if (config_required) opt->required();
    sub->add_option("--seed", seed_override, "override fold seed");
    sub->add_option("--jobs", jobs_override, "worker count");
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* describe = app.add_subcommand("describe", "column statistics");
  add_common(describe, true);
  auto* clean = app.add_subcommand("clean", "LOF filter, write cleaned table");
  add_common(clean, true);
  auto* train = app.add_subcommand("train", "fit one model and serialize it");
  add_common(train, true);
  train->add_option("--model", model_name, "roster model name");
  auto* tune_cmd = app.add_subcommand("tune", "run one tuning block");
  add_common(tune_cmd, true);
  tune_cmd->add_option("--block", block_name, "tuning block name");
  auto* benchmark = app.add_subcommand("benchmark", "full cross-validated run");
  add_common(benchmark, true);
  auto* report_cmd = app.add_subcommand("report", "render a saved report");
  report_cmd->add_option("--input", input_path, "report.json path")->required();
  report_cmd->add_option("--config", config_path,
                         "verify the report matches this config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (report_cmd->parsed()) return cmd_report(input_path, config_path);

    ExperimentConfig config = load_config(config_path);
    if (seed_override >= 0)
      config.folds.seed = static_cast<std::uint64_t>(seed_override);
    if (jobs_override > 0) config.jobs = jobs_override;

    if (describe->parsed()) return cmd_describe(config, out_dir);
    if (clean->parsed()) return cmd_clean(config, out_dir);
    if (train->parsed()) return cmd_train(config, model_name, out_dir);
    if (tune_cmd->parsed()) return cmd_tune(config, block_name, out_dir);
    if (benchmark->parsed()) return cmd_benchmark(config, out_dir);
    throw StageError("cli", "no subcommand dispatched");
  } catch (const StageError& e) {
    std::cerr << "error " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace evo
