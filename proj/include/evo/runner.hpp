#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evo/ensemble.hpp"
#include "evo/frame.hpp"
#include "evo/lof.hpp"
#include "evo/metaopt.hpp"
#include "evo/metrics.hpp"
#include "evo/tune.hpp"

namespace evo {

// Pipeline-stage failures carry the stage name for the CLI exit contract.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct LofSettings {
  bool enabled = false;
  int k = 20;
  double threshold = 1.5;
  std::vector<std::string> columns;  // empty: features (no rv) + target
};

struct FoldSettings {
  int k = 10;
  int repeats = 1;
  std::uint64_t seed = 42;
};

struct RosterModel {
  std::string name;
  ModelSpec spec;
  // Pipeline flags: backward pruning + Nelder-Mead weight refinement for
  // voting rosters, greedy forward sub-learner selection for stacking.
  bool prune_voting = false;
  bool greedy_stack = false;
};

struct TuningBlock {
  std::string name;
  std::string target;  // roster model name
  ParamSpace space;
  OptimizerConfig optimizer;
};

struct ExperimentConfig {
  std::string preset;
  std::string dataset;  // empty -> EVOENSEMBLE_DATA
  bool exclude_random_controls = false;
  LofSettings lof;
  FoldSettings folds;
  std::vector<RosterModel> roster;
  std::vector<TuningBlock> tuning;
  std::string output_dir = ".";
  int jobs = 1;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

// Built-in rosters mirroring the benchmark tables, with in-house learners
// standing in for external libraries.
ExperimentConfig make_preset(const std::string& name);
std::vector<std::string> preset_names();

struct MemberSolo {
  std::string name;
  RunSummary summary;
};

struct RunKey {
  int repeat = 0;
  int pair = 0;  // index into FoldPlan::repeats
  int test_fold = 0;
  int validation_fold = 0;
};

struct ModelOutcome {
  std::string name;
  bool failed = false;
  std::string error;
  std::vector<RunKey> runs;
  std::vector<MetricReport> fold_reports;
  RunSummary summary;
  // prune_voting extras
  bool has_final_voting = false;
  std::vector<std::string> final_members;
  Eigen::VectorXd final_weights;
  std::vector<MemberSolo> member_solo;
  // greedy_stack extras
  std::vector<std::size_t> greedy_selected;
  std::vector<double> greedy_scores;
};

struct BenchmarkReport {
  std::vector<ModelOutcome> models;
  std::string dataset_checksum;
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0;
  Eigen::Index n_rows_loaded = 0;
  Eigen::Index n_rows_active = 0;
  Eigen::Index lof_removed = 0;
};

// load -> calendar -> optional LOF -> folds -> per (model, repeat, fold)
// fit/evaluate -> summaries. Results are identical for any parallelism
// degree: every task's rng stream derives from (seed, model, repeat, fold).
BenchmarkReport run(const ExperimentConfig& config);

// Same pipeline on an already-loaded frame (tests inject synthetic data).
BenchmarkReport run_on_frame(const ExperimentConfig& config, Frame frame,
                             std::uint64_t dataset_checksum);

std::string summary_csv(const BenchmarkReport& report);
std::string folds_csv(const BenchmarkReport& report);
nlohmann::json report_to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const nlohmann::json& doc);
std::string render_report_text(const BenchmarkReport& report);

// Applies decoded tuning parameters onto a roster spec. Learner targets take
// hyper-parameter names directly; bagging targets understand members,
// max_features, max_samples, et_estimators (inner forest size) and base.*.
ModelSpec apply_params(const ModelSpec& target,
                       const std::map<std::string, double>& params);

TuneResult run_tuning_block(const ExperimentConfig& config,
                            const TuningBlock& block, const Frame& frame);

// Resolves the dataset path: explicit config value or EVOENSEMBLE_DATA.
std::string resolve_dataset_path(const ExperimentConfig& config);

std::string checksum_hex(std::uint64_t checksum);

int cli_main(int argc, char** argv);

}  // namespace evo
