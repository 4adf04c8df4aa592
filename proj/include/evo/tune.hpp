#pragma once

#include <functional>
#include <map>
#include <string>

#include "evo/ensemble.hpp"
#include "evo/frame.hpp"
#include "evo/metaopt.hpp"
#include "evo/metrics.hpp"

namespace evo {

using SpecBuilder =
    std::function<ModelSpec(const std::map<std::string, double>&)>;

struct TuneResult {
  ModelSpec best_spec;
  std::map<std::string, double> best_params;
  OptResult opt;
  // Validation-fold reports of the winning candidate, one per fold repeat.
  std::vector<MetricReport> best_fold_reports;
};

// Hyper-parameter search maximizing mean validation R-value over the fold
// plan. A candidate whose training fails on any fold scores -inf and is
// rejected; the run continues. Duplicate decoded specs are served from a
// cache so the evaluation budget is spent on distinct models.
TuneResult tune(const SpecBuilder& builder, const ParamSpace& space,
                const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const FoldPlan& folds, const OptimizerConfig& config,
                int jobs = 1);

// Shared single-fold fit/score used by tune and the benchmark runner.
MetricReport fit_and_score(const ModelSpec& spec, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y,
                           const std::vector<Eigen::Index>& train_rows,
                           const std::vector<Eigen::Index>& eval_rows);

}  // namespace evo
