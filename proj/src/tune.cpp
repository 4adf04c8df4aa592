#include "evo/tune.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "evo/pool.hpp"

namespace evo {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void audit_disjoint(const std::vector<Eigen::Index>& train,
                    const std::vector<Eigen::Index>& eval_rows) {
  std::vector<std::uint8_t> seen;
  Eigen::Index max_id = 0;
  for (Eigen::Index r : train) max_id = std::max(max_id, r);
  for (Eigen::Index r : eval_rows) max_id = std::max(max_id, r);
  seen.assign(static_cast<std::size_t>(max_id) + 1, 0);
  for (Eigen::Index r : train) seen[static_cast<std::size_t>(r)] = 1;
  for (Eigen::Index r : eval_rows)
    if (seen[static_cast<std::size_t>(r)])
      throw std::logic_error("row-id audit: train/eval overlap");
}
}  // namespace

MetricReport fit_and_score(const ModelSpec& spec, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y,
                           const std::vector<Eigen::Index>& train_rows,
                           const std::vector<Eigen::Index>& eval_rows) {
  audit_disjoint(train_rows, eval_rows);
  Eigen::MatrixXd xt = x(train_rows, Eigen::all);
  Eigen::VectorXd yt(static_cast<Eigen::Index>(train_rows.size()));
  for (std::size_t i = 0; i < train_rows.size(); ++i)
    yt[static_cast<Eigen::Index>(i)] = y[train_rows[i]];
  ModelPtr model = fit_model(spec, xt, yt);

  Eigen::MatrixXd xe = x(eval_rows, Eigen::all);
  Eigen::VectorXd ye(static_cast<Eigen::Index>(eval_rows.size()));
  for (std::size_t i = 0; i < eval_rows.size(); ++i)
    ye[static_cast<Eigen::Index>(i)] = y[eval_rows[i]];
  return evaluate(ye, model->predict(xe));
}

TuneResult tune(const SpecBuilder& builder, const ParamSpace& space,
                const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const FoldPlan& folds, const OptimizerConfig& config,
                int jobs) {
  validate(space);
  if (folds.repeats.empty())
    throw std::invalid_argument("tune: fold plan has no repeats");

  std::unordered_map<std::string, double> cache;

  auto cv_score = [&](const ModelSpec& spec) -> double {
    const auto n_repeats = folds.repeats.size();
    std::vector<double> rs(n_repeats, kNegInf);
    run_parallel(n_repeats, jobs, [&](std::size_t rep) {
      const auto [test_fold, val_fold] = folds.repeats[rep];
      ModelSpec seeded =
          with_seed(spec, mix_seed(config.seed, 0x7e57ULL, rep));
      MetricReport report =
          fit_and_score(seeded, x, y, folds.rows_excluding(test_fold, val_fold),
                        folds.rows_in_fold(val_fold));
      rs[rep] = report.r_defined ? report.r_value : kNegInf;
    });
    double sum = 0;
    for (double r : rs) {
      if (std::isinf(r)) return kNegInf;
      sum += r;
    }
    return sum / static_cast<double>(n_repeats);
  };

  FitnessFn fitness = [&](const Eigen::VectorXd& v) -> double {
    std::map<std::string, double> params;
    ModelSpec spec;
    std::string key;
    try {
      params = decode(space, v);
      spec = builder(params);
      key = model_spec_to_json(spec).dump();
    } catch (const std::exception&) {
      return kNegInf;
    }
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    double score;
    try {
      score = cv_score(spec);
    } catch (const std::exception&) {
      score = kNegInf;  // non-convergent candidate: rejected, run continues
    }
    cache[key] = score;
    return score;
  };

  TuneResult result;
  result.opt = optimize(config, space, fitness);
  result.best_params = decode(space, result.opt.best.values);
  result.best_spec = builder(result.best_params);

  for (std::size_t rep = 0; rep < folds.repeats.size(); ++rep) {
    const auto [test_fold, val_fold] = folds.repeats[rep];
    ModelSpec seeded =
        with_seed(result.best_spec, mix_seed(config.seed, 0x7e57ULL, rep));
    result.best_fold_reports.push_back(
        fit_and_score(seeded, x, y, folds.rows_excluding(test_fold, val_fold),
                      folds.rows_in_fold(val_fold)));
  }
  return result;
}

}  // namespace evo
