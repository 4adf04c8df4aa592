#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace evo {

// The seven evaluation metrics. MSLE clamps negative inputs at zero before
// log1p; the clamp count is reported. R is flagged undefined when either
// input is constant (the remaining metrics are still filled in).
struct MetricReport {
  double mse = 0, rmse = 0, mae = 0, msle = 0, smape = 0, evs = 0, r_value = 0;
  Eigen::Index n_samples = 0;
  bool r_defined = true;
  Eigen::Index msle_clamped = 0;
};

struct StatFive {
  double min = 0, max = 0, mean = 0, median = 0, std = 0;
};

struct RunSummary {
  StatFive mse, rmse, mae, msle, smape, evs, r_value;
  int n_runs = 0;
};

inline constexpr std::array<const char*, 7> kMetricNames = {
    "mse", "rmse", "mae", "msle", "smape", "evs", "r_value"};
inline constexpr std::array<const char*, 5> kStatNames = {"Min", "Max", "Mean",
                                                          "Median", "STD"};

MetricReport evaluate(const Eigen::VectorXd& y_true,
                      const Eigen::VectorXd& y_pred);

RunSummary summarize(const std::vector<MetricReport>& reports);

double metric_value(const MetricReport& r, int metric_index);
const StatFive& summary_stat(const RunSummary& s, int metric_index);
double stat_value(const StatFive& s, int stat_index);

// CSV with header metric columns in Table order; one row per report.
std::string reports_to_csv(const std::vector<MetricReport>& reports);
// Five rows (Min/Max/Mean/Median/STD), one column per metric.
std::string summary_to_csv(const RunSummary& summary);

}  // namespace evo
