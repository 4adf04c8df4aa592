#include "evo/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evo {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

StatFive five_number(std::vector<double> v) {
  StatFive s;
  const double n = static_cast<double>(v.size());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / n;
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.median = v.size() % 2 ? v[v.size() / 2]
                          : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  return s;
}

}  // namespace

MetricReport evaluate(const Eigen::VectorXd& y_true,
                      const Eigen::VectorXd& y_pred) {
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("evaluate: length mismatch");
  if (y_true.size() == 0) throw std::invalid_argument("evaluate: empty input");

  const Eigen::Index n = y_true.size();
  MetricReport r;
  r.n_samples = n;

  Eigen::ArrayXd t = y_true.array();
  Eigen::ArrayXd e = y_pred.array();
  Eigen::ArrayXd diff = e - t;

  r.mse = diff.square().mean();
  r.rmse = std::sqrt(r.mse);
  r.mae = diff.abs().mean();

  double msle_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double ti = t[i], ei = e[i];
    if (ti < 0) {
      ti = 0;
      ++r.msle_clamped;
    }
    if (ei < 0) {
      ei = 0;
      ++r.msle_clamped;
    }
    const double d = std::log1p(ti) - std::log1p(ei);
    msle_sum += d * d;
  }
  r.msle = msle_sum / static_cast<double>(n);

  double smape_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double num = std::abs(t[i] - e[i]);
    const double den = 0.5 * (t[i] + e[i]);
    if (num == 0.0) continue;  // 0/0 contributes 0
    smape_sum += num / den;
  }
  r.smape = smape_sum / static_cast<double>(n) * 100.0;

  const double t_mean = t.mean();
  const double e_mean = e.mean();
  const double var_t = (t - t_mean).square().mean();
  const double d_mean = diff.mean();
  const double var_d = (diff - d_mean).square().mean();
  r.evs = var_t > 0 ? 1.0 - var_d / var_t
                    : std::numeric_limits<double>::quiet_NaN();

  const double sd_t = std::sqrt(var_t);
  const double sd_e = std::sqrt((e - e_mean).square().mean());
  if (sd_t == 0.0 || sd_e == 0.0) {
    r.r_defined = false;
    r.r_value = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.r_value = ((t - t_mean) * (e - e_mean)).mean() / (sd_t * sd_e);
  }
  return r;
}

RunSummary summarize(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("summarize: empty input");
  RunSummary s;
  s.n_runs = static_cast<int>(reports.size());
  std::vector<double> v(reports.size());
  StatFive* fields[7] = {&s.mse, &s.rmse,    &s.mae, &s.msle,
                         &s.smape, &s.evs, &s.r_value};
  for (int m = 0; m < 7; ++m) {
    for (std::size_t i = 0; i < reports.size(); ++i)
      v[i] = metric_value(reports[i], m);
    *fields[m] = five_number(v);
  }
  return s;
}

double metric_value(const MetricReport& r, int metric_index) {
  switch (metric_index) {
    case 0: return r.mse;
    case 1: return r.rmse;
    case 2: return r.mae;
    case 3: return r.msle;
    case 4: return r.smape;
    case 5: return r.evs;
    case 6: return r.r_value;
  }
  throw std::out_of_range("metric index");
}

const StatFive& summary_stat(const RunSummary& s, int metric_index) {
  switch (metric_index) {
    case 0: return s.mse;
    case 1: return s.rmse;
    case 2: return s.mae;
    case 3: return s.msle;
    case 4: return s.smape;
    case 5: return s.evs;
    case 6: return s.r_value;
  }
  throw std::out_of_range("metric index");
}

double stat_value(const StatFive& s, int stat_index) {
  switch (stat_index) {
    case 0: return s.min;
    case 1: return s.max;
    case 2: return s.mean;
    case 3: return s.median;
    case 4: return s.std;
  }
  throw std::out_of_range("stat index");
}

std::string reports_to_csv(const std::vector<MetricReport>& reports) {
  std::string out = "n_samples";
  for (auto name : kMetricNames) out += std::string(",") + name;
  out += '\n';
  for (const auto& r : reports) {
    out += fmt(static_cast<double>(r.n_samples));
    for (int m = 0; m < 7; ++m) out += "," + fmt(metric_value(r, m));
    out += '\n';
  }
  return out;
}

std::string summary_to_csv(const RunSummary& summary) {
  std::string out = "stat";
  for (auto name : kMetricNames) out += std::string(",") + name;
  out += '\n';
  for (int st = 0; st < 5; ++st) {
    out += kStatNames[static_cast<std::size_t>(st)];
    for (int m = 0; m < 7; ++m)
      out += "," + fmt(stat_value(summary_stat(summary, m), st));
    out += '\n';
  }
  return out;
}

}  // namespace evo
