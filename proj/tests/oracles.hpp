// Independent reference implementations used as test oracles. Everything here
// is written as plain loops against the published formulas, deliberately
// sharing no code with the library implementations it checks.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracles {

// ---- LOF, straight from the defining equations (O(n^2)) ------------------

struct LofValues {
  std::vector<double> lrd, lof;
};

inline LofValues brute_force_lof(const Eigen::MatrixXd& pts, int k) {
  const auto n = static_cast<std::size_t>(pts.rows());
  auto dist = [&](std::size_t a, std::size_t b) {
    return (pts.row(static_cast<Eigen::Index>(a)) -
            pts.row(static_cast<Eigen::Index>(b)))
        .norm();
  };

  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<double> kdist(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) all.emplace_back(dist(i, j), j);
    std::sort(all.begin(), all.end());
    kdist[i] = all[static_cast<std::size_t>(k - 1)].first;
    for (const auto& [d, j] : all)
      if (d <= kdist[i]) nbrs[i].push_back(j);
  }

  LofValues out;
  out.lrd.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (std::size_t o : nbrs[i]) sum += std::max(kdist[o], dist(i, o));
    out.lrd[i] = sum == 0 ? std::numeric_limits<double>::infinity()
                          : static_cast<double>(nbrs[i].size()) / sum;
  }
  out.lof.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (std::size_t o : nbrs[i]) {
      const double a = out.lrd[o], b = out.lrd[i];
      if (std::isinf(a) && std::isinf(b))
        sum += 1.0;
      else if (std::isinf(b))
        sum += 0.0;
      else
        sum += a / b;
    }
    out.lof[i] = sum / static_cast<double>(nbrs[i].size());
  }
  return out;
}

// ---- the seven metrics as plain loops -------------------------------------

struct LoopMetrics {
  double mse, rmse, mae, msle, smape, evs, r;
  bool r_defined;
};

inline LoopMetrics loop_metrics(const std::vector<double>& t,
                                const std::vector<double>& e) {
  const auto n = t.size();
  LoopMetrics m{};
  double se = 0, ae = 0, sle = 0, sm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = e[i] - t[i];
    se += d * d;
    ae += std::abs(d);
    const double lt = std::log(1.0 + std::max(t[i], 0.0));
    const double le = std::log(1.0 + std::max(e[i], 0.0));
    sle += (lt - le) * (lt - le);
    const double num = std::abs(t[i] - e[i]);
    const double den = (t[i] + e[i]) / 2.0;
    if (num != 0) sm += num / den;
  }
  m.mse = se / static_cast<double>(n);
  m.rmse = std::sqrt(m.mse);
  m.mae = ae / static_cast<double>(n);
  m.msle = sle / static_cast<double>(n);
  m.smape = sm / static_cast<double>(n) * 100.0;

  double mt = 0, me = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += t[i];
    me += e[i];
  }
  mt /= static_cast<double>(n);
  me /= static_cast<double>(n);
  double vt = 0, vd = 0, md = 0;
  for (std::size_t i = 0; i < n; ++i) md += t[i] - e[i];
  md /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    vt += (t[i] - mt) * (t[i] - mt);
    const double d = t[i] - e[i];
    vd += (d - md) * (d - md);
  }
  vt /= static_cast<double>(n);
  vd /= static_cast<double>(n);
  m.evs = vt > 0 ? 1.0 - vd / vt : std::numeric_limits<double>::quiet_NaN();

  double cov = 0, ve = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (t[i] - mt) * (e[i] - me);
    ve += (e[i] - me) * (e[i] - me);
  }
  cov /= static_cast<double>(n);
  ve /= static_cast<double>(n);
  m.r_defined = vt > 0 && ve > 0;
  m.r = m.r_defined ? cov / (std::sqrt(vt) * std::sqrt(ve))
                    : std::numeric_limits<double>::quiet_NaN();
  return m;
}

// ---- least squares through the normal equations ---------------------------

inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return (a.transpose() * a).fullPivLu().solve(a.transpose() * y);
}

// ---- KNN by sorting all training distances --------------------------------

inline double knn_sort_and_average(const Eigen::MatrixXd& train_z,
                                   const Eigen::VectorXd& y,
                                   const Eigen::RowVectorXd& query_z, int k) {
  std::vector<std::pair<double, Eigen::Index>> d;
  for (Eigen::Index i = 0; i < train_z.rows(); ++i)
    d.emplace_back((train_z.row(i) - query_z).norm(), i);
  std::sort(d.begin(), d.end());
  double sum = 0;
  for (int i = 0; i < k; ++i) sum += y[d[static_cast<std::size_t>(i)].second];
  return sum / k;
}

// ---- Pearson r via the covariance formula ----------------------------------

inline double pearson_direct(const std::vector<double>& a,
                             const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

// ---- exhaustive single-split scan (variance criterion) ---------------------

struct BestSplit {
  int feature = -1;
  double lo = 0, hi = 0;  // the adjacent values the best threshold separates
  double sse_reduction = -1;
};

inline BestSplit exhaustive_best_split(const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  double mean = y.mean();
  double parent_sse = (y.array() - mean).square().sum();
  BestSplit best;
  for (int f = 0; f < x.cols(); ++f) {
    std::vector<std::pair<double, double>> v;
    for (Eigen::Index i = 0; i < n; ++i) v.emplace_back(x(i, f), y[i]);
    std::sort(v.begin(), v.end());
    for (Eigen::Index cut = 1; cut < n; ++cut) {
      if (v[static_cast<std::size_t>(cut - 1)].first ==
          v[static_cast<std::size_t>(cut)].first)
        continue;
      double sl = 0, sr = 0;
      for (Eigen::Index i = 0; i < cut; ++i)
        sl += v[static_cast<std::size_t>(i)].second;
      for (Eigen::Index i = cut; i < n; ++i)
        sr += v[static_cast<std::size_t>(i)].second;
      double sse = 0;
      const double ml = sl / static_cast<double>(cut);
      const double mr = sr / static_cast<double>(n - cut);
      for (Eigen::Index i = 0; i < cut; ++i) {
        const double d = v[static_cast<std::size_t>(i)].second - ml;
        sse += d * d;
      }
      for (Eigen::Index i = cut; i < n; ++i) {
        const double d = v[static_cast<std::size_t>(i)].second - mr;
        sse += d * d;
      }
      const double reduction = parent_sse - sse;
      if (reduction > best.sse_reduction) {
        best.feature = f;
        best.lo = v[static_cast<std::size_t>(cut - 1)].first;
        best.hi = v[static_cast<std::size_t>(cut)].first;
        best.sse_reduction = reduction;
      }
    }
  }
  return best;
}

// ---- sample five-number summary --------------------------------------------

struct FiveNumbers {
  double min, max, mean, median, std;
};

inline FiveNumbers five_numbers(std::vector<double> v) {
  FiveNumbers f{};
  const auto n = static_cast<double>(v.size());
  for (double x : v) f.mean += x;
  f.mean /= n;
  for (double x : v) f.std += (x - f.mean) * (x - f.mean);
  f.std = v.size() > 1 ? std::sqrt(f.std / (n - 1)) : 0;
  std::sort(v.begin(), v.end());
  f.min = v.front();
  f.max = v.back();
  f.median = v.size() % 2 ? v[v.size() / 2]
                          : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2;
  return f;
}

}  // namespace oracles
