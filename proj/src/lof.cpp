#include "evo/lof.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace evo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void for_each_row_parallel(Eigen::Index n, int jobs,
                           const std::function<void(Eigen::Index)>& body) {
  if (jobs <= 1 || n < 64) {
    for (Eigen::Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  auto worker = [&] {
    for (;;) {
      Eigen::Index i = next.fetch_add(1);
      if (i >= n) return;
      body(i);
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

}  // namespace

NeighborIndex build_index(const Eigen::MatrixXd& points, int k, int jobs) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw std::invalid_argument("build_index: k must be positive");
  if (static_cast<Eigen::Index>(k) >= n)
    throw std::invalid_argument("build_index: k must be below the point count");
  if (!points.allFinite())
    throw std::invalid_argument("build_index: points contain NaN/inf");

  NeighborIndex index;
  index.k = k;
  index.points = points;
  index.neighbors.assign(static_cast<std::size_t>(n), {});
  index.k_distance.resize(n);

  for_each_row_parallel(n, jobs, [&](Eigen::Index i) {
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j)
      dist[static_cast<std::size_t>(j)] = (points.row(j) - points.row(i)).norm();
    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    auto by_dist = [&](Eigen::Index a, Eigen::Index b) {
      double da = dist[static_cast<std::size_t>(a)];
      double db = dist[static_cast<std::size_t>(b)];
      return da != db ? da < db : a < b;
    };
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                     by_dist);
    const double kd = dist[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])];
    std::vector<Eigen::Index> nbrs;
    for (Eigen::Index j : order)
      if (dist[static_cast<std::size_t>(j)] <= kd) nbrs.push_back(j);
    std::sort(nbrs.begin(), nbrs.end(), by_dist);
    index.neighbors[static_cast<std::size_t>(i)] = std::move(nbrs);
    index.k_distance[i] = kd;
  });
  return index;
}

double reach_dist(const NeighborIndex& index, Eigen::Index x, Eigen::Index o) {
  const auto& nbrs = index.neighbors[static_cast<std::size_t>(x)];
  if (std::find(nbrs.begin(), nbrs.end(), o) == nbrs.end())
    throw std::invalid_argument("reach_dist: o is not a neighbour of x");
  return std::max(index.k_distance[o], index.distance(x, o));
}

double lrd(const NeighborIndex& index, Eigen::Index x) {
  const auto& nbrs = index.neighbors[static_cast<std::size_t>(x)];
  double sum = 0;
  for (Eigen::Index o : nbrs)
    sum += std::max(index.k_distance[o], index.distance(x, o));
  if (sum == 0.0) return kInf;
  return static_cast<double>(nbrs.size()) / sum;
}

LofReport lof_scores(const Eigen::MatrixXd& points, int k, double threshold,
                     int jobs) {
  NeighborIndex index = build_index(points, k, jobs);
  const Eigen::Index n = points.rows();
  LofReport report;
  report.threshold = threshold;
  report.lrd.resize(n);
  report.lof.resize(n);

  for_each_row_parallel(n, jobs,
                        [&](Eigen::Index i) { report.lrd[i] = lrd(index, i); });

  for_each_row_parallel(n, jobs, [&](Eigen::Index i) {
    const auto& nbrs = index.neighbors[static_cast<std::size_t>(i)];
    const double own = report.lrd[i];
    double sum = 0;
    for (Eigen::Index o : nbrs) {
      const double other = report.lrd[o];
      double ratio;
      if (std::isinf(other) && std::isinf(own))
        ratio = 1.0;
      else if (std::isinf(own))
        ratio = 0.0;
      else
        ratio = other / own;  // may be +inf when a neighbour is degenerate
      sum += ratio;
    }
    report.lof[i] = sum / static_cast<double>(nbrs.size());
  });

  for (Eigen::Index i = 0; i < n; ++i)
    if (report.lof[i] > threshold) report.outliers.push_back(i);
  return report;
}

FilterResult filter_outliers(const Frame& frame,
                             const std::vector<std::string>& feature_columns,
                             int k, double threshold, int jobs) {
  if (!(threshold > 1.0))
    throw std::invalid_argument("filter_outliers: threshold must exceed 1");
  auto rows = frame.active_rows();
  if (static_cast<Eigen::Index>(rows.size()) < k + 1)
    throw std::invalid_argument(
        "filter_outliers: need more than k active rows");

  Eigen::MatrixXd x = frame.matrix(feature_columns, rows);
  // z-score standardization so Wh-scale columns do not dominate the metric
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::RowVectorXd sd =
      (centered.colwise().squaredNorm() / double(x.rows())).cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (sd[j] == 0.0) sd[j] = 1.0;
  Eigen::MatrixXd z = centered.array().rowwise() / sd.array();

  LofReport report = lof_scores(z, k, threshold, jobs);

  std::vector<std::uint8_t> mask = frame.active_mask();
  for (Eigen::Index local : report.outliers)
    mask[static_cast<std::size_t>(rows[static_cast<std::size_t>(local)])] = 0;

  FilterResult result{frame.with_mask(std::move(mask)), std::move(report), 0};
  result.removed = static_cast<Eigen::Index>(result.report.outliers.size());
  return result;
}

std::string lof_report_to_csv(const LofReport& report) {
  auto fmt = [](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
  };
  std::vector<bool> is_outlier(static_cast<std::size_t>(report.lof.size()),
                               false);
  for (Eigen::Index i : report.outliers)
    is_outlier[static_cast<std::size_t>(i)] = true;
  std::string out = "row_id,lrd,lof,is_outlier\n";
  for (Eigen::Index i = 0; i < report.lof.size(); ++i) {
    out += std::to_string(i);
    out += ',' + fmt(report.lrd[i]) + ',' + fmt(report.lof[i]) + ',';
    out += is_outlier[static_cast<std::size_t>(i)] ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace evo
