#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "evo/frame.hpp"

namespace evo {

// Exact k-nearest-neighbour index. Neighbour lists include every point tied
// at the k-th distance, and a point is never its own neighbour.
struct NeighborIndex {
  int k = 0;
  Eigen::MatrixXd points;  // row-major observations, as given
  std::vector<std::vector<Eigen::Index>> neighbors;
  Eigen::VectorXd k_distance;

  double distance(Eigen::Index a, Eigen::Index b) const {
    return (points.row(a) - points.row(b)).norm();
  }
};

struct LofReport {
  Eigen::VectorXd lrd;
  Eigen::VectorXd lof;
  double threshold = 0;
  std::vector<Eigen::Index> outliers;  // rows with lof > threshold
};

NeighborIndex build_index(const Eigen::MatrixXd& points, int k, int jobs = 1);

// Reachability distance from x to its neighbour o:
// max(k-distance(o), distance(x, o)). Throws if o is not a neighbour of x.
double reach_dist(const NeighborIndex& index, Eigen::Index x, Eigen::Index o);

// Local reachability density. A zero reachability sum (all neighbours
// coincident) yields the +inf density sentinel.
double lrd(const NeighborIndex& index, Eigen::Index x);

// LOF per row: mean over neighbours of lrd(o)/lrd(x), with inf/inf := 1 and
// finite/inf := 0.
LofReport lof_scores(const Eigen::MatrixXd& points, int k,
                     double threshold = std::numeric_limits<double>::infinity(),
                     int jobs = 1);

struct FilterResult {
  Frame frame;
  LofReport report;
  Eigen::Index removed = 0;
};

// Scores active rows on z-score-standardized feature columns and masks rows
// whose LOF exceeds the threshold.
FilterResult filter_outliers(const Frame& frame,
                             const std::vector<std::string>& feature_columns,
                             int k, double threshold, int jobs = 1);

std::string lof_report_to_csv(const LofReport& report);

}  // namespace evo
