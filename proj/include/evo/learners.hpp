#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace evo {

enum class LearnerFamily { linear, knn, cart, extratree, gbt };

std::string family_name(LearnerFamily f);
LearnerFamily family_from_name(const std::string& name);

// One base learner: family plus hyper-parameter values. Unknown names and
// out-of-bounds values are rejected by validate().
struct LearnerSpec {
  LearnerFamily family = LearnerFamily::linear;
  std::map<std::string, double> hyperparams;
  std::uint64_t seed = 0;
};

void validate(const LearnerSpec& spec);
double hyper(const LearnerSpec& spec, const std::string& name, double fallback);

// Flat binary tree; leaf iff feature < 0. Splits send value <= threshold left.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1, right = -1;
  double value = 0;       // leaf weight / prediction
  Eigen::Index n = 0;     // training samples reaching the node
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
      i = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
  int depth() const;
  int n_leaves() const;
};

// Fitted predictor. Immutable after fit and safe to share across threads.
class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
  virtual nlohmann::json to_json() const = 0;
  Eigen::Index n_features() const { return n_features_; }

 protected:
  void check_width(const Eigen::MatrixXd& x) const;
  Eigen::Index n_features_ = 0;
};

using ModelPtr = std::shared_ptr<const Model>;

struct TreeParams {
  int max_depth = 1 << 20;
  Eigen::Index min_samples_split = 2;
  Eigen::Index min_samples_leaf = 1;
};

struct GbtParams {
  int n_estimators = 100;
  int max_depth = 6;
  double eta = 0.3;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  double subsample = 1.0;
  double lambda = 1.0;
  double alpha = 0.0;
  // NaN means "initialize to mean(y)".
  double base_score = std::numeric_limits<double>::quiet_NaN();
};

// Ordinary least squares with intercept; rank-deficient systems fall back to
// a tiny ridge penalty when allowed so meta-learning stays total.
ModelPtr fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    bool ridge_fallback = true);

ModelPtr fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k);

ModelPtr fit_cart(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const TreeParams& params);

ModelPtr fit_extratree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const TreeParams& params, std::uint64_t seed);

ModelPtr fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const GbtParams& params, std::uint64_t seed);

// Dispatch on spec.family with hyperparams resolved against defaults.
ModelPtr fit(const LearnerSpec& spec, const Eigen::MatrixXd& x,
             const Eigen::VectorXd& y);

ModelPtr base_model_from_json(const nlohmann::json& doc);

nlohmann::json spec_to_json(const LearnerSpec& spec);
LearnerSpec spec_from_json(const nlohmann::json& doc);

}  // namespace evo
