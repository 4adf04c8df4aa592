#include "evo/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evo/rng.hpp"

namespace evo {

using nlohmann::json;

std::string family_name(LearnerFamily f) {
  switch (f) {
    case LearnerFamily::linear: return "linear";
    case LearnerFamily::knn: return "knn";
    case LearnerFamily::cart: return "cart";
    case LearnerFamily::extratree: return "extratree";
    case LearnerFamily::gbt: return "gbt";
  }
  throw std::logic_error("bad family");
}

LearnerFamily family_from_name(const std::string& name) {
  if (name == "linear") return LearnerFamily::linear;
  if (name == "knn") return LearnerFamily::knn;
  if (name == "cart") return LearnerFamily::cart;
  if (name == "extratree") return LearnerFamily::extratree;
  if (name == "gbt") return LearnerFamily::gbt;
  throw std::invalid_argument("unknown learner family '" + name + "'");
}

namespace {

struct ParamRule {
  const char* name;
  double lo, hi;
};

// Allowed hyper-parameter names and bounds per family. gbt names follow the
// boosting table acronyms; B is the booster selector (dart decodes to the
// same tree booster).
const std::vector<ParamRule>& rules_for(LearnerFamily f) {
  static const std::vector<ParamRule> linear = {{"ridge_fallback", 0, 1}};
  static const std::vector<ParamRule> knn = {{"K", 1, 1e9}};
  static const std::vector<ParamRule> tree = {{"max_depth", 0, 1e9},
                                              {"min_samples_split", 2, 1e9},
                                              {"min_samples_leaf", 1, 1e9}};
  static const std::vector<ParamRule> gbt = {
      {"N_est", 1, 10000},  {"Max_d", 0, 1000}, {"B", 0, 1},
      {"eta", 1e-12, 1},    {"gamma", 0, 1e18}, {"Min_cw", 0, 1e18},
      {"sub_s", 1e-12, 1},  {"lambda", 0, 1e18}, {"alpha", 0, 1e18},
      {"base_score", -1e18, 1e18}};
  switch (f) {
    case LearnerFamily::linear: return linear;
    case LearnerFamily::knn: return knn;
    case LearnerFamily::cart:
    case LearnerFamily::extratree: return tree;
    case LearnerFamily::gbt: return gbt;
  }
  throw std::logic_error("bad family");
}

}  // namespace

void validate(const LearnerSpec& spec) {
  const auto& rules = rules_for(spec.family);
  for (const auto& [name, value] : spec.hyperparams) {
    const ParamRule* rule = nullptr;
    for (const auto& r : rules)
      if (name == r.name) rule = &r;
    if (!rule)
      throw std::invalid_argument("unknown hyperparameter '" + name +
                                  "' for family " + family_name(spec.family));
    if (!(value >= rule->lo && value <= rule->hi))
      throw std::invalid_argument("hyperparameter '" + name +
                                  "' out of bounds");
  }
}

double hyper(const LearnerSpec& spec, const std::string& name,
             double fallback) {
  auto it = spec.hyperparams.find(name);
  return it == spec.hyperparams.end() ? fallback : it->second;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    } else {
      best = std::max(best, d[i]);
    }
  }
  return best;
}

int Tree::n_leaves() const {
  int c = 0;
  for (const auto& n : nodes)
    if (n.feature < 0) ++c;
  return c;
}

void Model::check_width(const Eigen::MatrixXd& x) const {
  if (x.cols() != n_features_)
    throw std::invalid_argument(
        "predict: expected " + std::to_string(n_features_) + " features, got " +
        std::to_string(x.cols()));
}

namespace {

json tree_to_json(const Tree& tree, int i = 0) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(i)];
  if (n.feature < 0) return json{{"leaf", {{"w", n.value}, {"n", n.n}}}};
  return json{{"split",
               {{"feature", n.feature},
                {"threshold", n.threshold},
                {"left", tree_to_json(tree, n.left)},
                {"right", tree_to_json(tree, n.right)}}}};
}

int tree_from_json(const json& doc, Tree& tree) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (doc.contains("leaf")) {
    tree.nodes[static_cast<std::size_t>(idx)].value = doc["leaf"]["w"];
    tree.nodes[static_cast<std::size_t>(idx)].n = doc["leaf"]["n"];
    return idx;
  }
  const json& s = doc.at("split");
  const int left = tree_from_json(s["left"], tree);
  const int right = tree_from_json(s["right"], tree);
  TreeNode& n = tree.nodes[static_cast<std::size_t>(idx)];
  n.feature = s["feature"];
  n.threshold = s["threshold"];
  n.left = left;
  n.right = right;
  return idx;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = a[static_cast<std::size_t>(i)];
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  if (r == 0) return Eigen::MatrixXd(0, 0);
  const auto c = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    m.row(i) = vector_from_json(rows[static_cast<std::size_t>(i)]).transpose();
  return m;
}

class LinearModel final : public Model {
 public:
  LinearModel(Eigen::VectorXd coef, Eigen::Index p) : coef_(std::move(coef)) {
    n_features_ = p;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    check_width(x);
    return (x * coef_.tail(n_features_)).array() + coef_[0];
  }

  json to_json() const override {
    return json{{"format", "evoensemble-model"},
                {"family", "linear"},
                {"state", {{"coefficients", vector_to_json(coef_)}}}};
  }

  const Eigen::VectorXd& coefficients() const { return coef_; }

 private:
  Eigen::VectorXd coef_;  // [intercept, slopes...]
};

class KnnModel final : public Model {
 public:
  KnnModel(Eigen::MatrixXd x, Eigen::VectorXd y, int k, Eigen::RowVectorXd mean,
           Eigen::RowVectorXd sd)
      : x_(std::move(x)), y_(std::move(y)), k_(k), mean_(std::move(mean)),
        sd_(std::move(sd)) {
    n_features_ = x_.cols();
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    check_width(x);
    Eigen::VectorXd out(x.rows());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x_.rows()));
    for (Eigen::Index q = 0; q < x.rows(); ++q) {
      Eigen::RowVectorXd z = (x.row(q) - mean_).array() / sd_.array();
      Eigen::VectorXd d2 = (x_.rowwise() - z).rowwise().squaredNorm();
      std::iota(order.begin(), order.end(), 0);
      std::nth_element(order.begin(), order.begin() + (k_ - 1), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) {
                         return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
                       });
      double sum = 0;
      for (int i = 0; i < k_; ++i) sum += y_[order[static_cast<std::size_t>(i)]];
      out[q] = sum / k_;
    }
    return out;
  }

  json to_json() const override {
    return json{{"format", "evoensemble-model"},
                {"family", "knn"},
                {"hyperparams", {{"K", k_}}},
                {"state",
                 {{"x", matrix_to_json(x_)},
                  {"y", vector_to_json(y_)},
                  {"mean", vector_to_json(mean_.transpose())},
                  {"sd", vector_to_json(sd_.transpose())}}}};
  }

 private:
  Eigen::MatrixXd x_;  // standardized training rows
  Eigen::VectorXd y_;
  int k_;
  Eigen::RowVectorXd mean_, sd_;
};

class TreeModel final : public Model {
 public:
  TreeModel(Tree tree, LearnerFamily family, Eigen::Index p)
      : tree_(std::move(tree)), family_(family) {
    n_features_ = p;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    check_width(x);
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out[i] = tree_.predict_row(x.row(i));
    return out;
  }

  json to_json() const override {
    return json{{"format", "evoensemble-model"},
                {"family", family_name(family_)},
                {"state",
                 {{"n_features", n_features_}, {"tree", tree_to_json(tree_)}}}};
  }

  const Tree& tree() const { return tree_; }

 private:
  Tree tree_;
  LearnerFamily family_;
};

class GbtModel final : public Model {
 public:
  GbtModel(std::vector<Tree> trees, double base_score, double eta,
           Eigen::Index p)
      : trees_(std::move(trees)), base_score_(base_score), eta_(eta) {
    n_features_ = p;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    check_width(x);
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), base_score_);
    for (const auto& t : trees_)
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        out[i] += eta_ * t.predict_row(x.row(i));
    return out;
  }

  json to_json() const override {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(tree_to_json(t));
    return json{{"format", "evoensemble-model"},
                {"family", "gbt"},
                {"state",
                 {{"n_features", n_features_},
                  {"base_score", base_score_},
                  {"eta", eta_},
                  {"trees", trees}}}};
  }

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<Tree> trees_;
  double base_score_;
  double eta_;
};

// ---- split search ------------------------------------------------------

struct SplitResult {
  bool found = false;
  int feature = -1;
  double threshold = 0;
  double score = -std::numeric_limits<double>::infinity();
};

// Threshold between two adjacent sorted values; falls back to the left value
// when the midpoint rounds onto the right one.
double safe_threshold(double lo, double hi) {
  double mid = lo + 0.5 * (hi - lo);
  if (!(lo <= mid && mid < hi)) mid = lo;
  return mid;
}

// Exhaustive best variance-reduction split over all features.
SplitResult best_cart_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const std::vector<Eigen::Index>& rows,
                            Eigen::Index min_leaf) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  SplitResult best;
  std::vector<std::pair<double, double>> vals(static_cast<std::size_t>(n));
  for (int f = 0; f < x.cols(); ++f) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index r = rows[static_cast<std::size_t>(i)];
      vals[static_cast<std::size_t>(i)] = {x(r, f), y[r]};
    }
    std::sort(vals.begin(), vals.end());
    double left_sum = 0;
    double total = 0;
    for (const auto& [xv, yv] : vals) total += yv;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      left_sum += vals[static_cast<std::size_t>(i)].second;
      if (vals[static_cast<std::size_t>(i)].first ==
          vals[static_cast<std::size_t>(i + 1)].first)
        continue;
      const Eigen::Index nl = i + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double right_sum = total - left_sum;
      const double score =
          left_sum * left_sum / double(nl) + right_sum * right_sum / double(nr);
      if (score > best.score) {
        best.found = true;
        best.feature = f;
        best.threshold = safe_threshold(vals[static_cast<std::size_t>(i)].first,
                                        vals[static_cast<std::size_t>(i + 1)].first);
        best.score = score;
      }
    }
  }
  return best;
}

// One uniform-random threshold per feature; keep the best of those draws.
SplitResult best_random_split(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y,
                              const std::vector<Eigen::Index>& rows,
                              Eigen::Index min_leaf, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  SplitResult best;
  for (int f = 0; f < x.cols(); ++f) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r : rows) {
      lo = std::min(lo, x(r, f));
      hi = std::max(hi, x(r, f));
    }
    if (!(lo < hi)) continue;  // constant feature never yields a valid split
    const double thr = rng.uniform(lo, hi);
    Eigen::Index nl = 0;
    double left_sum = 0, total = 0;
    for (Eigen::Index r : rows) {
      total += y[r];
      if (x(r, f) <= thr) {
        ++nl;
        left_sum += y[r];
      }
    }
    const Eigen::Index nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double right_sum = total - left_sum;
    const double score =
        left_sum * left_sum / double(nl) + right_sum * right_sum / double(nr);
    if (score > best.score) {
      best.found = true;
      best.feature = f;
      best.threshold = thr;
      best.score = score;
    }
  }
  return best;
}

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  const TreeParams& params;
  Rng* rng;  // non-null selects random-threshold splitting
  Tree tree;

  int build(std::vector<Eigen::Index> rows, int depth) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto n = static_cast<Eigen::Index>(rows.size());
    double sum = 0;
    for (Eigen::Index r : rows) sum += y[r];
    tree.nodes[static_cast<std::size_t>(idx)].value = sum / double(n);
    tree.nodes[static_cast<std::size_t>(idx)].n = n;

    if (depth >= params.max_depth || n < params.min_samples_split ||
        n < 2 * params.min_samples_leaf)
      return idx;
    double ss = 0;
    const double mean = sum / double(n);
    for (Eigen::Index r : rows) ss += (y[r] - mean) * (y[r] - mean);
    if (ss == 0.0) return idx;

    SplitResult split =
        rng ? best_random_split(x, y, rows, params.min_samples_leaf, *rng)
            : best_cart_split(x, y, rows, params.min_samples_leaf);
    if (!split.found) return idx;

    std::vector<Eigen::Index> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (Eigen::Index r : rows)
      (x(r, split.feature) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return idx;
  }
};

// ---- gradient boosting -------------------------------------------------

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

struct GbtTreeBuilder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& grad;
  const GbtParams& params;
  Tree tree;

  double leaf_weight(double g, double h) const {
    return -soft_threshold(g, params.alpha) / (h + params.lambda);
  }

  int build(std::vector<Eigen::Index> rows, int depth) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double g = 0;
    for (Eigen::Index r : rows) g += grad[r];
    const double h = static_cast<double>(rows.size());
    tree.nodes[static_cast<std::size_t>(idx)].value = leaf_weight(g, h);
    tree.nodes[static_cast<std::size_t>(idx)].n =
        static_cast<Eigen::Index>(rows.size());
    if (depth >= params.max_depth) return idx;

    // split gain = 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma,
    // children constrained to Min_cw hessian mass; gain <= 0 is refused.
    SplitResult best;
    const auto n = static_cast<Eigen::Index>(rows.size());
    std::vector<std::pair<double, double>> vals(static_cast<std::size_t>(n));
    const double parent_score = g * g / (h + params.lambda);
    for (int f = 0; f < x.cols(); ++f) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index r = rows[static_cast<std::size_t>(i)];
        vals[static_cast<std::size_t>(i)] = {x(r, f), grad[r]};
      }
      std::sort(vals.begin(), vals.end());
      double gl = 0;
      for (Eigen::Index i = 0; i + 1 < n; ++i) {
        gl += vals[static_cast<std::size_t>(i)].second;
        if (vals[static_cast<std::size_t>(i)].first ==
            vals[static_cast<std::size_t>(i + 1)].first)
          continue;
        const double hl = static_cast<double>(i + 1);
        const double hr = static_cast<double>(n - i - 1);
        if (hl < params.min_child_weight || hr < params.min_child_weight)
          continue;
        const double gr = g - gl;
        const double gain = 0.5 * (gl * gl / (hl + params.lambda) +
                                   gr * gr / (hr + params.lambda) -
                                   parent_score) -
                            params.gamma;
        if (gain > 0 && gain > best.score) {
          best.found = true;
          best.feature = f;
          best.threshold =
              safe_threshold(vals[static_cast<std::size_t>(i)].first,
                             vals[static_cast<std::size_t>(i + 1)].first);
          best.score = gain;
        }
      }
    }
    if (!best.found) return idx;

    std::vector<Eigen::Index> left, right;
    for (Eigen::Index r : rows)
      (x(r, best.feature) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return idx;
  }
};

void standardize_stats(const Eigen::MatrixXd& x, Eigen::RowVectorXd& mean,
                       Eigen::RowVectorXd& sd) {
  mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  sd = (centered.colwise().squaredNorm() / double(x.rows())).cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (sd[j] == 0.0) sd[j] = 1.0;
}

}  // namespace

ModelPtr fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    bool ridge_fallback) {
  if (x.rows() != y.size())
    throw std::invalid_argument("fit_linear: row count mismatch");
  if (x.rows() == 0) throw std::invalid_argument("fit_linear: empty data");
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() == a.cols() && a.rows() > x.cols()) {
    return std::make_shared<LinearModel>(qr.solve(y).eval(), x.cols());
  }
  if (!ridge_fallback)
    throw std::runtime_error("fit_linear: rank-deficient design matrix");
  Eigen::MatrixXd gram = a.transpose() * a;
  gram.diagonal().array() += 1e-8;
  Eigen::VectorXd coef = gram.ldlt().solve(a.transpose() * y);
  return std::make_shared<LinearModel>(std::move(coef), x.cols());
}

ModelPtr fit_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k) {
  if (x.rows() != y.size())
    throw std::invalid_argument("fit_knn: row count mismatch");
  if (k < 1 || static_cast<Eigen::Index>(k) > x.rows())
    throw std::invalid_argument("fit_knn: K out of range");
  Eigen::RowVectorXd mean, sd;
  standardize_stats(x, mean, sd);
  Eigen::MatrixXd z = (x.rowwise() - mean).array().rowwise() / sd.array();
  return std::make_shared<KnnModel>(std::move(z), y, k, std::move(mean),
                                    std::move(sd));
}

ModelPtr fit_cart(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const TreeParams& params) {
  if (x.rows() != y.size() || x.rows() == 0)
    throw std::invalid_argument("fit_cart: bad data shape");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  TreeBuilder builder{x, y, params, nullptr, {}};
  builder.build(std::move(rows), 0);
  return std::make_shared<TreeModel>(std::move(builder.tree),
                                     LearnerFamily::cart, x.cols());
}

ModelPtr fit_extratree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const TreeParams& params, std::uint64_t seed) {
  if (x.rows() != y.size() || x.rows() == 0)
    throw std::invalid_argument("fit_extratree: bad data shape");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(mix_seed(seed, 0x455854ULL));
  TreeBuilder builder{x, y, params, &rng, {}};
  builder.build(std::move(rows), 0);
  return std::make_shared<TreeModel>(std::move(builder.tree),
                                     LearnerFamily::extratree, x.cols());
}

ModelPtr fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const GbtParams& params, std::uint64_t seed) {
  if (x.rows() != y.size() || x.rows() == 0)
    throw std::invalid_argument("fit_gbt: bad data shape");
  if (params.n_estimators < 1)
    throw std::invalid_argument("fit_gbt: N_est must be at least 1");
  if (!(params.eta > 0 && params.eta <= 1))
    throw std::invalid_argument("fit_gbt: eta must be in (0,1]");
  if (params.lambda < 0 || params.alpha < 0 || params.gamma < 0)
    throw std::invalid_argument("fit_gbt: lambda/alpha/gamma must be >= 0");
  if (!(params.subsample > 0 && params.subsample <= 1))
    throw std::invalid_argument("fit_gbt: sub_s must be in (0,1]");

  const Eigen::Index n = x.rows();
  const double base =
      std::isnan(params.base_score) ? y.mean() : params.base_score;
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(n, base);
  Eigen::VectorXd grad(n);
  std::vector<Tree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_estimators));

  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  Rng rng(mix_seed(seed, 0x474254ULL));

  for (int round = 0; round < params.n_estimators; ++round) {
    grad = pred - y;  // squared-error loss, unit hessian

    std::vector<Eigen::Index> rows;
    if (params.subsample >= 1.0) {
      rows = all;
    } else {
      // without-replacement subsample, deterministic per round
      const auto m = static_cast<std::size_t>(
          std::ceil(params.subsample * static_cast<double>(n)));
      std::vector<Eigen::Index> pool = all;
      for (std::size_t i = 0; i < m; ++i) {
        std::size_t j = i + static_cast<std::size_t>(
                                rng.uniform_index(pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      pool.resize(m);
      rows = std::move(pool);
    }

    GbtTreeBuilder builder{x, grad, params, {}};
    builder.build(std::move(rows), 0);
    Tree tree = std::move(builder.tree);
    for (Eigen::Index i = 0; i < n; ++i)
      pred[i] += params.eta * tree.predict_row(x.row(i));
    trees.push_back(std::move(tree));
  }
  return std::make_shared<GbtModel>(std::move(trees), base, params.eta,
                                    x.cols());
}

ModelPtr fit(const LearnerSpec& spec, const Eigen::MatrixXd& x,
             const Eigen::VectorXd& y) {
  validate(spec);
  switch (spec.family) {
    case LearnerFamily::linear:
      return fit_linear(x, y, hyper(spec, "ridge_fallback", 1) != 0);
    case LearnerFamily::knn:
      return fit_knn(x, y, static_cast<int>(hyper(spec, "K", 5)));
    case LearnerFamily::cart:
    case LearnerFamily::extratree: {
      TreeParams p;
      p.max_depth = static_cast<int>(hyper(spec, "max_depth", 1 << 20));
      p.min_samples_split =
          static_cast<Eigen::Index>(hyper(spec, "min_samples_split", 2));
      p.min_samples_leaf =
          static_cast<Eigen::Index>(hyper(spec, "min_samples_leaf", 1));
      return spec.family == LearnerFamily::cart
                 ? fit_cart(x, y, p)
                 : fit_extratree(x, y, p, spec.seed);
    }
    case LearnerFamily::gbt: {
      GbtParams p;
      p.n_estimators = static_cast<int>(hyper(spec, "N_est", 100));
      p.max_depth = static_cast<int>(hyper(spec, "Max_d", 6));
      p.eta = hyper(spec, "eta", 0.3);
      p.gamma = hyper(spec, "gamma", 0.0);
      p.min_child_weight = hyper(spec, "Min_cw", 1.0);
      p.subsample = hyper(spec, "sub_s", 1.0);
      p.lambda = hyper(spec, "lambda", 1.0);
      p.alpha = hyper(spec, "alpha", 0.0);
      p.base_score = hyper(spec, "base_score",
                           std::numeric_limits<double>::quiet_NaN());
      return fit_gbt(x, y, p, spec.seed);
    }
  }
  throw std::logic_error("bad family");
}

ModelPtr base_model_from_json(const json& doc) {
  const std::string family = doc.at("family");
  const json& state = doc.at("state");
  if (family == "linear") {
    Eigen::VectorXd coef = vector_from_json(state.at("coefficients"));
    return std::make_shared<LinearModel>(std::move(coef), coef.size() - 1);
  }
  if (family == "knn") {
    return std::make_shared<KnnModel>(
        matrix_from_json(state.at("x")), vector_from_json(state.at("y")),
        static_cast<int>(doc.at("hyperparams").at("K").get<double>()),
        vector_from_json(state.at("mean")).transpose(),
        vector_from_json(state.at("sd")).transpose());
  }
  if (family == "cart" || family == "extratree") {
    Tree tree;
    tree_from_json(state.at("tree"), tree);
    return std::make_shared<TreeModel>(std::move(tree),
                                       family_from_name(family),
                                       state.at("n_features").get<Eigen::Index>());
  }
  if (family == "gbt") {
    std::vector<Tree> trees;
    for (const auto& t : state.at("trees")) {
      Tree tree;
      tree_from_json(t, tree);
      trees.push_back(std::move(tree));
    }
    return std::make_shared<GbtModel>(std::move(trees),
                                      state.at("base_score").get<double>(),
                                      state.at("eta").get<double>(),
                                      state.at("n_features").get<Eigen::Index>());
  }
  throw std::invalid_argument("unknown model family '" + family + "'");
}

json spec_to_json(const LearnerSpec& spec) {
  json h = json::object();
  for (const auto& [k, v] : spec.hyperparams) h[k] = v;
  return json{{"family", family_name(spec.family)},
              {"hyperparams", h},
              {"seed", spec.seed}};
}

LearnerSpec spec_from_json(const json& doc) {
  LearnerSpec spec;
  spec.family = family_from_name(doc.at("family"));
  if (doc.contains("hyperparams"))
    for (auto it = doc["hyperparams"].begin(); it != doc["hyperparams"].end();
         ++it)
      spec.hyperparams[it.key()] = it.value().get<double>();
  if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
  return spec;
}

}  // namespace evo
