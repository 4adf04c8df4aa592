#include <cmath>

#include "doctest.h"
#include "evo/learners.hpp"
#include "evo/rng.hpp"
#include "oracles.hpp"

using namespace evo;
using nlohmann::json;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              std::uint64_t seed, double lo = -2,
                              double hi = 2) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// walks the nested tree document; independent of the library's Tree type
double eval_json_tree(const json& node, const Eigen::RowVectorXd& x) {
  if (node.contains("leaf")) return node["leaf"]["w"].get<double>();
  const json& s = node["split"];
  const int f = s["feature"].get<int>();
  const double thr = s["threshold"].get<double>();
  return eval_json_tree(x[f] <= thr ? s["left"] : s["right"], x);
}

bool tree_uses_feature(const json& node, int feature) {
  if (node.contains("leaf")) return false;
  const json& s = node["split"];
  if (s["feature"].get<int>() == feature) return true;
  return tree_uses_feature(s["left"], feature) ||
         tree_uses_feature(s["right"], feature);
}

double training_mse(const Model& model, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& y) {
  return (model.predict(x) - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

TEST_SUITE("learners") {

TEST_CASE("spec validation rejects unknown names and bad bounds") {
  LearnerSpec spec;
  spec.family = LearnerFamily::gbt;
  spec.hyperparams["N_est"] = 10;
  CHECK_NOTHROW(validate(spec));
  spec.hyperparams["not_a_param"] = 1;
  CHECK_THROWS_AS(validate(spec), std::invalid_argument);
  spec.hyperparams.erase("not_a_param");
  spec.hyperparams["eta"] = 2.0;
  CHECK_THROWS_AS(validate(spec), std::invalid_argument);
  LearnerSpec knn;
  knn.family = LearnerFamily::knn;
  knn.hyperparams["max_depth"] = 3;  // cart name, wrong family
  CHECK_THROWS_AS(validate(knn), std::invalid_argument);
}

TEST_CASE("linear fit recovers exact linear data") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  Eigen::VectorXd y(3);
  y << 2, 4, 6;
  ModelPtr m = fit_linear(x, y);
  Eigen::MatrixXd q(1, 1);
  q << 4;
  CHECK(m->predict(q)[0] == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("linear fit on constant targets") {
  Eigen::MatrixXd x = random_matrix(10, 2, 3);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(10, 7.5);
  ModelPtr m = fit_linear(x, y);
  Eigen::MatrixXd q = random_matrix(4, 2, 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK(m->predict(q)[i] == doctest::Approx(7.5).epsilon(1e-9));
}

TEST_CASE("linear coefficients match the normal equations") {
  Eigen::MatrixXd x = random_matrix(10, 3, 17);
  Eigen::VectorXd y = random_matrix(10, 1, 18).col(0);
  ModelPtr m = fit_linear(x, y);
  Eigen::VectorXd oracle = oracles::normal_equations(x, y);
  // compare through predictions on fresh queries
  Eigen::MatrixXd q = random_matrix(6, 3, 19);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const double expected = oracle[0] + q.row(i) * oracle.tail(3);
    CHECK(m->predict(q)[i] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("linear residuals are orthogonal to the features") {
  Eigen::MatrixXd x = random_matrix(30, 4, 21);
  Eigen::VectorXd y(30);
  Rng rng(22);
  for (Eigen::Index i = 0; i < 30; ++i)
    y[i] = 1.5 * x(i, 0) - 2.0 * x(i, 2) + rng.normal();
  ModelPtr m = fit_linear(x, y);
  Eigen::VectorXd r = y - m->predict(x);
  CHECK((x.transpose() * r).cwiseAbs().maxCoeff() < 1e-8 * y.norm());
}

TEST_CASE("rank-deficient designs need the ridge fallback") {
  Eigen::MatrixXd x(6, 2);
  x.col(0) << 1, 2, 3, 4, 5, 6;
  x.col(1) = 2 * x.col(0);  // exactly collinear
  Eigen::VectorXd y = x.col(0);
  CHECK_THROWS_AS(fit_linear(x, y, false), std::runtime_error);
  ModelPtr m = fit_linear(x, y, true);
  CHECK(m->predict(x).allFinite());
  CHECK((m->predict(x) - y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("knn identity and global-mean limits") {
  Eigen::MatrixXd x = random_matrix(8, 2, 40);
  Eigen::VectorXd y = random_matrix(8, 1, 41).col(0);
  ModelPtr one = fit_knn(x, y, 1);
  for (Eigen::Index i = 0; i < 8; ++i)
    CHECK(one->predict(x.row(i))[0] == doctest::Approx(y[i]).epsilon(1e-12));
  ModelPtr all = fit_knn(x, y, 8);
  Eigen::MatrixXd q = random_matrix(3, 2, 42);
  for (Eigen::Index i = 0; i < 3; ++i)
    CHECK(all->predict(q)[i] == doctest::Approx(y.mean()).epsilon(1e-12));
}

TEST_CASE("knn matches the brute-force sort-and-average oracle") {
  Eigen::MatrixXd x = random_matrix(12, 3, 50);
  Eigen::VectorXd y = random_matrix(12, 1, 51).col(0);
  ModelPtr m = fit_knn(x, y, 3);

  // oracle standardizes with the same training-row statistics contract
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::RowVectorXd sd =
      (centered.colwise().squaredNorm() / 12.0).cwiseSqrt();
  Eigen::MatrixXd z = centered.array().rowwise() / sd.array();

  Eigen::MatrixXd q = random_matrix(5, 3, 52);
  Eigen::VectorXd pred = m->predict(q);
  for (Eigen::Index i = 0; i < 5; ++i) {
    Eigen::RowVectorXd qz = (q.row(i) - mean).array() / sd.array();
    CHECK(pred[i] ==
          doctest::Approx(oracles::knn_sort_and_average(z, y, qz, 3))
              .epsilon(1e-12));
  }
}

TEST_CASE("knn rejects out-of-range K") {
  Eigen::MatrixXd x = random_matrix(5, 2, 60);
  Eigen::VectorXd y = random_matrix(5, 1, 61).col(0);
  CHECK_THROWS_AS(fit_knn(x, y, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit_knn(x, y, 6), std::invalid_argument);
}

TEST_CASE("cart on constant targets is a single leaf") {
  Eigen::MatrixXd x = random_matrix(10, 2, 70);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(10, 4.0);
  ModelPtr m = fit_cart(x, y, {});
  json doc = m->to_json();
  CHECK(doc["state"]["tree"].contains("leaf"));
  CHECK(doc["state"]["tree"]["leaf"]["w"].get<double>() == 4.0);
}

TEST_CASE("cart finds the step boundary at depth one") {
  Eigen::MatrixXd x(10, 1);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = i + 1;
    y[i] = x(i, 0) <= 5 ? 0.0 : 10.0;
  }
  TreeParams params;
  params.max_depth = 1;
  ModelPtr m = fit_cart(x, y, params);

  auto oracle = oracles::exhaustive_best_split(x, y);
  CHECK(oracle.lo == 5.0);
  CHECK(oracle.hi == 6.0);

  json tree = m->to_json()["state"]["tree"];
  REQUIRE(tree.contains("split"));
  const double thr = tree["split"]["threshold"].get<double>();
  CHECK(thr >= 5.0);
  CHECK(thr < 6.0);
  CHECK(tree["split"]["left"]["leaf"]["w"].get<double>() == 0.0);
  CHECK(tree["split"]["right"]["leaf"]["w"].get<double>() == 10.0);
}

TEST_CASE("min_samples_leaf equal to n forces a single leaf") {
  Eigen::MatrixXd x = random_matrix(12, 2, 80);
  Eigen::VectorXd y = random_matrix(12, 1, 81).col(0);
  TreeParams params;
  params.min_samples_leaf = 12;
  ModelPtr m = fit_cart(x, y, params);
  json doc = m->to_json();
  CHECK(doc["state"]["tree"].contains("leaf"));
  CHECK(doc["state"]["tree"]["leaf"]["w"].get<double>() ==
        doctest::Approx(y.mean()).epsilon(1e-12));
}

TEST_CASE("cart training error never rises with depth") {
  Eigen::MatrixXd x = random_matrix(60, 3, 90);
  Eigen::VectorXd y(60);
  Rng rng(91);
  for (Eigen::Index i = 0; i < 60; ++i)
    y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 1) * x(i, 2) + 0.1 * rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (int depth = 0; depth <= 6; ++depth) {
    TreeParams params;
    params.max_depth = depth;
    const double mse = training_mse(*fit_cart(x, y, params), x, y);
    CHECK(mse <= prev + 1e-9 * (1 + prev));
    prev = mse;
  }
}

TEST_CASE("extratree depth zero and determinism") {
  Eigen::MatrixXd x = random_matrix(20, 3, 100);
  Eigen::VectorXd y = random_matrix(20, 1, 101).col(0);
  TreeParams leaf_only;
  leaf_only.max_depth = 0;
  ModelPtr stump = fit_extratree(x, y, leaf_only, 5);
  CHECK(stump->predict(x.topRows(1))[0] ==
        doctest::Approx(y.mean()).epsilon(1e-12));

  ModelPtr a = fit_extratree(x, y, {}, 5);
  ModelPtr b = fit_extratree(x, y, {}, 5);
  CHECK(a->to_json().dump() == b->to_json().dump());
  ModelPtr c = fit_extratree(x, y, {}, 6);
  CHECK(a->to_json().dump() != c->to_json().dump());
}

TEST_CASE("extratree never splits a constant feature") {
  Eigen::MatrixXd x(30, 2);
  x.col(0).setConstant(3.0);
  x.col(1) = random_matrix(30, 1, 110).col(0);
  Eigen::VectorXd y = 2 * x.col(1);
  ModelPtr m = fit_extratree(x, y, {}, 7);
  CHECK_FALSE(tree_uses_feature(m->to_json()["state"]["tree"], 0));
  CHECK(tree_uses_feature(m->to_json()["state"]["tree"], 1));
}

TEST_CASE("gbt single leaf with unit learning rate recovers the mean") {
  Eigen::MatrixXd x = random_matrix(9, 2, 120);
  Eigen::VectorXd y = random_matrix(9, 1, 121).col(0);
  GbtParams params;
  params.n_estimators = 1;
  params.max_depth = 0;
  params.lambda = 0;
  params.eta = 1;
  params.base_score = 0;
  ModelPtr m = fit_gbt(x, y, params, 0);
  for (Eigen::Index i = 0; i < 9; ++i)
    CHECK(m->predict(x)[i] == doctest::Approx(y.mean()).epsilon(1e-12));
}

TEST_CASE("huge lambda collapses predictions to the base score") {
  Eigen::MatrixXd x = random_matrix(20, 2, 130);
  Eigen::VectorXd y = random_matrix(20, 1, 131).col(0);
  GbtParams params;
  params.n_estimators = 5;
  params.lambda = 1e12;
  ModelPtr m = fit_gbt(x, y, params, 0);
  for (Eigen::Index i = 0; i < 20; ++i)
    CHECK(std::abs(m->predict(x)[i] - y.mean()) < 1e-6);
}

TEST_CASE("gbt leaf weights match the gradient/hessian oracle") {
  Eigen::MatrixXd x(8, 1);
  Eigen::VectorXd y(8);
  Rng rng(140);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = i;
    y[i] = rng.uniform(0, 10);
  }
  GbtParams params;
  params.n_estimators = 2;
  params.max_depth = 1;
  params.lambda = 0.5;
  params.eta = 0.7;
  params.base_score = 0;
  ModelPtr m = fit_gbt(x, y, params, 0);
  json trees = m->to_json()["state"]["trees"];
  REQUIRE(trees.size() == 2);

  // oracle: depth-1 split by max gain, leaf weights -G/(H+lambda)
  Eigen::VectorXd pred = Eigen::VectorXd::Zero(8);
  for (const auto& tree : trees) {
    Eigen::VectorXd g = pred - y;
    double best_gain = 0;
    int best_cut = -1;
    const double total = g.sum();
    const double parent = total * total / (8 + params.lambda);
    for (int cut = 1; cut < 8; ++cut) {
      double gl = g.head(cut).sum();
      double gr = total - gl;
      const double gain =
          0.5 * (gl * gl / (cut + params.lambda) +
                 gr * gr / (8 - cut + params.lambda) - parent);
      if (gain > best_gain) {
        best_gain = gain;
        best_cut = cut;
      }
    }
    REQUIRE(best_cut > 0);
    const double gl = g.head(best_cut).sum();
    const double gr = total - gl;
    const double wl = -gl / (best_cut + params.lambda);
    const double wr = -gr / (8 - best_cut + params.lambda);

    REQUIRE(tree.contains("split"));
    const double thr = tree["split"]["threshold"].get<double>();
    CHECK(thr >= x(best_cut - 1, 0));
    CHECK(thr < x(best_cut, 0));
    CHECK(tree["split"]["left"]["leaf"]["w"].get<double>() ==
          doctest::Approx(wl).epsilon(1e-9));
    CHECK(tree["split"]["right"]["leaf"]["w"].get<double>() ==
          doctest::Approx(wr).epsilon(1e-9));
    for (int i = 0; i < 8; ++i)
      pred[i] += params.eta * (x(i, 0) <= thr ? wl : wr);
  }
  // the model's own predictions agree with the oracle's accumulation
  for (int i = 0; i < 8; ++i)
    CHECK(m->predict(x)[i] == doctest::Approx(pred[i]).epsilon(1e-9));
}

TEST_CASE("gbt training error never rises over rounds") {
  Eigen::MatrixXd x = random_matrix(50, 3, 150);
  Eigen::VectorXd y(50);
  Rng rng(151);
  for (Eigen::Index i = 0; i < 50; ++i)
    y[i] = x(i, 0) * x(i, 1) + std::abs(x(i, 2)) + 0.2 * rng.normal();
  GbtParams params;
  params.n_estimators = 10;
  params.max_depth = 3;
  params.eta = 0.5;
  params.gamma = 0;
  params.subsample = 1;
  ModelPtr m = fit_gbt(x, y, params, 3);

  json trees = m->to_json()["state"]["trees"];
  const double base = m->to_json()["state"]["base_score"].get<double>();
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(50, base);
  double prev = (pred - y).squaredNorm();
  for (const auto& tree : trees) {
    for (Eigen::Index i = 0; i < 50; ++i)
      pred[i] += params.eta * eval_json_tree(tree, x.row(i));
    const double cur = (pred - y).squaredNorm();
    CHECK(cur <= prev + 1e-9 * (1 + prev));
    prev = cur;
  }
}

TEST_CASE("gbt rejects invalid bounds") {
  Eigen::MatrixXd x = random_matrix(10, 1, 160);
  Eigen::VectorXd y = random_matrix(10, 1, 161).col(0);
  GbtParams p;
  p.n_estimators = 0;
  CHECK_THROWS_AS(fit_gbt(x, y, p, 0), std::invalid_argument);
  p = {};
  p.eta = 0;
  CHECK_THROWS_AS(fit_gbt(x, y, p, 0), std::invalid_argument);
  p = {};
  p.lambda = -1;
  CHECK_THROWS_AS(fit_gbt(x, y, p, 0), std::invalid_argument);
  p = {};
  p.subsample = 0;
  CHECK_THROWS_AS(fit_gbt(x, y, p, 0), std::invalid_argument);
}

TEST_CASE("tree batch predictions behave on edge inputs") {
  Eigen::MatrixXd x = random_matrix(15, 2, 170);
  Eigen::VectorXd y = random_matrix(15, 1, 171).col(0);
  ModelPtr m = fit_cart(x, y, {});

  Eigen::MatrixXd empty(0, 2);
  CHECK(m->predict(empty).size() == 0);

  Eigen::MatrixXd twice(2, 2);
  twice.row(0) = x.row(3);
  twice.row(1) = x.row(3);
  Eigen::VectorXd p = m->predict(twice);
  CHECK(p[0] == p[1]);

  CHECK(m->predict(x).allFinite());

  Eigen::MatrixXd wrong(2, 3);
  wrong.setZero();
  CHECK_THROWS_AS(m->predict(wrong), std::invalid_argument);
}

TEST_CASE("training-row predictions survive monotone feature transforms") {
  Eigen::MatrixXd x = random_matrix(40, 2, 180, 0.25, 6.0);
  Eigen::VectorXd y(40);
  Rng rng(181);
  for (Eigen::Index i = 0; i < 40; ++i)
    y[i] = x(i, 0) - 0.3 * x(i, 1) + 0.1 * rng.normal();

  Eigen::MatrixXd cubed = x;
  cubed.col(0) = x.col(0).array().cube();

  TreeParams params;
  params.max_depth = 4;
  CHECK(fit_cart(x, y, params)->predict(x) ==
        fit_cart(cubed, y, params)->predict(cubed));

  GbtParams gparams;
  gparams.n_estimators = 4;
  gparams.max_depth = 3;
  CHECK(fit_gbt(x, y, gparams, 9)->predict(x) ==
        fit_gbt(cubed, y, gparams, 9)->predict(cubed));

  // random-threshold splits are preserved under affine maps
  Eigen::MatrixXd affine = x;
  affine.col(0) = 2.0 * x.col(0).array() + 3.0;
  CHECK(fit_extratree(x, y, params, 11)->predict(x) ==
        fit_extratree(affine, y, params, 11)->predict(affine));
}

TEST_CASE("same spec, seed and data reproduce identical models") {
  Eigen::MatrixXd x = random_matrix(30, 3, 190);
  Eigen::VectorXd y = random_matrix(30, 1, 191).col(0);
  for (auto family : {LearnerFamily::linear, LearnerFamily::knn,
                      LearnerFamily::cart, LearnerFamily::extratree,
                      LearnerFamily::gbt}) {
    LearnerSpec spec;
    spec.family = family;
    spec.seed = 77;
    if (family == LearnerFamily::knn) spec.hyperparams["K"] = 4;
    if (family == LearnerFamily::gbt) spec.hyperparams["N_est"] = 5;
    ModelPtr a = fit(spec, x, y);
    ModelPtr b = fit(spec, x, y);
    CHECK(a->to_json().dump() == b->to_json().dump());
  }
}

TEST_CASE("serialization round trip reproduces identical predictions") {
  Eigen::MatrixXd x = random_matrix(25, 3, 200);
  Eigen::VectorXd y = random_matrix(25, 1, 201).col(0);
  Eigen::MatrixXd q = random_matrix(7, 3, 202);
  for (auto family : {LearnerFamily::linear, LearnerFamily::knn,
                      LearnerFamily::cart, LearnerFamily::extratree,
                      LearnerFamily::gbt}) {
    LearnerSpec spec;
    spec.family = family;
    spec.seed = 13;
    if (family == LearnerFamily::knn) spec.hyperparams["K"] = 3;
    if (family == LearnerFamily::gbt) spec.hyperparams["N_est"] = 4;
    ModelPtr m = fit(spec, x, y);
    json doc = json::parse(m->to_json().dump());
    ModelPtr reloaded = base_model_from_json(doc);
    CHECK(m->predict(q) == reloaded->predict(q));
  }
}

TEST_CASE("learner spec json round trip") {
  LearnerSpec spec;
  spec.family = LearnerFamily::gbt;
  spec.seed = 99;
  spec.hyperparams = {{"N_est", 42}, {"eta", 0.125}};
  LearnerSpec back = spec_from_json(spec_to_json(spec));
  CHECK(back.family == spec.family);
  CHECK(back.seed == spec.seed);
  CHECK(back.hyperparams == spec.hyperparams);
}

}  // TEST_SUITE
