#include <cmath>

#include "doctest.h"
#include "evo/metrics.hpp"
#include "evo/rng.hpp"
#include "oracles.hpp"

using namespace evo;

namespace {

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

MetricReport stub_report(double r) {
  MetricReport m;
  m.r_value = r;
  m.mse = r * r;
  m.rmse = r;
  m.n_samples = 1;
  return m;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("perfect prediction") {
  Eigen::VectorXd y = to_vec({1, 2, 3});
  MetricReport m = evaluate(y, y);
  CHECK(m.mse == 0);
  CHECK(m.rmse == 0);
  CHECK(m.mae == 0);
  CHECK(m.msle == 0);
  CHECK(m.smape == 0);
  CHECK(m.evs == 1);
  CHECK(m.r_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.n_samples == 3);
}

TEST_CASE("two-point example with frozen values") {
  MetricReport m = evaluate(to_vec({100, 200}), to_vec({110, 190}));
  CHECK(m.mae == doctest::Approx(10).epsilon(1e-12));
  CHECK(m.rmse == doctest::Approx(10).epsilon(1e-12));
  // (10/105 + 10/195)/2 * 100
  CHECK(m.smape == doctest::Approx(7.326007326007326).epsilon(1e-12));
  // predictions are an affine map of the truths here
  CHECK(m.evs == doctest::Approx(0.96).epsilon(1e-12));
  CHECK(m.r_value == doctest::Approx(1.0).epsilon(1e-12));
  auto oracle = oracles::loop_metrics({100, 200}, {110, 190});
  CHECK(std::abs(m.evs - oracle.evs) < 1e-12);
  CHECK(std::abs(m.r_value - oracle.r) < 1e-12);
}

TEST_CASE("constant prediction gives evs 0 and undefined r") {
  Eigen::VectorXd t = to_vec({10, 20, 30, 40});
  Eigen::VectorXd e = Eigen::VectorXd::Constant(4, t.mean());
  MetricReport m = evaluate(t, e);
  CHECK(m.evs == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_FALSE(m.r_defined);
  CHECK(std::isnan(m.r_value));
  CHECK(m.mae > 0);  // other metrics still filled in
}

TEST_CASE("length mismatch and empty input are rejected") {
  CHECK_THROWS_AS(evaluate(to_vec({1, 2}), to_vec({1})),
                  std::invalid_argument);
  CHECK_THROWS_AS(evaluate(Eigen::VectorXd(), Eigen::VectorXd()),
                  std::invalid_argument);
}

TEST_CASE("msle clamps negative inputs and counts them") {
  MetricReport m = evaluate(to_vec({1, 2, 3}), to_vec({-0.5, 2, 3}));
  CHECK(m.msle_clamped == 1);
  CHECK(m.msle == doctest::Approx(std::pow(std::log1p(1.0), 2) / 3).epsilon(1e-12));
}

TEST_CASE("smape 0/0 terms contribute zero") {
  MetricReport m = evaluate(to_vec({0, 100}), to_vec({0, 100}));
  CHECK(m.smape == 0);
}

TEST_CASE("loop-oracle equality on random inputs") {
  Rng rng(20240917);
  const int n = 10000;
  std::vector<double> t(n), e(n);
  for (int i = 0; i < n; ++i) {
    t[static_cast<std::size_t>(i)] = 10 + 100 * rng.uniform();
    e[static_cast<std::size_t>(i)] =
        t[static_cast<std::size_t>(i)] * (0.8 + 0.4 * rng.uniform()) +
        5 * rng.normal();
  }
  MetricReport m = evaluate(to_vec(t), to_vec(e));
  auto o = oracles::loop_metrics(t, e);
  CHECK(std::abs(m.mse - o.mse) < 1e-9 * (1 + std::abs(o.mse)));
  CHECK(std::abs(m.rmse - o.rmse) < 1e-9);
  CHECK(std::abs(m.mae - o.mae) < 1e-9);
  CHECK(std::abs(m.msle - o.msle) < 1e-9);
  CHECK(std::abs(m.smape - o.smape) < 1e-9);
  CHECK(std::abs(m.evs - o.evs) < 1e-9);
  CHECK(std::abs(m.r_value - o.r) < 1e-9);
  CHECK(m.rmse == doctest::Approx(std::sqrt(m.mse)).epsilon(1e-12));
  CHECK(m.mae <= m.rmse + 1e-12);
}

TEST_CASE("scale equivariance and shift invariance") {
  Rng rng(5);
  const int n = 500;
  Eigen::VectorXd t(n), e(n);
  for (int i = 0; i < n; ++i) {
    t[i] = 50 + 20 * rng.normal();
    e[i] = t[i] + 10 * rng.normal();
  }
  MetricReport base = evaluate(t, e);
  const double c = 3.7;
  MetricReport scaled = evaluate(c * t, c * e);
  CHECK(std::abs(scaled.mse - c * c * base.mse) < 1e-9 * (1 + base.mse * c * c));
  CHECK(std::abs(scaled.rmse - c * base.rmse) < 1e-9 * (1 + base.rmse * c));
  CHECK(std::abs(scaled.mae - c * base.mae) < 1e-9 * (1 + base.mae * c));
  CHECK(std::abs(scaled.smape - base.smape) < 1e-9);
  CHECK(std::abs(scaled.evs - base.evs) < 1e-9);
  CHECK(std::abs(scaled.r_value - base.r_value) < 1e-9);

  MetricReport shifted = evaluate(t.array() + 123.0, e.array() + 123.0);
  CHECK(std::abs(shifted.r_value - base.r_value) < 1e-9);
  CHECK(std::abs(shifted.evs - base.evs) < 1e-9);
}

TEST_CASE("evs equals r squared for least-squares affine predictions") {
  Rng rng(17);
  const int n = 400;
  Eigen::VectorXd t(n), noise(n);
  for (int i = 0; i < n; ++i) {
    t[i] = rng.uniform(0, 10);
    noise[i] = rng.normal();
  }
  Eigen::VectorXd raw = 2.0 * t + 3.0 * noise;
  // least-squares fit of raw onto t gives affine predictions of the truth
  const double mt = t.mean(), mr = raw.mean();
  const double beta = ((t.array() - mt) * (raw.array() - mr)).sum() /
                      ((raw.array() - mr).square()).sum();
  Eigen::VectorXd pred = (mt + beta * (raw.array() - mr)).matrix();
  MetricReport m = evaluate(t, pred);
  CHECK(m.evs ==
        doctest::Approx(m.r_value * m.r_value).epsilon(1e-9));
}

TEST_CASE("summarize on stub reports") {
  std::vector<MetricReport> reports{stub_report(1), stub_report(2),
                                    stub_report(3)};
  RunSummary s = summarize(reports);
  CHECK(s.r_value.min == 1);
  CHECK(s.r_value.max == 3);
  CHECK(s.r_value.mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.r_value.median == 2);
  CHECK(s.r_value.std == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.n_runs == 3);
}

TEST_CASE("summarize single report and permutation invariance") {
  RunSummary single = summarize({stub_report(0.5)});
  CHECK(single.r_value.min == 0.5);
  CHECK(single.r_value.max == 0.5);
  CHECK(single.r_value.std == 0);

  std::vector<MetricReport> a{stub_report(0.1), stub_report(0.7),
                              stub_report(0.4)};
  std::vector<MetricReport> b{a[2], a[0], a[1]};
  RunSummary sa = summarize(a), sb = summarize(b);
  for (int m = 0; m < 7; ++m)
    for (int st = 0; st < 5; ++st)
      CHECK(stat_value(summary_stat(sa, m), st) ==
            stat_value(summary_stat(sb, m), st));
  CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}

TEST_CASE("csv export has the fixed header order") {
  RunSummary s = summarize({stub_report(1), stub_report(2)});
  std::string csv = summary_to_csv(s);
  CHECK(csv.rfind("stat,mse,rmse,mae,msle,smape,evs,r_value\n", 0) == 0);
  CHECK(csv.find("\nMin,") != std::string::npos);
  CHECK(csv.find("\nSTD,") != std::string::npos);
  std::string rc = reports_to_csv({stub_report(1)});
  CHECK(rc.rfind("n_samples,mse,rmse,mae,msle,smape,evs,r_value\n", 0) == 0);
}

}  // TEST_SUITE
