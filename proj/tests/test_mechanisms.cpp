#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "causalattr/errors.hpp"
#include "causalattr/mechanisms.hpp"
#include "causalattr/rng.hpp"
#include "test_util.hpp"

using namespace causalattr;
using testutil::WarningCapture;

namespace {

const double kLogStdNormalAtZero = -0.9189385332046727;

Table linear_pair_sample(std::size_t m, double weight, double intercept,
                         double noise_sd, uint64_t seed) {
  Dag d = testutil::chain2();
  std::vector<double> x1(m), x2(m);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    x1[i] = rng.normal();
    x2[i] = weight * x1[i] + intercept + noise_sd * rng.normal();
  }
  return testutil::table_from_columns(d, {std::move(x1), std::move(x2)});
}

}  // namespace

TEST_CASE("ols recovers a linear mechanism") {
  Dag d = testutil::chain2();
  Table t = linear_pair_sample(100000, 2.0, 0.0, 1.0, 101);
  auto m = fit_mechanism(t, d, 1, Family::LinearGaussianConditional);
  const auto& lin = dynamic_cast<const LinearGaussianConditional&>(*m);
  CHECK(std::abs(lin.weights()[0] - 2.0) < 0.02);
  CHECK(std::abs(lin.intercept()) < 0.02);
  CHECK(std::abs(lin.noise_variance() - 1.0) < 0.05);
}

TEST_CASE("a constant child hits the variance floor") {
  Dag d = testutil::chain2();
  std::vector<double> x1{0.4, -1.0, 2.2, 0.1, -0.6, 1.3};
  std::vector<double> x2(x1.size(), 3.0);
  Table t = testutil::table_from_columns(d, {x1, x2});
  auto m = fit_mechanism(t, d, 1, Family::LinearGaussianConditional);
  const auto& lin = dynamic_cast<const LinearGaussianConditional&>(*m);
  CHECK(lin.noise_variance() == 1e-9);
  CHECK(std::abs(lin.weights()[0]) < 1e-9);
  CHECK(std::abs(lin.intercept() - 3.0) < 1e-9);
}

TEST_CASE("laplace smoothing of a two-category table") {
  // 8 of category a, 2 of b, alpha=1: (8+1)/12 and (2+1)/12.
  Dag d({{"C", NodeKind::Categorical, {"a", "b"}}}, {});
  std::vector<double> col(10, 0.0);
  col[3] = 1.0;
  col[7] = 1.0;
  Table t = testutil::table_from_columns(d, {col});
  auto m = fit_mechanism(t, d, 0, Family::DiscreteCpt);
  const auto& cpt = dynamic_cast<const DiscreteCpt&>(*m);
  REQUIRE(cpt.n_configs() == 1);
  CHECK(std::abs(cpt.row(0)[0] - 0.75) < 1e-15);
  CHECK(std::abs(cpt.row(0)[1] - 0.25) < 1e-15);

  auto e = fit_mechanism(t, d, 0, Family::EmpiricalCategoricalMarginal);
  const auto& emp = dynamic_cast<const EmpiricalCategoricalMarginal&>(*e);
  CHECK(std::abs(emp.probs()[0] - 0.8) < 1e-15);
  CHECK(std::abs(emp.probs()[1] - 0.2) < 1e-15);
}

TEST_CASE("gaussian marginal sampling moments") {
  GaussianMarginal g(0.0, 1.0);
  Rng rng(7);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g.sample_one({}, rng);
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.005);
  CHECK(std::abs(sq / n - sum / n * sum / n - 1.0) < 0.01);
}

TEST_CASE("near-deterministic linear mechanism") {
  LinearGaussianConditional lin({0}, {2.0}, 0.0, 1e-9);
  Rng rng(1);
  const double parent = 3.0;
  CHECK(std::abs(lin.sample_one(std::vector<double>{parent}, rng) - 6.0) < 1e-3);
  CHECK(lin.conditional_mean(std::vector<double>{parent}) == 6.0);
}

TEST_CASE("cpt sampling follows the row") {
  DiscreteCpt cpt({}, 2, {0.25, 0.75}, {1}, {0.25, 0.75}, 1.0);
  Rng rng(13);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ones += cpt.sample_one({}, rng) == 1.0 ? 1 : 0;
  CHECK(std::abs(ones / double(n) - 0.75) < 0.01);
}

TEST_CASE("log density oracles") {
  GaussianMarginal g(0.0, 1.0);
  CHECK(std::abs(g.log_density(0.0, {}) - kLogStdNormalAtZero) < 1e-12);

  DiscreteCpt cpt({}, 2, {0.5, 0.5}, {1}, {0.5, 0.5}, 0.0);
  CHECK(std::abs(cpt.log_density(0.0, {}) - std::log(0.5)) < 1e-15);
  CHECK(std::abs(cpt.log_density(1.0, {}) - std::log(0.5)) < 1e-15);

  LinearGaussianConditional lin({0}, {2.0}, 0.0, 1.0);
  // residual 0 at (x1=1, x2=2)
  CHECK(std::abs(lin.log_density(2.0, std::vector<double>{1.0}) -
                 kLogStdNormalAtZero) < 1e-12);
}

TEST_CASE("continuous densities integrate to one") {
  GaussianMarginal g(0.7, 2.3);
  LinearGaussianConditional lin({0}, {1.5}, -0.2, 0.8);
  const std::vector<double> parent{0.4};
  for (int which = 0; which < 2; ++which) {
    const double mu = which == 0 ? 0.7 : 1.5 * 0.4 - 0.2;
    const double sd = std::sqrt(which == 0 ? 2.3 : 0.8);
    const int steps = 4000;
    const double lo = mu - 8 * sd, hi = mu + 8 * sd;
    const double h = (hi - lo) / steps;
    double integral = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double x = lo + h * i;
      const double f = which == 0 ? std::exp(g.log_density(x, {}))
                                  : std::exp(lin.log_density(x, parent));
      integral += (i == 0 || i == steps) ? 0.5 * f : f;
    }
    integral *= h;
    CHECK(std::abs(integral - 1.0) < 1e-3);
  }
}

TEST_CASE("fitted cpt rows are normalized") {
  Dag d({{"P", NodeKind::Categorical, {"u", "v"}},
         {"C", NodeKind::Categorical, {"a", "b", "c"}}},
        {{"P", "C"}});
  Rng rng(31);
  const std::size_t m = 200;
  std::vector<double> p(m), c(m);
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    c[i] = static_cast<double>(rng.uniform_int(3));
  }
  Table t = testutil::table_from_columns(d, {p, c});
  auto mech = fit_mechanism(t, d, 1, Family::DiscreteCpt);
  const auto& cpt = dynamic_cast<const DiscreteCpt&>(*mech);
  for (std::size_t cfg = 0; cfg < cpt.n_configs(); ++cfg) {
    double s = 0.0;
    for (double q : cpt.row(cfg)) {
      CHECK(q >= 0.0);
      s += q;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  double fs = 0.0;
  for (double q : cpt.fallback()) fs += q;
  CHECK(std::abs(fs - 1.0) < 1e-12);
}

TEST_CASE("sampling is seed deterministic") {
  GaussianMarginal g(1.0, 4.0);
  Rng a(99), b(99);
  for (int i = 0; i < 16; ++i)
    CHECK(g.sample_one({}, a) == g.sample_one({}, b));
}

TEST_CASE("parametric bootstrap consistency of the linear fit") {
  Dag d = testutil::chain2();
  Table t = linear_pair_sample(20000, -1.3, 0.5, 0.9, 207);
  auto fitted = fit_mechanism(t, d, 1, Family::LinearGaussianConditional);
  const auto& lin = dynamic_cast<const LinearGaussianConditional&>(*fitted);

  // Regenerate from the fitted model and refit; parameters must come back.
  Rng rng(208);
  const std::size_t m = 50000;
  std::vector<double> x1(m), x2(m);
  for (std::size_t i = 0; i < m; ++i) {
    x1[i] = rng.normal();
    x2[i] = lin.sample_one(std::vector<double>{x1[i]}, rng);
  }
  Table regen = testutil::table_from_columns(d, {x1, x2});
  auto refit = fit_mechanism(regen, d, 1, Family::LinearGaussianConditional);
  const auto& lin2 = dynamic_cast<const LinearGaussianConditional&>(*refit);
  CHECK(std::abs(lin2.weights()[0] - lin.weights()[0]) < 0.05);
  CHECK(std::abs(lin2.intercept() - lin.intercept()) < 0.05);
  CHECK(std::abs(lin2.noise_variance() - lin.noise_variance()) < 0.05);
}

TEST_CASE("family dispatch rejections") {
  Dag d = testutil::chain2();
  Table t = linear_pair_sample(50, 1.0, 0.0, 1.0, 5);
  CHECK_THROWS_AS(fit_mechanism(t, d, 1, Family::GaussianMarginal), IncompatibleFamily);
  CHECK_THROWS_AS(fit_mechanism(t, d, 1, Family::DiscreteCpt), IncompatibleFamily);
  CHECK_THROWS_AS(fit_mechanism(t, d, 0, Family::LinearGaussianConditional),
                  IncompatibleFamily);
  CHECK_THROWS_AS(fit_mechanism(t, d, 0, Family::NearestNeighborConditional),
                  IncompatibleFamily);
  CHECK_THROWS_AS(fit_mechanism(t, d, 2, Family::GaussianMarginal), UnknownNode);

  Table tiny = testutil::table_from_columns(d, {{1.0}, {2.0}});
  CHECK_THROWS_AS(fit_mechanism(tiny, d, 0, Family::GaussianMarginal), InsufficientData);
}

TEST_CASE("categorical child with continuous parents is out of scope for knn") {
  Dag d({{"X", NodeKind::Continuous, {}}, {"C", NodeKind::Categorical, {"a", "b"}}},
        {{"X", "C"}});
  Rng rng(3);
  std::vector<double> x(100), c(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x[i] = rng.normal();
    c[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  Table t = testutil::table_from_columns(d, {x, c});
  CHECK_THROWS_AS(fit_mechanism(t, d, 1, Family::NearestNeighborConditional),
                  IncompatibleFamily);
}

TEST_CASE("collinear parents fall back to ridge with a warning") {
  Dag d({{"A", NodeKind::Continuous, {}},
         {"B", NodeKind::Continuous, {}},
         {"Y", NodeKind::Continuous, {}}},
        {{"A", "Y"}, {"B", "Y"}});
  Rng rng(17);
  const std::size_t m = 5000;
  std::vector<double> a(m), b(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = rng.normal();
    b[i] = a[i];  // exact copy
    y[i] = 2.0 * a[i] + rng.normal();
  }
  Table t = testutil::table_from_columns(d, {a, b, y});
  WarningCapture capture;
  auto mech = fit_mechanism(t, d, 2, Family::LinearGaussianConditional);
  CHECK(capture.any_contains("collinear"));
  const auto& lin = dynamic_cast<const LinearGaussianConditional&>(*mech);
  // Only the weight sum is identified.
  CHECK(std::abs(lin.weights()[0] + lin.weights()[1] - 2.0) < 0.05);
  CHECK(std::isfinite(lin.weights()[0]));
  CHECK(std::isfinite(lin.weights()[1]));
}

TEST_CASE("unseen parent configuration falls back to the child marginal") {
  Dag d({{"P", NodeKind::Categorical, {"u", "v"}},
         {"C", NodeKind::Categorical, {"a", "b"}}},
        {{"P", "C"}});
  // Training data only ever has P=u; child is 70/30 there.
  const std::size_t m = 1000;
  std::vector<double> p(m, 0.0), c(m);
  Rng rng(4);
  for (std::size_t i = 0; i < m; ++i) c[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
  Table t = testutil::table_from_columns(d, {p, c});
  auto mech = fit_mechanism(t, d, 1, Family::DiscreteCpt);
  const auto& cpt = dynamic_cast<const DiscreteCpt&>(*mech);
  CHECK(cpt.config_was_seen(0));
  CHECK(!cpt.config_was_seen(1));

  WarningCapture capture;
  Rng draw(5);
  int ones = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    ones += cpt.sample_one(std::vector<double>{1.0}, draw) == 1.0 ? 1 : 0;
  CHECK(capture.any_contains("unseen"));
  // Falls back to the marginal, which matches the seen row here.
  CHECK(std::abs(ones / double(n) - 0.3) < 0.02);
}

TEST_CASE("categorical parents of a continuous child use dummy columns") {
  Dag d({{"G", NodeKind::Categorical, {"a", "b", "c"}},
         {"Y", NodeKind::Continuous, {}}},
        {{"G", "Y"}});
  Rng rng(23);
  const std::size_t m = 30000;
  std::vector<double> g(m), y(m);
  const double effect[3] = {0.0, 1.0, 3.0};
  for (std::size_t i = 0; i < m; ++i) {
    g[i] = static_cast<double>(rng.uniform_int(3));
    y[i] = effect[static_cast<int>(g[i])] + 0.5 * rng.normal();
  }
  Table t = testutil::table_from_columns(d, {g, y});
  auto mech = fit_mechanism(t, d, 1, Family::LinearGaussianConditional);
  const auto& lin = dynamic_cast<const LinearGaussianConditional&>(*mech);
  REQUIRE(lin.weights().size() == 2);  // first category is the reference
  CHECK(std::abs(lin.intercept() - 0.0) < 0.05);
  CHECK(std::abs(lin.weights()[0] - 1.0) < 0.05);
  CHECK(std::abs(lin.weights()[1] - 3.0) < 0.05);
  CHECK(std::abs(lin.conditional_mean(std::vector<double>{2.0}) - 3.0) < 0.05);
}

TEST_CASE("nearest-neighbor mechanism behavior") {
  Dag d = testutil::chain2();
  // Two tight clusters, child 0 near x=0 and child 10 near x=5.
  std::vector<double> x1, x2;
  Rng rng(41);
  for (int i = 0; i < 60; ++i) {
    const bool right = i % 2 == 0;
    x1.push_back((right ? 5.0 : 0.0) + 0.01 * rng.normal());
    x2.push_back((right ? 10.0 : 0.0) + 0.01 * rng.normal());
  }
  Table t = testutil::table_from_columns(d, {x1, x2});
  FitOptions opt;
  opt.knn_k = 10;
  auto mech = fit_mechanism(t, d, 1, Family::NearestNeighborConditional, opt);
  const auto& nn = dynamic_cast<const NearestNeighborConditional&>(*mech);
  CHECK(nn.k() == 10);
  CHECK(!nn.has_log_density());
  CHECK_THROWS_AS(nn.log_density(0.0, std::vector<double>{0.0}), UnsupportedFamily);
  CHECK(std::abs(nn.predict(std::vector<double>{0.0}) - 0.0) < 0.1);
  CHECK(std::abs(nn.predict(std::vector<double>{5.0}) - 10.0) < 0.1);

  // Draws are prediction plus a resampled leave-one-out residual; residuals
  // here are tiny, so draws hug the prediction.
  Rng draw(42);
  for (int i = 0; i < 50; ++i)
    CHECK(std::abs(nn.sample_one(std::vector<double>{5.0}, draw) - 10.0) < 0.5);
}
