#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "causalattr/attribution.hpp"
#include "causalattr/divergence.hpp"
#include "causalattr/engine.hpp"
#include "causalattr/errors.hpp"
#include "causalattr/stats.hpp"
#include "test_util.hpp"

using namespace causalattr;
using testutil::chain2;

namespace {

Dag star3() {
  return Dag({{"X1", NodeKind::Continuous, {}},
              {"X2", NodeKind::Continuous, {}},
              {"X3", NodeKind::Continuous, {}}},
             {{"X1", "X3"}, {"X2", "X3"}});
}

Dag star4() {
  return Dag({{"X1", NodeKind::Continuous, {}},
              {"X2", NodeKind::Continuous, {}},
              {"X3", NodeKind::Continuous, {}},
              {"X4", NodeKind::Continuous, {}}},
             {{"X1", "X4"}, {"X2", "X4"}, {"X3", "X4"}});
}

// Roots N(1,1), N(2,1), N(3,1) plus per-node mean shifts; sink sums its
// parents with the given intercept and noise variance.
Scm star4_scm(double l1, double l2, double l3, double intercept, double noise_var) {
  return make_scm(star4(),
                  {std::make_shared<GaussianMarginal>(1.0 + l1, 1.0),
                   std::make_shared<GaussianMarginal>(2.0 + l2, 1.0),
                   std::make_shared<GaussianMarginal>(3.0 + l3, 1.0),
                   std::make_shared<LinearGaussianConditional>(
                       ParentLayout{0, 0, 0}, std::vector<double>{1.0, 1.0, 1.0},
                       intercept, noise_var)});
}

Scm chain_scm(double root_mean) {
  return make_scm(chain2(),
                  {std::make_shared<GaussianMarginal>(root_mean, 1.0),
                   std::make_shared<LinearGaussianConditional>(
                       ParentLayout{0}, std::vector<double>{2.0}, 0.0, 1.0)});
}

Dag binary_chain() {
  return Dag({{"A", NodeKind::Categorical, {"a0", "a1"}},
              {"B", NodeKind::Categorical, {"b0", "b1"}}},
             {{"A", "B"}});
}

Scm binary_scm(double pa0, double pb0_given_a0) {
  auto cpt = std::make_shared<DiscreteCpt>(
      ParentLayout{2}, 2,
      std::vector<double>{pb0_given_a0, 1.0 - pb0_given_a0, 0.2, 0.8},
      std::vector<uint8_t>{1, 1}, std::vector<double>{0.5, 0.5}, 0.0);
  return make_scm(binary_chain(),
                  {std::make_shared<EmpiricalCategoricalMarginal>(
                       std::vector<double>{pa0, 1.0 - pa0}),
                   cpt});
}

}  // namespace

TEST_CASE("functionals evaluate on a plain column") {
  std::vector<double> col{1.0, 2.0, 3.0, 4.0};
  CHECK(estimate_functional(col, Functional::mean()) == 2.5);
  CHECK(std::abs(estimate_functional(col, Functional::variance()) - 5.0 / 3.0) < 1e-15);
  CHECK(estimate_functional(col, Functional::median()) == 2.5);
  CHECK(estimate_functional(col, Functional::quantile(0.25)) == 1.75);

  CHECK_THROWS_AS(estimate_functional({}, Functional::mean()), EmptySample);
  CHECK_THROWS_AS(estimate_functional(col, Functional::kl_to_old()), InvalidArgument);
}

TEST_CASE("functional names round-trip through the parser") {
  CHECK(parse_functional("mean").kind == Functional::Kind::Mean);
  CHECK(parse_functional("variance").kind == Functional::Kind::Variance);
  CHECK(parse_functional("median").kind == Functional::Kind::Median);
  CHECK(parse_functional("kl").kind == Functional::Kind::KlToOld);
  auto q = parse_functional("quantile:0.9");
  CHECK(q.kind == Functional::Kind::Quantile);
  CHECK(q.level == 0.9);

  for (const char* text : {"mean", "variance", "median", "quantile:0.25", "kl"})
    CHECK(parse_functional(text).name() == text);

  CHECK_THROWS_AS(parse_functional("quantile:1.5"), InvalidArgument);
  CHECK_THROWS_AS(parse_functional("quantile:abc"), InvalidArgument);
  CHECK_THROWS_AS(parse_functional("entropy"), InvalidArgument);
  CHECK_THROWS_AS(Functional::quantile(0.0), InvalidArgument);
  CHECK_THROWS_AS(Functional::quantile(1.0), InvalidArgument);
}

TEST_CASE("mean shifts on known models are recovered exactly") {
  auto old_scm = star4_scm(0, 0, 0, 0.5, 1.0);
  auto new_scm = star4_scm(0.7, 0.0, -1.3, 0.75, 1.0);
  auto report = attribute_marginal_models(old_scm, new_scm, 3, Functional::mean());

  CHECK(report.mode == "marginal");
  CHECK(report.target == "X4");
  CHECK(report.functional == "mean");
  CHECK(report.provenance.evaluation_path == "closed_form");
  CHECK(report.provenance.shapley_method == "exact");
  CHECK_FALSE(report.has_raw_data_total);

  const double expected[4] = {0.7, 0.0, -1.3, 0.25};
  REQUIRE(report.nodes.size() == 4);
  double sum = 0.0;
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(report.nodes[j].phi - expected[j]) < 1e-9);
    CHECK_FALSE(report.nodes[j].gated);
    CHECK_FALSE(report.nodes[j].has_p_value);
    sum += report.nodes[j].phi;
  }
  CHECK(std::abs(report.total - (0.7 - 1.3 + 0.25)) < 1e-9);
  CHECK(std::abs(sum - report.total) < 1e-9);
  CHECK(report.nodes[0].mechanism_family == "gaussian_marginal");
  CHECK(report.nodes[3].mechanism_family == "linear_gaussian");
}

TEST_CASE("identical models attribute nothing") {
  auto scm = star4_scm(0, 0, 0, 0.5, 1.0);
  auto report = attribute_marginal_models(scm, scm, 3, Functional::mean());
  CHECK(report.total == 0.0);
  for (const auto& node : report.nodes) CHECK(node.phi == 0.0);
}

TEST_CASE("variance and order-statistic changes follow the closed form") {
  auto old_scm = star4_scm(0, 0, 0, 0.5, 1.0);
  auto noisier = star4_scm(0, 0, 0, 0.5, 3.0);
  auto var_report = attribute_marginal_models(old_scm, noisier, 3, Functional::variance());
  CHECK(std::abs(var_report.total - 2.0) < 1e-9);
  CHECK(std::abs(var_report.nodes[3].phi - 2.0) < 1e-9);
  CHECK(std::abs(var_report.nodes[0].phi) < 1e-9);

  // A pure location shift moves every quantile by the same amount.
  auto shifted = star4_scm(0, 2, 0, 0.5, 1.0);
  auto med = attribute_marginal_models(old_scm, shifted, 3, Functional::median());
  auto q90 = attribute_marginal_models(old_scm, shifted, 3, Functional::quantile(0.9));
  CHECK(std::abs(med.total - 2.0) < 1e-9);
  CHECK(std::abs(med.nodes[1].phi - 2.0) < 1e-9);
  CHECK(std::abs(q90.total - 2.0) < 1e-9);
  CHECK(std::abs(q90.nodes[1].phi - 2.0) < 1e-9);
  CHECK(q90.functional == "quantile:0.9");
}

TEST_CASE("divergence from the old marginal matches the gaussian form") {
  // X2 goes from N(0,5) to N(2,5): divergence 4/10.
  auto old_scm = chain_scm(0.0);
  auto new_scm = chain_scm(1.0);
  auto report = attribute_marginal_models(old_scm, new_scm, 1, Functional::kl_to_old());
  CHECK(report.functional == "kl");
  CHECK(report.provenance.evaluation_path == "closed_form");
  CHECK(std::abs(report.total - 0.4) < 1e-9);
  double sum = 0.0;
  for (const auto& node : report.nodes) sum += node.phi;
  CHECK(std::abs(sum - report.total) < 1e-9);
}

TEST_CASE("forced sampling agrees with the closed forms") {
  auto old_scm = star4_scm(0, 0, 0, 0.5, 1.0);
  auto new_scm = star4_scm(0.7, 0.0, -1.3, 0.75, 1.0);
  AttributionConfig config;
  config.force_sampling = true;
  config.n_draws = 20000;
  auto report = attribute_marginal_models(old_scm, new_scm, 3, Functional::mean(), config);
  CHECK(report.provenance.evaluation_path == "monte_carlo");
  // Shared noise across coalitions makes mean differences exact, not noisy.
  const double expected[4] = {0.7, 0.0, -1.3, 0.25};
  for (int j = 0; j < 4; ++j)
    CHECK(std::abs(report.nodes[j].phi - expected[j]) < 1e-8);

  auto kl = attribute_marginal_models(chain_scm(0.0), chain_scm(1.0), 1,
                                      Functional::kl_to_old(), config);
  CHECK(kl.provenance.evaluation_path == "monte_carlo");
  CHECK(std::abs(kl.total - 0.4) < 0.12);
}

TEST_CASE("a categorical target attributes its mean through enumeration") {
  auto old_scm = binary_scm(0.6, 0.9);
  auto new_scm = binary_scm(0.5, 0.7);
  auto report = attribute_marginal_models(old_scm, new_scm, 1, Functional::mean());
  CHECK(report.provenance.evaluation_path == "enumeration");
  // P(B=1) moves from 0.38 to 0.55.
  CHECK(std::abs(report.total - 0.17) < 1e-12);
  CHECK(std::abs(report.nodes[0].phi + report.nodes[1].phi - 0.17) < 1e-12);
}

TEST_CASE("sampled shapley matches exact values on an additive game") {
  auto old_scm = star4_scm(0, 0, 0, 0.5, 1.0);
  auto new_scm = star4_scm(0.7, 0.0, -1.3, 0.75, 1.0);
  AttributionConfig config;
  config.shapley = ShapleyMode::Sampled;
  config.shapley_permutations = 40;
  auto report = attribute_marginal_models(old_scm, new_scm, 3, Functional::mean(), config);
  CHECK(report.provenance.shapley_method == "sampled");
  CHECK(report.provenance.shapley_permutations == 40);
  const double expected[4] = {0.7, 0.0, -1.3, 0.25};
  double sum = 0.0;
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(report.nodes[j].phi - expected[j]) < 1e-9);
    CHECK(report.nodes[j].has_std_error);
    // The spread collapses; what is left is the cancellation floor of the
    // single-pass variance, not real permutation noise.
    CHECK(report.nodes[j].std_error < 1e-7);
    sum += report.nodes[j].phi;
  }
  CHECK(std::abs(sum - report.total) < 1e-9);
  CHECK(std::abs(report.efficiency_residual) < 1e-9);
}

TEST_CASE("a small exact cap falls back to sampling with a warning") {
  testutil::WarningCapture capture;
  auto old_scm = star4_scm(0, 0, 0, 0.5, 1.0);
  auto new_scm = star4_scm(0.7, 0.5, -1.3, 0.75, 1.0);
  AttributionConfig config;
  config.exact_cap = 2;
  config.shapley_permutations = 60;
  auto report = attribute_marginal_models(old_scm, new_scm, 3, Functional::mean(), config);
  CHECK(capture.any_contains("sampled"));
  CHECK(report.provenance.shapley_method == "sampled");
  double sum = 0.0;
  for (const auto& node : report.nodes) sum += node.phi;
  CHECK(std::abs(sum - report.total) < 1e-9);
}

TEST_CASE("exact conditional divergences decompose the discrete joint") {
  auto old_scm = binary_scm(0.6, 0.9);
  auto new_scm = binary_scm(0.5, 0.7);
  auto phi = exact_conditional_kl_contributions(old_scm, new_scm);
  REQUIRE(phi.size() == 2);

  // Chain rule by hand: the root pays its marginal divergence, the child
  // pays the per-configuration divergence weighted by the new root law.
  const double phi_a = 0.5 * std::log(0.5 / 0.6) + 0.5 * std::log(0.5 / 0.4);
  const double kl_b0 = 0.7 * std::log(0.7 / 0.9) + 0.3 * std::log(0.3 / 0.1);
  CHECK(std::abs(phi[0] - phi_a) < 1e-12);
  CHECK(std::abs(phi[1] - 0.5 * kl_b0) < 1e-12);

  auto joint_new = enumerate_discrete_joint(new_scm);
  auto joint_old = enumerate_discrete_joint(old_scm);
  double joint_kl = kl_discrete(joint_new.probs, joint_old.probs).value;
  CHECK(std::abs(phi[0] + phi[1] - joint_kl) < 1e-12);

  auto self = exact_conditional_kl_contributions(old_scm, old_scm);
  CHECK(self[0] == 0.0);
  CHECK(self[1] == 0.0);

  CHECK_THROWS_AS(exact_conditional_kl_contributions(old_scm, chain_scm(0.0)),
                  GraphMismatch);
  CHECK_THROWS_AS(exact_conditional_kl_contributions(chain_scm(0.0), chain_scm(1.0)),
                  NotEnumerable);
}

TEST_CASE("joint attribution of identical tables is zero") {
  auto table = ancestral_sample(chain_scm(0.0), 2000, 55);
  AttributionConfig config;
  config.gating = false;
  auto report = attribute_joint(table, table, chain2(), config);
  CHECK(report.mode == "joint");
  CHECK(report.target.empty());
  CHECK(report.functional.empty());
  CHECK(report.total == 0.0);
  for (const auto& node : report.nodes) CHECK(node.phi == 0.0);
}

TEST_CASE("joint attribution pins a root shift on the root") {
  // Root mean moves by 2: its divergence share is 2^2/2, the child's is 0.
  auto old_table = ancestral_sample(chain_scm(0.0), 4000, 60);
  auto new_table = ancestral_sample(chain_scm(2.0), 4000, 61);
  AttributionConfig config;
  config.gating = false;
  auto report = attribute_joint(old_table, new_table, chain2(), config);
  CHECK(report.provenance.divergence_direction == "new_vs_old");
  CHECK(std::abs(report.nodes[0].phi - 2.0) < 0.15);
  CHECK(std::abs(report.nodes[1].phi) < 0.05);
  double sum = report.nodes[0].phi + report.nodes[1].phi;
  CHECK(std::abs(sum - report.total) < 1e-12);

  AttributionConfig gated = config;
  gated.gating = true;
  auto flagged = attribute_joint(old_table, new_table, chain2(), gated);
  CHECK_FALSE(flagged.nodes[0].gated);
  CHECK(flagged.nodes[0].has_p_value);
  CHECK(flagged.nodes[1].gated);
  CHECK(flagged.nodes[1].phi == 0.0);
}

TEST_CASE("joint attribution of discrete tables matches the model truth") {
  auto old_scm = binary_scm(0.6, 0.9);
  auto new_scm = binary_scm(0.5, 0.7);
  auto old_table = ancestral_sample(old_scm, 4000, 70);
  auto new_table = ancestral_sample(new_scm, 4000, 71);
  AttributionConfig config;
  config.gating = false;
  auto report = attribute_joint(old_table, new_table, binary_chain(), config);
  CHECK(report.provenance.evaluation_path == "enumeration");

  auto truth = exact_conditional_kl_contributions(old_scm, new_scm);
  CHECK(std::abs(report.nodes[0].phi - truth[0]) < 0.05);
  CHECK(std::abs(report.nodes[1].phi - truth[1]) < 0.05);
}

TEST_CASE("reversing the divergence direction swaps the asymmetry") {
  // One root node whose variance quadruples: D(new||old) is 0.807 nats,
  // D(old||new) only 0.318.
  Dag solo({{"X", NodeKind::Continuous, {}}}, {});
  auto sample = [&](double sd, uint64_t seed) {
    Rng rng = Rng::stream(seed, 1);
    std::vector<double> x(4000);
    for (auto& v : x) v = sd * rng.normal();
    return testutil::table_from_columns(solo, {std::move(x)});
  };
  auto old_table = sample(1.0, 80);
  auto new_table = sample(2.0, 81);

  AttributionConfig config;
  config.gating = false;
  auto forward = attribute_joint(old_table, new_table, solo, config);
  CHECK(forward.provenance.divergence_direction == "new_vs_old");
  CHECK(std::abs(forward.nodes[0].phi - 0.8068528194400547) < 0.08);

  config.reverse_kl = true;
  auto backward = attribute_joint(old_table, new_table, solo, config);
  CHECK(backward.provenance.divergence_direction == "old_vs_new");
  CHECK(std::abs(backward.nodes[0].phi - 0.3181471805599453) < 0.05);
}

TEST_CASE("gating pins unflagged mechanisms at zero") {
  auto old_table = ancestral_sample(chain_scm(0.0), 4000, 90);
  auto new_table = ancestral_sample(chain_scm(1.0), 4000, 91);
  AttributionConfig config;
  auto report = attribute_marginal(old_table, new_table, chain2(), 1,
                                   Functional::mean(), config);

  REQUIRE(report.nodes.size() == 2);
  CHECK_FALSE(report.nodes[0].gated);
  CHECK(report.nodes[0].has_p_value);
  CHECK(report.nodes[0].p_value < 0.05);
  CHECK(report.nodes[1].gated);
  CHECK(report.nodes[1].has_p_value);
  CHECK(report.nodes[1].p_value >= 0.05);
  CHECK(report.nodes[1].phi == 0.0);

  // The root mean moved by 1, so the target mean moved by the slope 2.
  CHECK(std::abs(report.nodes[0].phi - 2.0) < 0.15);
  CHECK(std::abs(report.total - report.nodes[0].phi) < 1e-6);

  CHECK(report.has_raw_data_total);
  double raw_delta = mean(new_table.column(1)) - mean(old_table.column(1));
  CHECK(report.raw_data_total == raw_delta);

  CHECK(report.nodes[0].mechanism_family == "gaussian_marginal");
  CHECK(report.nodes[1].mechanism_family == "linear_gaussian");
  CHECK(report.provenance.gating);
  CHECK(report.provenance.alpha == 0.05);
  CHECK(report.provenance.detect_permutations == config.detect.n_permutations);
  CHECK(report.provenance.rows_old == 4000);
  CHECK(report.provenance.rows_new == 4000);

  AttributionConfig open = config;
  open.gating = false;
  auto ungated = attribute_marginal(old_table, new_table, chain2(), 1,
                                    Functional::mean(), open);
  CHECK_FALSE(ungated.nodes[0].has_p_value);
  CHECK_FALSE(ungated.nodes[1].gated);
  CHECK(std::abs(ungated.nodes[0].phi - 2.0) < 0.15);
  CHECK(std::abs(ungated.nodes[1].phi) < 0.1);
}

TEST_CASE("bootstrap intervals bracket the point estimates") {
  auto old_table = ancestral_sample(chain_scm(0.0), 3000, 100);
  auto new_table = ancestral_sample(chain_scm(1.0), 3000, 101);
  AttributionConfig config;
  config.bootstrap_resamples = 60;
  config.bootstrap_level = 0.9;
  auto report = attribute_marginal(old_table, new_table, chain2(), 1,
                                   Functional::mean(), config);

  CHECK(report.provenance.bootstrap_resamples == 60);
  CHECK(report.provenance.bootstrap_level == 0.9);
  CHECK(report.nodes[0].has_ci);
  CHECK(report.nodes[0].ci_lo <= report.nodes[0].phi);
  CHECK(report.nodes[0].ci_hi >= report.nodes[0].phi);
  CHECK(report.nodes[0].ci_lo < report.nodes[0].ci_hi);
  // Gated nodes keep a degenerate interval at zero.
  CHECK(report.nodes[1].has_ci);
  CHECK(report.nodes[1].ci_lo == 0.0);
  CHECK(report.nodes[1].ci_hi == 0.0);

  auto again = attribute_marginal(old_table, new_table, chain2(), 1,
                                  Functional::mean(), config);
  CHECK(report.nodes[0].ci_lo == again.nodes[0].ci_lo);
  CHECK(report.nodes[0].ci_hi == again.nodes[0].ci_hi);

  // Model-based attribution has no rows to resample, so requested intervals
  // collapse onto the point values.
  auto models = attribute_marginal_models(chain_scm(0.0), chain_scm(1.0), 1,
                                          Functional::mean(), config);
  CHECK(models.nodes[0].has_ci);
  CHECK(models.nodes[0].ci_lo == models.nodes[0].phi);
  CHECK(models.nodes[0].ci_hi == models.nodes[0].phi);
}

TEST_CASE("bootstrap intervals cover a known shift at a plausible rate") {
  auto old_scm = make_scm(star3(),
                          {std::make_shared<GaussianMarginal>(0.0, 1.0),
                           std::make_shared<GaussianMarginal>(1.0, 1.0),
                           std::make_shared<LinearGaussianConditional>(
                               ParentLayout{0, 0}, std::vector<double>{1.0, 1.0},
                               0.0, 1.0)});
  auto new_scm = make_scm(star3(),
                          {std::make_shared<GaussianMarginal>(2.0, 1.0),
                           std::make_shared<GaussianMarginal>(1.0, 1.0),
                           std::make_shared<LinearGaussianConditional>(
                               ParentLayout{0, 0}, std::vector<double>{1.0, 1.0},
                               0.0, 1.0)});
  int covered = 0;
  for (uint64_t trial = 0; trial < 40; ++trial) {
    auto old_table = ancestral_sample(old_scm, 800, 1000 + 2 * trial);
    auto new_table = ancestral_sample(new_scm, 800, 1001 + 2 * trial);
    AttributionConfig config;
    config.gating = false;
    config.bootstrap_resamples = 100;
    config.bootstrap_level = 0.95;
    config.seed = trial;
    auto report = attribute_marginal(old_table, new_table, star3(), 2,
                                     Functional::mean(), config);
    if (report.nodes[0].ci_lo <= 2.0 && 2.0 <= report.nodes[0].ci_hi) ++covered;
  }
  // Nominal coverage is 95%; 32 of 40 leaves generous room for the
  // resample noise of a 100-draw bootstrap.
  CHECK(covered >= 32);
}

TEST_CASE("bca intervals from hand-checkable resamples") {
  std::vector<double> uniform(100);
  std::vector<double> jackknife(100);
  for (int i = 0; i < 100; ++i) {
    uniform[i] = static_cast<double>(i + 1);
    jackknife[i] = static_cast<double>(i + 1);
  }
  // Median resample count on each side and a symmetric jackknife kill both
  // corrections, leaving the plain percentile interval.
  auto interval = bca_interval(uniform, 50.5, 0.95, jackknife);
  CHECK(std::abs(interval.lo - 3.475) < 1e-9);
  CHECK(std::abs(interval.hi - 97.525) < 1e-9);
  CHECK_FALSE(interval.percentile_fallback);

  std::vector<double> tied(60, 5.0);
  auto collapsed = bca_interval(tied, 5.0, 0.95, jackknife);
  CHECK(collapsed.lo == 5.0);
  CHECK(collapsed.hi == 5.0);

  // Every resample above the point estimate: the bias correction is
  // undefined, so the percentile interval is reported instead.
  std::vector<double> one_sided(60);
  for (int i = 0; i < 60; ++i) one_sided[i] = 10.0 + i;
  auto fallback = bca_interval(one_sided, 1.0, 0.95, jackknife);
  CHECK(fallback.percentile_fallback);
  CHECK(fallback.lo >= 10.0);
  CHECK(fallback.hi <= 69.0);

  CHECK_THROWS_AS(bca_interval({}, 0.0, 0.95, jackknife), EmptySample);
  CHECK_THROWS_AS(bca_interval(uniform, 50.5, 0.0, jackknife), InvalidArgument);
  CHECK_THROWS_AS(bca_interval(uniform, 50.5, 1.0, jackknife), InvalidArgument);
}

TEST_CASE("attribution validates its inputs") {
  auto old_table = ancestral_sample(chain_scm(0.0), 50, 120);
  auto new_table = ancestral_sample(chain_scm(1.0), 50, 121);
  auto dag = chain2();
  AttributionConfig base;
  base.gating = false;

  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 9,
                                     Functional::mean(), base),
                  UnknownNode);

  Table empty(dag.nodes(), 0);
  CHECK_THROWS_AS(attribute_marginal(empty, new_table, dag, 1, Functional::mean(), base),
                  EmptyTable);
  auto other = ancestral_sample(binary_scm(0.5, 0.5), 50, 122);
  CHECK_THROWS_AS(attribute_marginal(other, new_table, dag, 1, Functional::mean(), base),
                  SchemaMismatch);
  CHECK_THROWS_AS(attribute_joint(other, new_table, dag, base), SchemaMismatch);

  AttributionConfig bad = base;
  bad.n_draws = 1;
  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 1,
                                     Functional::mean(), bad),
                  InvalidArgument);
  bad = base;
  bad.exact_cap = 0;
  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 1,
                                     Functional::mean(), bad),
                  InvalidArgument);
  bad = base;
  bad.exact_cap = 63;
  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 1,
                                     Functional::mean(), bad),
                  InvalidArgument);
  bad = base;
  bad.shapley = ShapleyMode::Sampled;
  bad.shapley_permutations = 1;
  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 1,
                                     Functional::mean(), bad),
                  InvalidArgument);
  bad = base;
  bad.kl_knn_k = 0;
  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 1,
                                     Functional::mean(), bad),
                  InvalidArgument);
  bad = base;
  bad.bootstrap_resamples = 10;
  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 1,
                                     Functional::mean(), bad),
                  InvalidArgument);
  bad = base;
  bad.bootstrap_resamples = 60;
  bad.bootstrap_level = 1.0;
  CHECK_THROWS_AS(attribute_marginal(old_table, new_table, dag, 1,
                                     Functional::mean(), bad),
                  InvalidArgument);

  // Order statistics are undefined on category codes; the mean is allowed
  // as the expectation of the code.
  auto cat_old = ancestral_sample(binary_scm(0.6, 0.9), 200, 123);
  auto cat_new = ancestral_sample(binary_scm(0.5, 0.7), 200, 124);
  CHECK_THROWS_AS(attribute_marginal(cat_old, cat_new, binary_chain(), 1,
                                     Functional::variance(), base),
                  InvalidArgument);
  CHECK_THROWS_AS(attribute_marginal(cat_old, cat_new, binary_chain(), 1,
                                     Functional::median(), base),
                  InvalidArgument);
  CHECK_NOTHROW(attribute_marginal(cat_old, cat_new, binary_chain(), 1,
                                   Functional::mean(), base));

  CHECK_THROWS_AS(attribute_marginal_models(chain_scm(0.0), binary_scm(0.5, 0.5), 1,
                                            Functional::mean(), base),
                  GraphMismatch);
}
