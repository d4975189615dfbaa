#include <cmath>
#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "kbsa/errors.hpp"
#include "kbsa/estimators.hpp"

using namespace kbsa;

namespace {

EstimatorConfig small(std::uint64_t seed = 1, std::size_t m = 400) {
  EstimatorConfig c;
  c.m1 = 50;
  c.m = m;
  c.M = 10 * m;
  c.seed = seed;
  return c;
}

Problem with_model(ModelPtr model, std::shared_ptr<const InputSpace> space) {
  Problem p;
  p.name = "custom";
  p.space = space;
  p.model = std::move(model);
  p.weight = std::make_shared<EffectiveWeight>(WeightFunction::constant(), space);
  return p;
}

std::shared_ptr<const InputSpace> unit_box(std::size_t d) {
  return std::make_shared<InputSpace>(std::vector<MarginalDistribution>(d, MarginalDistribution::uniform(0, 1)));
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void check_identical(const IndexEstimate& a, const IndexEstimate& b) {
  CHECK(same_bits(a.value, b.value));
  CHECK(same_bits(a.std_error, b.std_error));
  CHECK(same_bits(a.ci.lo, b.ci.lo));
  CHECK(same_bits(a.ci.hi, b.ci.hi));
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = kbsa::testing::mean(a), mb = kbsa::testing::mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("config validation") {
  EstimatorConfig c;
  CHECK_NOTHROW(c.validate());
  c.M = 10 * c.m - 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EstimatorConfig{};
  c.m1 = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EstimatorConfig{};
  c.ci_level = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EstimatorConfig{};
  c.theta_grid = ThetaGrid{{0.0, 1.0}, {0.5, -0.5}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.theta_grid = ThetaGrid{{1.0, 0.0}, {0.5, 0.5}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto t = ThetaGrid::trapezoid(0, 1, 3);
  CHECK(t.nodes == std::vector<double>{0, 0.5, 1});
  CHECK(t.weights == std::vector<double>{0.25, 0.5, 0.25});
}

TEST_CASE("confidence intervals") {
  const std::vector<double> equal(40, 0.3);
  const auto ci = asymptotic_ci(equal, 0.5, 0.95);
  CHECK(ci.lo == doctest::Approx(0.6));
  CHECK(ci.hi == ci.lo);
  RandomStream s(3, 0);
  std::vector<double> v(50);
  for (double& x : v) x = s.uniform();
  const auto a = asymptotic_ci(v, 1.0, 0.95), b = asymptotic_ci(v, 1.0, 0.99);
  CHECK(b.lo < a.lo);
  CHECK(b.hi > a.hi);
  CHECK_THROWS_AS(asymptotic_ci(std::vector<double>(29, 1.0), 1.0, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(asymptotic_ci(v, 0.0, 0.95), ZeroDenominatorError);
}

TEST_CASE("constant model") {
  Estimator est(constant_model(3, 5.0), small());
  const auto u = SubsetSpec::make(3, {0});
  RandomStream s(1, 0);
  const std::vector<double> x{0.5, 0.5, 0.5};
  const std::vector<double> unif{0.3, 0.6};
  CHECK(est.inner_mean(u, x, 20, s)[0] == 5.0);
  CHECK(est.mean_given_uniforms(u, unif, 20, s)[0] == 5.0);
  CHECK(est.overall_mean()[0] == 5.0);
  for (SfKind k : {SfKind::FirstOrder, SfKind::Total, SfKind::Centered, SfKind::Star}) {
    const auto fp = est.functionals(u, k, 10, 0);
    for (double v : fp.values) CHECK(v == 0.0);
  }
  CHECK(est.upsilon(u, KernelSpec::l1()).value == 0.0);
  CHECK_THROWS_AS(est.denominator(KernelSpec::l1()), ZeroDenominatorError);
  CHECK_THROWS_AS(est.first_order(u, KernelSpec::quadratic()), ZeroDenominatorError);
}

TEST_CASE("inner mean integrates out the other inputs") {
  auto space = std::make_shared<InputSpace>(
      std::vector<MarginalDistribution>{MarginalDistribution::normal(0, 1), MarginalDistribution::normal(0, 1)});
  Estimator est(with_model(std::make_shared<Linear>(std::vector<double>{1, 1}), space), small());
  const auto u = SubsetSpec::make(2, {0});
  RandomStream s(2, 0);
  const std::vector<double> x{0.7, 0.0};
  const std::size_t m1 = 4000;
  const double mu = est.inner_mean(u, x, m1, s)[0];
  CHECK(std::fabs(mu - 0.7) < 3.0 / std::sqrt(static_cast<double>(m1)));
}

TEST_CASE("jackknife removes the inner-sample bias of first-order indices") {
  // Y = 0.1 X1 + X2 on standard normals: the L2 first-order index of X1 is
  // (0.01 / 1.01)^2, while the plug-in estimate with m1 inner draws targets
  // ((0.01 + 1 / m1) / 1.01)^2.
  auto space = std::make_shared<InputSpace>(
      std::vector<MarginalDistribution>{MarginalDistribution::normal(0, 1), MarginalDistribution::normal(0, 1)});
  const auto u = SubsetSpec::make(2, {0});
  auto cfg = small(3, 2000);
  cfg.m1 = 10;
  auto fit = [&](bool jackknife) {
    cfg.jackknife = jackknife;
    Estimator est(with_model(std::make_shared<Linear>(std::vector<double>{0.1, 1}), space), cfg);
    return est.first_order(u, KernelSpec::l2());
  };
  const double truth = std::pow(0.01 / 1.01, 2);
  const auto plain = fit(false);
  CHECK(plain.value == doctest::Approx(std::pow(0.11 / 1.01, 2)).epsilon(0.1));
  const auto jack = fit(true);
  CHECK(std::fabs(jack.value - truth) < 4 * jack.std_error);
  CHECK(jack.value < 0.1 * plain.value);
}

TEST_CASE("ball: overall mean, star and first-order functional") {
  auto cfg = small(5);
  cfg.m1 = 2000;
  cfg.M = 20000;
  Estimator est(quadratic_ball(1.0), cfg);
  CHECK(est.overall_mean()[0] == doctest::Approx(0.6).epsilon(0.02));
  const auto u = SubsetSpec::make(3, {0});
  RandomStream s(3, 0);
  const std::vector<double> x{0.2, 0.0, 0.0};
  const std::vector<double> unif{0.4, 0.8};
  CHECK(est.star(u, x, x, unif, s)[0] == 0.0);
  const auto fp = est.functionals(u, SfKind::FirstOrder, 200, 1);
  std::vector<double> got, want;
  for (std::size_t i = 0; i < 200; ++i) {
    const double x1 = fp.points(i, 0);
    got.push_back(fp.values[i]);
    want.push_back(0.5 * (x1 * x1 - 0.2));
  }
  CHECK(correlation(got, want) > 0.99);
}

TEST_CASE("u = all gives one") {
  EstimatorConfig c;
  c.seed = 2;
  Estimator est(quadratic_ball(1.0), c);
  const auto all = SubsetSpec::all(3);
  CHECK(std::fabs(est.first_order(all, KernelSpec::l1()).sqrt_value - 1.0) < 0.02);
  CHECK(std::fabs(est.first_order(all, KernelSpec::quadratic()).sqrt_value - 1.0) < 0.02);
}

TEST_CASE("ordering between first-order, total and upsilon") {
  Estimator est(quadratic_ball(1.0), small(7, 1000));
  for (const auto& k : {KernelSpec::l1(), KernelSpec::quadratic()}) {
    const auto r = est.estimate(SubsetSpec::make(3, {1}), {k},
                                {IndexKind::FirstOrder, IndexKind::Total, IndexKind::Upsilon});
    const auto &fo = r[0], &tot = r[1], &ups = r[2];
    CHECK(fo.value <= tot.value + 3 * std::hypot(fo.std_error, tot.std_error));
    CHECK(tot.value <= ups.value + 3 * std::hypot(tot.std_error, ups.std_error));
    CHECK(tot.value <= 1 + 3 * tot.std_error);
    for (const auto& e : r) {
      CHECK(e.ci.lo <= e.value);
      CHECK(e.ci.hi >= e.value);
      CHECK(e.sqrt_value == doctest::Approx(std::sqrt(e.value)));
    }
    CHECK(ups.extrapolated_sigma);
  }
}

TEST_CASE("weight rescaling cancels") {
  auto cfg = small(4);
  cfg.outer_sampling = OuterSampling::Reweighted;
  auto p = quadratic_ball(1.0);
  Estimator a(p, cfg);
  auto q = p;
  q.weight = std::make_shared<EffectiveWeight>(p.weight->scaled(2.0));
  Estimator b(q, cfg);
  const auto u = SubsetSpec::make(3, {2});
  for (IndexKind kind : {IndexKind::FirstOrder, IndexKind::Total}) {
    const auto ea = a.estimate(u, {KernelSpec::l1()}, {kind})[0];
    const auto eb = b.estimate(u, {KernelSpec::l1()}, {kind})[0];
    CHECK(std::fabs(ea.value - eb.value) <= 1e-12 * std::fabs(ea.value));
  }
}

TEST_CASE("thread count does not change results") {
  auto c1 = small(9, 200);
  auto c4 = c1;
  c4.threads = 4;
  Estimator a(quadratic_ball(1.0), c1), b(quadratic_ball(1.0), c4);
  const auto u = SubsetSpec::make(3, {0});
  const std::vector<IndexKind> kinds{IndexKind::FirstOrder, IndexKind::Total, IndexKind::Upsilon};
  const auto ra = a.estimate(u, {KernelSpec::l1(), KernelSpec::quadratic()}, kinds);
  const auto rb = b.estimate(u, {KernelSpec::l1(), KernelSpec::quadratic()}, kinds);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) check_identical(ra[i], rb[i]);
}

TEST_CASE("theta grids") {
  auto space = unit_box(2);
  const auto u = SubsetSpec::make(2, {0});
  const KernelSpec k = KernelSpec::l2();

  SUBCASE("singleton grid is the plain index") {
    auto cfg = small(3);
    cfg.theta_grid = ThetaGrid::single(2.0);
    Estimator f(with_model(std::make_shared<ThetaToy>(), space), cfg);
    Estimator plain(with_model(std::make_shared<Linear>(std::vector<double>{2.0, 1.0}), space), small(3));
    for (IndexKind kind : {IndexKind::FirstOrder, IndexKind::Total, IndexKind::Upsilon})
      check_identical(f.estimate(u, {k}, {kind})[0], plain.estimate(u, {k}, {kind})[0]);
  }
  SUBCASE("model constant in theta") {
    auto inner = std::make_shared<Linear>(std::vector<double>{2.0, 1.0});
    auto cfg = small(3);
    cfg.theta_grid = ThetaGrid{{0.0, 0.4, 1.0}, {0.2, 0.5, 0.3}};
    Estimator f(with_model(std::make_shared<ThetaIgnoring>(inner), space), cfg);
    Estimator plain(with_model(inner, space), small(3));
    const double a = f.first_order(u, k).value, b = plain.first_order(u, k).value;
    CHECK(std::fabs(a - b) <= 1e-12 * b);
  }
  SUBCASE("coarse grid against a dense grid") {
    auto coarse = small(3, 2000);
    // 3-point Gauss-Legendre on [0, 2]: exact for the quartic theta dependence
    const double h = std::sqrt(0.6);
    coarse.theta_grid = ThetaGrid{{1 - h, 1.0, 1 + h}, {5.0 / 9, 8.0 / 9, 5.0 / 9}};
    auto dense = coarse;
    dense.theta_grid = ThetaGrid::trapezoid(0, 2, 101);
    auto model = std::make_shared<ThetaToy>();
    Estimator a(with_model(model, space), coarse), b(with_model(model, space), dense);
    CHECK(std::fabs(a.first_order(u, k).sqrt_value - b.first_order(u, k).sqrt_value) < 0.01);
  }
  SUBCASE("theta required") {
    CHECK_THROWS_AS(Estimator(with_model(std::make_shared<ThetaToy>(), space), small()), ConfigError);
  }
}

TEST_CASE("subset dimension mismatch") {
  Estimator est(quadratic_ball(1.0), small());
  CHECK_THROWS_AS(est.first_order(SubsetSpec::make(4, {0}), KernelSpec::l1()), ConfigError);
}
