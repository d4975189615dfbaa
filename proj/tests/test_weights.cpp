#include <cmath>

#include "doctest.h"
#include "kbsa/errors.hpp"
#include "kbsa/models.hpp"
#include "kbsa/testcases.hpp"
#include "kbsa/weights.hpp"

using namespace kbsa;

namespace {

std::shared_ptr<const InputSpace> unit_cube(std::size_t d) {
  return std::make_shared<const InputSpace>(std::vector<MarginalDistribution>(d, MarginalDistribution::uniform(0, 1)));
}

}  // namespace

TEST_CASE("weight examples") {
  auto quad = std::make_shared<const QuadraticSum>(3);
  const auto w = WeightFunction::indicator_threshold(Box{{}, {1.0}}, quad);
  CHECK(w(std::vector<double>{0, 0, 0}) == 1.0);
  CHECK(w(std::vector<double>{1, 1, 0}) == 0.0);
  CHECK(WeightFunction::polynomial(std::vector<double>(10, 0.0))(std::vector<double>(10, 0.37)) == 1.0);
  CHECK(WeightFunction::polynomial(std::vector<double>(10, 0.0)).is_constant());
  CHECK(WeightFunction::polynomial({2})(std::vector<double>{0.5}) == 0.25);
}

TEST_CASE("indicator weights take values in {0,1}") {
  auto quad = std::make_shared<const QuadraticSum>(3);
  const auto w = WeightFunction::indicator_threshold(Box{{}, {1.0}}, quad);
  InputSpace space(std::vector<MarginalDistribution>(3, MarginalDistribution::normal(0, 1)));
  const auto pts = draw(space, 2000, RandomStream(1, 0));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double v = w(pts.row(i));
    CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("smooth membership and composite") {
  const auto lin = std::make_shared<const Linear>(std::vector<double>{1.0, 0.0});
  ScoreFn score = [](std::span<const double> v) { return v[0]; };
  const auto m = WeightFunction::smooth_membership(score, Logistic{2.0, 0.5}, lin);
  CHECK(m(std::vector<double>{0.5, 0.3}) == doctest::Approx(0.5));
  CHECK(m(std::vector<double>{1.5, 0.3}) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  const auto c = WeightFunction::composite(score, Logistic{2.0, 0.5}, Box{{}, {1.0}}, lin);
  CHECK(c(std::vector<double>{0.5, 0.3}) == doctest::Approx(0.5));
  CHECK(c(std::vector<double>{1.5, 0.3}) == 0.0);
}

TEST_CASE("functional loss reduces over the theta grid") {
  auto toy = std::make_shared<const ThetaToy>();
  LossFn loss = [](std::span<const double> y, double) { return y[0] * y[0]; };
  const std::vector<double> grid{0.0, 1.0, 2.0};
  const std::vector<double> x{1.0, 1.0};  // y = theta + 1 -> 1, 2, 3
  auto mean = WeightFunction::functional_loss(loss, Reduction::Mean, grid, Box{}, toy);
  auto mx = WeightFunction::functional_loss(loss, Reduction::Max, grid, Box{}, toy);
  auto mn = WeightFunction::functional_loss(loss, Reduction::Min, grid, Box{}, toy);
  CHECK(mean(x) == doctest::Approx(14.0 / 3.0));
  CHECK(mx(x) == 9.0);
  CHECK(mn(x) == 1.0);
  auto boxed = WeightFunction::functional_loss(loss, Reduction::Mean, grid, Box{{}, {2.5}}, toy);
  CHECK(boxed(x) == 0.0);
}

TEST_CASE("weight failures carry the point") {
  const auto bad = WeightFunction::custom("negative", [](std::span<const double>) { return -1.0; });
  try {
    bad(std::vector<double>{0.25, 0.5});
    FAIL("expected an error");
  } catch (const ModelEvaluationError& e) {
    CHECK(std::string(e.what()).find("0.25") != std::string::npos);
  }
}

TEST_CASE("effective weight equals raw weight under independence") {
  auto space = unit_cube(2);
  const auto w = WeightFunction::polynomial({1, 2});
  EffectiveWeight ew(w, space);
  const std::vector<double> x{0.3, 0.6};
  CHECK(ew(x) == w(x));
}

TEST_CASE("effective weight includes the copula density") {
  CopulaDensity half = [](std::span<const double> p) { return p[0] < 0.5 ? 2.0 : 0.0; };
  auto space = std::make_shared<const InputSpace>(
      std::vector<MarginalDistribution>(2, MarginalDistribution::uniform(0, 1)), half);
  EffectiveWeight ew(WeightFunction::constant(), space);
  CHECK(ew(std::vector<double>{0.2, 0.7}) == 2.0);
  CHECK(ew(std::vector<double>{0.8, 0.7}) == 0.0);
  auto quad = std::make_shared<const QuadraticSum>(2);
  EffectiveWeight ind(WeightFunction::indicator_threshold(Box{{}, {0.1}}, quad), space);
  CHECK(ind(std::vector<double>{0.4, 0.4}) == 0.0);
}

TEST_CASE("normalizing constant examples") {
  EffectiveWeight one(WeightFunction::constant(), unit_cube(3));
  const auto c1 = normalizing_constant(one, 1000, RandomStream(1, 0));
  CHECK(c1.value == 1.0);
  CHECK(c1.std_error == 0.0);

  const Problem g = quadratic_gaussian(1.0);
  const auto c2 = normalizing_constant(*g.weight, 200000, RandomStream(2, 0));
  // P(chi2_3 <= 1) = erf(1/sqrt2) - sqrt(2/pi) e^{-1/2}
  const double truth = std::erf(1.0 / std::sqrt(2.0)) - std::sqrt(2.0 / M_PI) * std::exp(-0.5);
  CHECK(truth == doctest::Approx(0.198748).epsilon(1e-5));
  CHECK(std::fabs(c2.value - truth) < 3 * c2.std_error);

  EffectiveWeight poly(WeightFunction::polynomial({1, 1}), unit_cube(2));
  const auto c3 = normalizing_constant(poly, 100000, RandomStream(3, 0));
  CHECK(std::fabs(c3.value - 0.25) < 3 * c3.std_error);
  CHECK_THROWS_AS(normalizing_constant(poly, 1, RandomStream(3, 0)), ConfigError);
}

TEST_CASE("normalizing constant is exactly scale equivariant") {
  EffectiveWeight poly(WeightFunction::polynomial({1, 3}), unit_cube(2));
  for (double lambda : {0.1, 2.0, 7.5}) {
    const auto a = normalizing_constant(poly, 5000, RandomStream(4, 0));
    const auto b = normalizing_constant(poly.scaled(lambda), 5000, RandomStream(4, 0));
    CHECK(b.value == lambda * a.value);
    CHECK(b.std_error == lambda * a.std_error);
  }
}

TEST_CASE("degenerate weights fail fast") {
  auto quad = std::make_shared<const QuadraticSum>(3);
  // M >= 0 on the cube, so M <= -1 never happens
  auto w = WeightFunction::indicator_threshold(Box{{}, {-1.0}}, quad);
  CHECK_THROWS_AS(EffectiveWeight(w, unit_cube(3)), DegenerateWeightError);
}
