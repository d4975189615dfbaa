#include <cmath>

#include "doctest.h"
#include "kbsa/errors.hpp"
#include "kbsa/kernels.hpp"
#include "kbsa/rng.hpp"

using namespace kbsa;

namespace {

std::vector<KernelSpec> all_kernels() {
  return {KernelSpec::l1(), KernelSpec::lp(3), KernelSpec::l2(), KernelSpec::quadratic(), KernelSpec::owen(1),
          KernelSpec::owen(2)};
}

std::vector<double> random_vec(RandomStream& s, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = 4 * s.uniform() - 2;
  return v;
}

}  // namespace

TEST_CASE("kernel values") {
  const std::vector<double> y{1, -2}, z{3, 1};
  CHECK(KernelSpec::l1().eval(y, z) == 12.0);
  CHECK(KernelSpec::l2().eval(y, z) == 50.0);
  CHECK(KernelSpec::quadratic().eval(y, z) == 1.0);
  CHECK(KernelSpec::lp(3).eval(y, z) == doctest::Approx(9.0 * 28.0));
  CHECK(KernelSpec::owen(2).eval(y, z) == doctest::Approx(25.0 * 100.0));
  const std::vector<double> s{-3}, t{2};
  CHECK(KernelSpec::owen(1.5).eval(s, t) == doctest::Approx(std::pow(9.0, 1.5) * std::pow(4.0, 1.5)));
}

TEST_CASE("feature maps reproduce the kernel") {
  const std::vector<double> y{1.5, -2, 0.25}, z{3, 1, -0.5};
  for (const auto& k : {KernelSpec::l1(), KernelSpec::l2(), KernelSpec::quadratic(), KernelSpec::lp(3),
                        KernelSpec::owen(1.5)}) {
    std::vector<double> fy(k.feature_dim(3)), fz(k.feature_dim(3));
    k.features(y, fy);
    k.features(z, fz);
    double dot = 0.0;
    for (std::size_t r = 0; r < fy.size(); ++r) dot += fy[r] * fz[r];
    CHECK(dot == doctest::Approx(k.eval(y, z)).epsilon(1e-12));
  }
  std::vector<double> wrong(2);
  CHECK_THROWS_AS(KernelSpec::quadratic().features(y, wrong), std::invalid_argument);
}

TEST_CASE("k(y, 0) = 0 and symmetry") {
  RandomStream s(1, 0);
  for (const auto& k : all_kernels()) {
    const auto y = random_vec(s, 4), z = random_vec(s, 4);
    const std::vector<double> zero(4, 0.0);
    CHECK(k.eval(y, zero) == 0.0);
    CHECK(k.eval(y, z) == doctest::Approx(k.eval(z, y)));
  }
}

TEST_CASE("scale degree") {
  RandomStream s(2, 0);
  for (const auto& k : all_kernels()) {
    const auto y = random_vec(s, 3), z = random_vec(s, 3);
    std::vector<double> ly(y), lz(z);
    const double l = 1.7;
    for (auto& v : ly) v *= l;
    for (auto& v : lz) v *= l;
    CHECK_MESSAGE(k.eval(ly, lz) == doctest::Approx(std::pow(l, k.degree()) * k.eval(y, z)).epsilon(1e-10), k.name());
  }
  CHECK(KernelSpec::l1().degree() == 2);
  CHECK(KernelSpec::l2().degree() == 4);
  CHECK(KernelSpec::quadratic().degree() == 4);
  CHECK(KernelSpec::lp(3).degree() == 6);
  CHECK(KernelSpec::owen(2).degree() == 8);
}

TEST_CASE("Gram matrices are positive semi-definite") {
  RandomStream s(3, 0);
  for (const auto& k : all_kernels()) {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(random_vec(s, 3));
    const double lmin = gram_psd_check(k, pts);
    CHECK_MESSAGE(lmin > -1e-8, k.name());
  }
}

TEST_CASE("errors and parsing") {
  const std::vector<double> a{1, 2}, b{1};
  CHECK_THROWS_AS(KernelSpec::l1().eval(a, b), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::l1().eval(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS(KernelSpec::lp(0.5));
  CHECK_THROWS_AS(KernelSpec::parse("gauss"), ConfigError);
  for (const auto& k : all_kernels()) CHECK(KernelSpec::parse(k.name()) == k);
  CHECK(KernelSpec::parse("lp", 4) == KernelSpec::lp(4));
}

TEST_CASE("effect norms") {
  const std::vector<double> y{3, -4};
  CHECK(KernelSpec::l1().effect_norm(y) == 7.0);
  CHECK(KernelSpec::l2().effect_norm(y) == 5.0);
  CHECK(KernelSpec::lp(3).effect_norm(y) == doctest::Approx(std::cbrt(27.0 + 64.0)));
}
