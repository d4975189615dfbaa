#include "kbsa/testcases.hpp"

#include <cmath>
#include <numbers>

#include "kbsa/errors.hpp"

namespace kbsa {

namespace ball {

double half_disk_quantile(double v) {
  // P(|T| <= sin(phi/2)) = (phi + sin phi) / pi
  constexpr double pi = std::numbers::pi;
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  const double target = pi * v;
  double phi = v < 0.5 ? 0.5 * target : pi - std::cbrt(6.0 * pi * (1.0 - v));
  double lo = 0.0, hi = pi;
  for (int it = 0; it < 60; ++it) {
    const double f = phi + std::sin(phi) - target;
    if (f > 0.0)
      hi = phi;
    else
      lo = phi;
    const double fp = 1.0 + std::cos(phi);
    double next = fp > 0.0 ? phi - f / fp : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - phi) < 1e-15) {
      phi = next;
      break;
    }
    phi = next;
  }
  return std::sin(0.5 * phi);
}

void complete_singleton(double c, std::size_t j, std::span<double> x, std::span<const double> uniforms) {
  const std::size_t a = j == 0 ? 1 : 0;
  const std::size_t b = j == 2 ? 1 : 2;
  const double r2 = std::max(0.0, c - x[j] * x[j]);
  const double r = std::sqrt(r2);
  const double s = 2.0 * uniforms[0] - 1.0;
  const double t = half_disk_quantile(std::fabs(s));
  x[a] = std::copysign(r * t, s);
  // Given x_a, the last coordinate is uniform on [-L, L].
  const double len = std::sqrt(std::max(0.0, r2 - x[a] * x[a]));
  x[b] = len * (2.0 * uniforms[1] - 1.0);
}

double conditioning_mass(double c, double xj) {
  const double r2 = c - xj * xj;
  if (r2 <= 0.0) return 0.0;
  return std::numbers::pi * r2 / (4.0 * c);
}

Reference reference() { return {0.385, 0.385, 0.505, 0.167, 0.223, 0.445}; }

}  // namespace ball

namespace {

Box upper_box(double c) { return Box{{}, {c}}; }

}  // namespace

Problem quadratic_ball(double c, bool analytic) {
  if (!(c > 0.0)) throw ConfigError("threshold c must be > 0", "weight.upper");
  const double h = std::sqrt(c);
  auto space = std::make_shared<const InputSpace>(std::vector<MarginalDistribution>(
      3, MarginalDistribution::uniform(-h, h)));
  auto model = std::make_shared<const QuadraticSum>(3);
  auto weight = std::make_shared<const EffectiveWeight>(WeightFunction::indicator_threshold(upper_box(c), model), space);
  Problem p{"quadratic_ball", space, model, weight, {}};
  if (analytic) {
    p.analytic = [c](const SubsetSpec& s) -> std::optional<AnalyticOverride> {
      if (s.u.size() != 1 || s.dim() != 3) return std::nullopt;
      // The closed form fills the complement in ascending order.
      if (s.pi[0] > s.pi[1]) return std::nullopt;
      const std::size_t j = s.u[0];
      AnalyticOverride o;
      o.sampler = [c, j](std::span<double> x, std::span<const double> uniforms) {
        ball::complete_singleton(c, j, x, uniforms);
      };
      o.mass = [c, j](std::span<const double> x) { return ball::conditioning_mass(c, x[j]); };
      return o;
    };
  }
  return p;
}

Problem quadratic_gaussian(double c) {
  if (!(c > 0.0)) throw ConfigError("threshold c must be > 0", "weight.upper");
  auto space = std::make_shared<const InputSpace>(std::vector<MarginalDistribution>(
      3, MarginalDistribution::normal(0.0, 1.0)));
  auto model = std::make_shared<const QuadraticSum>(3);
  auto weight = std::make_shared<const EffectiveWeight>(WeightFunction::indicator_threshold(upper_box(c), model), space);
  return {"quadratic_gaussian", space, model, weight, {}};
}

Problem gsobol(std::vector<double> alpha) {
  if (alpha.size() != GSobol4::kDim) throw ConfigError("g-Sobol needs 10 exponents", "weight.alpha");
  auto space = std::make_shared<const InputSpace>(std::vector<MarginalDistribution>(
      GSobol4::kDim, MarginalDistribution::uniform(0.0, 1.0)));
  auto model = std::make_shared<const GSobol4>();
  auto weight = std::make_shared<const EffectiveWeight>(WeightFunction::polynomial(std::move(alpha)), space);
  return {"gsobol4", space, model, weight, {}};
}

Problem gfunction(std::vector<double> a) {
  const std::size_t d = a.size();
  auto space = std::make_shared<const InputSpace>(std::vector<MarginalDistribution>(
      d, MarginalDistribution::uniform(0.0, 1.0)));
  auto model = std::make_shared<const GFunction>(std::move(a));
  auto weight = std::make_shared<const EffectiveWeight>(WeightFunction::constant(), space);
  return {"gfunction", space, model, weight, {}};
}

Problem constant_model(std::size_t d, double value) {
  auto space = std::make_shared<const InputSpace>(std::vector<MarginalDistribution>(
      d, MarginalDistribution::uniform(0.0, 1.0)));
  auto model = std::make_shared<const Linear>(std::vector<double>(d, 0.0), value);
  auto weight = std::make_shared<const EffectiveWeight>(WeightFunction::constant(), space);
  return {"constant", space, model, weight, {}};
}

std::vector<double> gsobol_alpha_zero() { return std::vector<double>(10, 0.0); }

std::vector<double> gsobol_alpha_table2() { return {20, 20, 10, 10, 10, 10, 10, 1, 1, 1}; }

}  // namespace kbsa
