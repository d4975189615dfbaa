#include "kbsa/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kbsa/errors.hpp"
#include "kbsa/special.hpp"

namespace kbsa {

namespace {

constexpr double kLowest = std::numeric_limits<double>::lowest();
constexpr double kLargest = std::numeric_limits<double>::max();

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

MarginalDistribution::MarginalDistribution(Family family, double p0, double p1, double p2)
    : family_(family), params_{p0, p1, p2} {}

MarginalDistribution MarginalDistribution::uniform(double lo, double hi) {
  require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, "uniform: need finite lo < hi");
  return {Family::Uniform, lo, hi, 0.0};
}

MarginalDistribution MarginalDistribution::normal(double mean, double sd) {
  require(std::isfinite(mean) && std::isfinite(sd) && sd > 0.0, "normal: need finite mean and sd > 0");
  return {Family::Normal, mean, sd, 0.0};
}

MarginalDistribution MarginalDistribution::beta(double a, double b) {
  require(std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0, "beta: shape parameters must be > 0");
  return {Family::Beta, a, b, 1.0};
}

MarginalDistribution MarginalDistribution::beta_first_kind(double scale, double a, double b) {
  require(std::isfinite(scale) && scale > 0.0, "beta_first_kind: scale must be > 0");
  require(std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0,
          "beta_first_kind: shape parameters must be > 0");
  return {Family::BetaFirstKind, a, b, scale};
}

double MarginalDistribution::support_lo() const {
  switch (family_) {
    case Family::Uniform: return params_[0];
    case Family::Normal: return kLowest;
    case Family::Beta:
    case Family::BetaFirstKind: return 0.0;
  }
  return 0.0;
}

double MarginalDistribution::support_hi() const {
  switch (family_) {
    case Family::Uniform: return params_[1];
    case Family::Normal: return kLargest;
    case Family::Beta:
    case Family::BetaFirstKind: return params_[2];
  }
  return 0.0;
}

double MarginalDistribution::cdf(double x) const {
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  switch (family_) {
    case Family::Uniform: {
      const double lo = params_[0], hi = params_[1];
      if (x <= lo) return 0.0;
      if (x >= hi) return 1.0;
      return (x - lo) / (hi - lo);
    }
    case Family::Normal: return special::normal_cdf((x - params_[0]) / params_[1]);
    case Family::Beta:
    case Family::BetaFirstKind: {
      const double t = x / params_[2];
      if (t <= 0.0) return 0.0;
      if (t >= 1.0) return 1.0;
      return special::incomplete_beta(params_[0], params_[1], t);
    }
  }
  return 0.0;
}

double MarginalDistribution::density(double x) const {
  switch (family_) {
    case Family::Uniform: {
      const double lo = params_[0], hi = params_[1];
      return (x >= lo && x <= hi) ? 1.0 / (hi - lo) : 0.0;
    }
    case Family::Normal: return special::normal_pdf((x - params_[0]) / params_[1]) / params_[1];
    case Family::Beta:
    case Family::BetaFirstKind: {
      const double c = params_[2];
      const double t = x / c;
      if (!(t > 0.0 && t <= 1.0)) return 0.0;
      const double a = params_[0], b = params_[1];
      if (t == 1.0) {
        if (b < 1.0) return std::numeric_limits<double>::infinity();
        if (b > 1.0) return 0.0;
      }
      const double log_pdf = (a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t) - special::log_beta(a, b);
      return std::exp(log_pdf) / c;
    }
  }
  return 0.0;
}

double MarginalDistribution::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile: probability outside [0,1]");
  switch (family_) {
    case Family::Uniform: return params_[0] + p * (params_[1] - params_[0]);
    case Family::Normal: {
      if (p == 0.0) return kLowest;
      if (p == 1.0) return kLargest;
      return params_[0] + params_[1] * special::normal_quantile(p);
    }
    case Family::Beta:
    case Family::BetaFirstKind: return params_[2] * special::incomplete_beta_inverse(params_[0], params_[1], p);
  }
  return 0.0;
}

double MarginalDistribution::mean() const {
  switch (family_) {
    case Family::Uniform: return 0.5 * (params_[0] + params_[1]);
    case Family::Normal: return params_[0];
    case Family::Beta:
    case Family::BetaFirstKind: return params_[2] * params_[0] / (params_[0] + params_[1]);
  }
  return 0.0;
}

double MarginalDistribution::variance() const {
  switch (family_) {
    case Family::Uniform: {
      const double w = params_[1] - params_[0];
      return w * w / 12.0;
    }
    case Family::Normal: return params_[1] * params_[1];
    case Family::Beta:
    case Family::BetaFirstKind: {
      const double a = params_[0], b = params_[1], c = params_[2];
      return c * c * a * b / ((a + b) * (a + b) * (a + b + 1.0));
    }
  }
  return 0.0;
}

std::string MarginalDistribution::name() const {
  std::ostringstream os;
  os.precision(12);
  switch (family_) {
    case Family::Uniform: os << "uniform(" << params_[0] << ";" << params_[1] << ")"; break;
    case Family::Normal: os << "normal(" << params_[0] << ";" << params_[1] << ")"; break;
    case Family::Beta: os << "beta(" << params_[0] << ";" << params_[1] << ")"; break;
    case Family::BetaFirstKind:
      os << "beta1(" << params_[2] << ";" << params_[0] << ";" << params_[1] << ")";
      break;
  }
  return os.str();
}

InputSpace::InputSpace(std::vector<MarginalDistribution> marginals, CopulaDensity copula)
    : marginals_(std::move(marginals)), copula_(std::move(copula)) {
  if (marginals_.empty()) throw ConfigError("input space needs at least one marginal", "inputs");
  if (!copula_) return;

  // Integrates-to-one check on [0,1]^d.
  constexpr std::size_t kCheck = 20000;
  RandomStream stream(0x636F70756C61ull, 0);
  std::vector<double> u(dim());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < kCheck; ++i) {
    for (double& v : u) v = stream.uniform();
    const double c = copula_(u);
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("copula density must be finite and >= 0", "copula");
    sum += c;
    sum_sq += c * c;
  }
  const double mean = sum / kCheck;
  const double var = std::max(0.0, sum_sq / kCheck - mean * mean);
  const double se = std::sqrt(var / kCheck);
  if (std::fabs(mean - 1.0) > 3.0 * se + 1e-12)
    throw ConfigError("copula density does not integrate to 1 (MC mean " + std::to_string(mean) + ")", "copula");
}

double InputSpace::copula_density(std::span<const double> probs) const {
  return copula_ ? copula_(probs) : 1.0;
}

double InputSpace::copula_at(std::span<const double> x) const {
  if (!copula_) return 1.0;
  std::vector<double> p(x.size());
  to_probs(x, p);
  return copula_(p);
}

void InputSpace::to_inputs(std::span<const double> probs, std::span<double> x) const {
  for (std::size_t j = 0; j < marginals_.size(); ++j) x[j] = marginals_[j].quantile(probs[j]);
}

void InputSpace::to_probs(std::span<const double> x, std::span<double> probs) const {
  for (std::size_t j = 0; j < marginals_.size(); ++j) probs[j] = marginals_[j].cdf(x[j]);
}

void InputSpace::draw_point(RandomStream& stream, std::span<double> x) const {
  for (std::size_t j = 0; j < marginals_.size(); ++j) x[j] = marginals_[j].quantile(stream.uniform());
}

PointSet draw(const InputSpace& space, std::size_t n, const RandomStream& stream) {
  PointSet out(n, space.dim());
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream s = stream.child(i);
    space.draw_point(s, out.row(i));
  }
  return out;
}

}  // namespace kbsa
