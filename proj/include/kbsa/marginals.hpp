#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kbsa/rng.hpp"

namespace kbsa {

enum class Family { Uniform, Normal, Beta, BetaFirstKind };

// A univariate input law with CDF, density, quantile and sampling.
//
// BetaFirstKind(c, a, b) is c * Beta(a, b): support [0, c].
//
// Endpoints: quantile(0) and quantile(1) return the support infimum and
// supremum. For unbounded families these are the lowest / largest finite
// doubles and `unbounded()` reports true, so callers can tell a clamped
// endpoint from a genuine value.
class MarginalDistribution {
 public:
  static MarginalDistribution uniform(double lo, double hi);
  static MarginalDistribution normal(double mean, double sd);
  static MarginalDistribution beta(double a, double b);
  static MarginalDistribution beta_first_kind(double scale, double a, double b);

  Family family() const { return family_; }
  double cdf(double x) const;
  double density(double x) const;
  double quantile(double p) const;
  double sample(RandomStream& stream) const { return quantile(stream.uniform()); }

  double support_lo() const;
  double support_hi() const;
  bool unbounded() const { return family_ == Family::Normal; }

  double mean() const;
  double variance() const;

  // e.g. "normal(0,1)"; used for CSV headers.
  std::string name() const;

  double param(std::size_t i) const { return params_[i]; }

 private:
  MarginalDistribution(Family family, double p0, double p1, double p2);

  Family family_;
  double params_[3];
};

// c: [0,1]^d -> R+, evaluated at the marginal-CDF image of a point.
using CopulaDensity = std::function<double(std::span<const double>)>;

// d marginals plus an optional copula density (empty = independence).
class InputSpace {
 public:
  // Throws ConfigError if d == 0 or if the copula density fails the
  // integrates-to-one Monte Carlo check (3 standard errors).
  explicit InputSpace(std::vector<MarginalDistribution> marginals, CopulaDensity copula = {});

  std::size_t dim() const { return marginals_.size(); }
  const MarginalDistribution& marginal(std::size_t j) const { return marginals_[j]; }
  const std::vector<MarginalDistribution>& marginals() const { return marginals_; }

  bool independent() const { return !copula_; }

  // c(F_1(x_1), ..., F_d(x_d)); 1 under independence.
  double copula_at(std::span<const double> x) const;
  double copula_density(std::span<const double> probs) const;

  // x_j = F_j^{-1}(p_j)
  void to_inputs(std::span<const double> probs, std::span<double> x) const;
  // p_j = F_j(x_j)
  void to_probs(std::span<const double> x, std::span<double> probs) const;

  // One draw from F_ind into x.
  void draw_point(RandomStream& stream, std::span<double> x) const;

 private:
  std::vector<MarginalDistribution> marginals_;
  CopulaDensity copula_;
};

// Row-major n x d block of points.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t n, std::size_t d) : n_(n), d_(d), data_(n * d, 0.0) {}

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * d_, d_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * d_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * d_ + j]; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> data_;
};

// n points from F_ind; point i uses stream.child(i), so results do not
// depend on evaluation order.
PointSet draw(const InputSpace& space, std::size_t n, const RandomStream& stream);

}  // namespace kbsa
