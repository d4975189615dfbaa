#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kbsa/marginals.hpp"
#include "kbsa/weights.hpp"

namespace kbsa {

// u (sorted, 0-based) and an ordering pi of its complement.
struct SubsetSpec {
  std::vector<std::size_t> u;
  std::vector<std::size_t> pi;

  // Validates and fills pi with the ascending complement when empty.
  static SubsetSpec make(std::size_t d, std::vector<std::size_t> u, std::vector<std::size_t> pi = {});
  static SubsetSpec all(std::size_t d);
  static SubsetSpec none(std::size_t d) { return make(d, {}); }

  std::size_t dim() const { return u.size() + pi.size(); }
  bool full() const { return pi.empty(); }
};

// Closed-form r(x_u, U): reads x at the u coordinates and fills the pi
// coordinates from uniforms (one per pi entry, in pi order).
using AnalyticSampler = std::function<void(std::span<double> x, std::span<const double> uniforms)>;
// Closed-form E[w_e(x_u, Y_~u)], Y ~ F_ind, for the unscaled weight.
using AnalyticMass = std::function<double(std::span<const double> x)>;

struct AnalyticOverride {
  AnalyticSampler sampler;
  AnalyticMass mass;  // optional
};

// Supplies closed forms for the subsets it knows about.
using AnalyticProvider = std::function<std::optional<AnalyticOverride>(const SubsetSpec&)>;

struct DependencyOptions {
  std::size_t inner_mc = 2000;
  double inversion_tol = 1e-3;
  AnalyticProvider analytic;
  bool force_numerical = false;  // bypass every fast path

  void validate() const;
};

// Quantile of the law on [0,1] with density proportional to g(F^{-1}(z)),
// tabulated on a uniform grid; within a cell the CDF is linear.
class TabulatedQuantile {
 public:
  TabulatedQuantile(const MarginalDistribution& marginal, const std::function<double(double)>& g,
                    std::size_t cells = 8192);
  double cdf(double z) const;
  double quantile(double p) const;

 private:
  std::vector<double> cdf_;
  std::vector<std::uint32_t> guide_;  // largest k with cdf_[k] <= i / cells
};

// Per-coordinate tables for product-form weights under independence.
class ProductTables {
 public:
  explicit ProductTables(const EffectiveWeight& ew);
  // Maps a uniform to the weighted marginal of coordinate j (in x units).
  double quantile(std::size_t j, double p) const;

 private:
  std::shared_ptr<const InputSpace> space_;
  std::vector<std::optional<TabulatedQuantile>> tables_;  // empty = unweighted coordinate
};

enum class DependencyPath { Constant, ProductForm, Analytic, Numerical };

// Conditional sampler r realizing X^w_{~u} | X^w_u = x_u by sequential
// conditional-quantile inversion along pi.
class DependencyModel {
 public:
  DependencyModel(std::shared_ptr<const EffectiveWeight> ew, SubsetSpec subset, DependencyOptions options = {},
                  std::shared_ptr<const ProductTables> tables = nullptr);

  const SubsetSpec& subset() const { return subset_; }
  DependencyPath path() const { return path_; }
  const EffectiveWeight& weight() const { return *ew_; }

  // W(levels; x_u) with V = levels * S on one shared uniform panel S.
  // x holds x_u at the u coordinates; levels follow pi.
  double conditional_cdf_w(std::span<const double> x, std::span<const double> levels, RandomStream& stream) const;

  // z with ConditionalCDF(z) = p for position k of pi, given x_u and the
  // earlier coordinates z_prev (in [0,1], pi order).
  double conditional_quantile(std::size_t k, std::span<const double> x, std::span<const double> z_prev, double p,
                              RandomStream& stream) const;

  // Fills the pi coordinates of x (x_u already set) from `uniforms`.
  void complete(std::span<double> x, std::span<const double> uniforms, RandomStream& stream) const;

  // Convenience: x_u given separately (in u order); returns x_{~u} in pi order.
  std::vector<double> transform(std::span<const double> x_u, std::span<const double> uniforms,
                                RandomStream& stream) const;

  // Ê w_e(x_u, Y_~u) (unscaled weight), Y ~ F_ind.
  double conditioning_mass(std::span<const double> x, RandomStream& stream) const;

 private:
  double invert_panel(std::size_t k, std::span<double> y, double p, RandomStream& stream) const;

  std::shared_ptr<const EffectiveWeight> ew_;
  SubsetSpec subset_;
  DependencyOptions options_;
  std::shared_ptr<const ProductTables> tables_;
  std::optional<AnalyticOverride> analytic_;
  DependencyPath path_;
};

struct SampleOptions {
  DependencyOptions dependency;
  bool allow_rejection = true;
};

// Draws single points of X^w. Constant weights use F_ind, product forms
// their tables, indicator weights under independence accept-reject from
// F_ind, and everything else the u = {} dependency transform.
class TargetSampler {
 public:
  enum class Method { Independent, ProductForm, Rejection, Transform };

  // The rejection pilot (20000 draws from `pilot`) throws
  // DegenerateWeightError when the acceptance rate is below 1e-4.
  TargetSampler(std::shared_ptr<const EffectiveWeight> ew, const SampleOptions& options = {},
                std::shared_ptr<const ProductTables> tables = nullptr, RandomStream pilot = RandomStream(0x74617267ull, 0));

  Method method() const { return method_; }
  void draw(RandomStream& stream, std::span<double> x) const;

 private:
  std::shared_ptr<const EffectiveWeight> ew_;
  std::shared_ptr<const ProductTables> tables_;
  std::optional<DependencyModel> transform_;
  Method method_;
};

// n draws of X^w; draw i uses stream.child(i).
PointSet sample_target(std::shared_ptr<const EffectiveWeight> ew, std::size_t n, const RandomStream& stream,
                       const SampleOptions& options = {}, unsigned threads = 1,
                       std::shared_ptr<const ProductTables> tables = nullptr);

}  // namespace kbsa
