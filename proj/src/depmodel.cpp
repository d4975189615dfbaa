#include "kbsa/depmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kbsa/errors.hpp"
#include "kbsa/parallel.hpp"

namespace kbsa {

namespace {

constexpr double kZMin = std::numeric_limits<double>::min();
constexpr double kZMax = 1.0 - 0x1p-53;

double clamp_z(double z) { return std::clamp(z, kZMin, kZMax); }

// 4-point Gauss-Legendre on [-1, 1].
constexpr double kGaussX[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr double kGaussW[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

constexpr std::size_t kMaxPanelGrowth = 256;

}  // namespace

SubsetSpec SubsetSpec::make(std::size_t d, std::vector<std::size_t> u, std::vector<std::size_t> pi) {
  std::sort(u.begin(), u.end());
  if (std::adjacent_find(u.begin(), u.end()) != u.end()) throw ConfigError("subset has repeated indices", "subsets");
  for (std::size_t j : u)
    if (j >= d) throw ConfigError("subset index " + std::to_string(j + 1) + " exceeds dimension", "subsets");
  std::vector<std::size_t> complement;
  for (std::size_t j = 0; j < d; ++j)
    if (!std::binary_search(u.begin(), u.end(), j)) complement.push_back(j);
  if (pi.empty()) {
    pi = complement;
  } else {
    auto sorted = pi;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != complement) throw ConfigError("permutation must order exactly the complement of u", "dependency.permutation");
  }
  return {std::move(u), std::move(pi)};
}

SubsetSpec SubsetSpec::all(std::size_t d) {
  std::vector<std::size_t> u(d);
  std::iota(u.begin(), u.end(), 0);
  return make(d, std::move(u));
}

void DependencyOptions::validate() const {
  if (inner_mc < 100) throw ConfigError("inner_mc must be >= 100", "dependency.inner_mc");
  if (!(inversion_tol > 0.0 && inversion_tol <= 1e-3))
    throw ConfigError("inversion_tol must be in (0, 1e-3]", "dependency.inversion_tol");
}

TabulatedQuantile::TabulatedQuantile(const MarginalDistribution& marginal, const std::function<double(double)>& g,
                                     std::size_t cells)
    : cdf_(cells + 1, 0.0) {
  const double h = 1.0 / static_cast<double>(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    const double mid = (k + 0.5) * h;
    double s = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double z = mid + 0.5 * h * kGaussX[q];
      const double v = g(marginal.quantile(z));
      if (!(v >= 0.0) || !std::isfinite(v)) throw DegenerateWeightError("weight factor is negative or not finite");
      s += kGaussW[q] * v;
    }
    cdf_[k + 1] = cdf_[k] + 0.5 * h * s;
  }
  const double total = cdf_.back();
  if (!(total > 0.0)) throw DegenerateWeightError("weight factor integrates to zero");
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
  guide_.resize(cells);
  std::size_t k = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double p = static_cast<double>(i) / static_cast<double>(cells);
    while (k + 1 < cells && cdf_[k + 1] <= p) ++k;
    guide_[i] = static_cast<std::uint32_t>(k);
  }
}

double TabulatedQuantile::cdf(double z) const {
  if (z <= 0.0) return 0.0;
  if (z >= 1.0) return 1.0;
  const std::size_t cells = cdf_.size() - 1;
  const double pos = z * cells;
  const auto k = std::min(static_cast<std::size_t>(pos), cells - 1);
  return cdf_[k] + (pos - k) * (cdf_[k + 1] - cdf_[k]);
}

double TabulatedQuantile::quantile(double p) const {
  const std::size_t cells = cdf_.size() - 1;
  // Largest k with cdf_[k] <= p, clamped to the last cell.
  std::size_t k = 0;
  if (p > 0.0) {
    k = guide_[std::min(static_cast<std::size_t>(p * static_cast<double>(cells)), cells - 1)];
    while (k > 0 && cdf_[k] > p) --k;
    while (k + 1 < cells && cdf_[k + 1] <= p) ++k;
  }
  // skip empty cells
  while (k + 1 < cells && cdf_[k + 1] == cdf_[k]) ++k;
  const double width = cdf_[k + 1] - cdf_[k];
  const double frac = width > 0.0 ? std::clamp((p - cdf_[k]) / width, 0.0, 1.0) : 0.5;
  return clamp_z((k + frac) / static_cast<double>(cells));
}

ProductTables::ProductTables(const EffectiveWeight& ew) : space_(ew.space_ptr()), tables_(ew.space().dim()) {
  if (!ew.is_product_form()) throw ConfigError("product tables need a product-form weight under independence");
  const WeightFunction& w = ew.weight();
  if (w.kind() != WeightKind::Polynomial) return;
  for (std::size_t j = 0; j < tables_.size(); ++j) {
    if (w.alpha()[j] == 0.0) continue;
    tables_[j].emplace(space_->marginal(j), [&w, j](double x) { return w.factor(j, x); });
  }
}

double ProductTables::quantile(std::size_t j, double p) const {
  const auto& m = space_->marginal(j);
  if (!tables_[j]) return m.quantile(p);
  return m.quantile(tables_[j]->quantile(p));
}

DependencyModel::DependencyModel(std::shared_ptr<const EffectiveWeight> ew, SubsetSpec subset, DependencyOptions options,
                                 std::shared_ptr<const ProductTables> tables)
    : ew_(std::move(ew)), subset_(std::move(subset)), options_(std::move(options)), tables_(std::move(tables)) {
  options_.validate();
  if (!ew_) throw ConfigError("dependency model needs an effective weight");
  if (subset_.dim() != ew_->space().dim()) throw ConfigError("subset does not match the input dimension", "subsets");
  if (options_.analytic && !subset_.full()) analytic_ = options_.analytic(subset_);

  if (options_.force_numerical) {
    path_ = DependencyPath::Numerical;
  } else if (ew_->is_constant()) {
    path_ = DependencyPath::Constant;
  } else if (analytic_) {
    path_ = DependencyPath::Analytic;
  } else if (ew_->is_product_form()) {
    path_ = DependencyPath::ProductForm;
    if (!tables_) tables_ = std::make_shared<ProductTables>(*ew_);
  } else {
    path_ = DependencyPath::Numerical;
  }
}

double DependencyModel::conditional_cdf_w(std::span<const double> x, std::span<const double> levels,
                                          RandomStream& stream) const {
  const auto& pi = subset_.pi;
  if (levels.size() != pi.size()) throw std::invalid_argument("conditional_cdf_w: one level per complement coordinate");
  double prod = 1.0;
  for (double l : levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw std::domain_error("conditional_cdf_w: level outside [0,1]");
    prod *= l;
  }
  if (prod == 0.0) return 0.0;
  if (pi.empty()) return 1.0;

  const InputSpace& space = ew_->space();
  std::vector<double> yn(x.begin(), x.end());
  std::vector<double> yd(x.begin(), x.end());
  NeumaierSum num, den;
  for (std::size_t i = 0; i < options_.inner_mc; ++i) {
    for (std::size_t k = 0; k < pi.size(); ++k) {
      const double s = stream.uniform();
      yd[pi[k]] = space.marginal(pi[k]).quantile(s);
      yn[pi[k]] = levels[k] == 1.0 ? yd[pi[k]] : space.marginal(pi[k]).quantile(clamp_z(levels[k] * s));
    }
    num.add(ew_->unscaled(yn));
    den.add(ew_->unscaled(yd));
  }
  if (!(den.value() > 0.0))
    throw ZeroDenominatorError("conditional CDF: E[w_e(x_u, Y)] = 0; x_u cannot exhibit the behavior");
  return std::clamp(num.value() / den.value() * prod, 0.0, 1.0);
}

// y holds x_u and the pi coordinates before position k; later coordinates
// are scratch. Returns z for position k.
double DependencyModel::invert_panel(std::size_t k, std::span<double> y, double p, RandomStream& stream) const {
  const auto& pi = subset_.pi;
  const InputSpace& space = ew_->space();
  const auto& mk = space.marginal(pi[k]);
  std::vector<double> cum, ts;
  for (std::size_t growth = 1; growth <= kMaxPanelGrowth; growth *= 4) {
    const std::size_t n = options_.inner_mc * growth;
    cum.assign(n + 1, 0.0);
    ts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      ts[i] = (static_cast<double>(i) + stream.uniform()) / static_cast<double>(n);
      y[pi[k]] = mk.quantile(ts[i]);
      for (std::size_t l = k + 1; l < pi.size(); ++l) y[pi[l]] = space.marginal(pi[l]).quantile(stream.uniform());
      cum[i + 1] = cum[i] + ew_->unscaled(y);
    }
    const double total = cum[n];
    if (!(total > 0.0)) continue;
    // Invert the stratified panel CDF and return the panel point of the
    // selected stratum: it carried positive weight, so the later positions
    // still have mass (a point interpolated inside the stratum may not).
    const double target = p * total;
    auto it = std::lower_bound(cum.begin() + 1, cum.end(), target);
    std::size_t j = static_cast<std::size_t>(it - cum.begin()) - 1;
    if (j >= n) j = n - 1;
    while (j + 1 < n && cum[j + 1] == cum[j]) ++j;
    while (j > 0 && cum[j + 1] == cum[j]) --j;
    return clamp_z(ts[j]);
  }
  if (k == 0)
    throw ZeroDenominatorError("conditional quantile: E[w_e(x_u, Y)] = 0; x_u cannot exhibit the behavior");
  throw NonBracketingError("conditional quantile: conditional CDF is identically 0 at position " + std::to_string(k));
}

double DependencyModel::conditional_quantile(std::size_t k, std::span<const double> x, std::span<const double> z_prev,
                                             double p, RandomStream& stream) const {
  const auto& pi = subset_.pi;
  if (k >= pi.size()) throw std::invalid_argument("conditional_quantile: position outside pi");
  if (z_prev.size() != k) throw std::invalid_argument("conditional_quantile: need k earlier coordinates");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("conditional_quantile: p must be in (0,1)");
  const InputSpace& space = ew_->space();
  if (path_ == DependencyPath::Constant) return p;
  if (path_ == DependencyPath::ProductForm) {
    const double x_k = tables_->quantile(pi[k], p);
    return space.marginal(pi[k]).cdf(x_k);
  }
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t l = 0; l < k; ++l) y[pi[l]] = space.marginal(pi[l]).quantile(z_prev[l]);
  return invert_panel(k, y, p, stream);
}

void DependencyModel::complete(std::span<double> x, std::span<const double> uniforms, RandomStream& stream) const {
  const auto& pi = subset_.pi;
  const InputSpace& space = ew_->space();
  switch (path_) {
    case DependencyPath::Constant:
      for (std::size_t k = 0; k < pi.size(); ++k) x[pi[k]] = space.marginal(pi[k]).quantile(uniforms[k]);
      return;
    case DependencyPath::ProductForm:
      for (std::size_t k = 0; k < pi.size(); ++k) x[pi[k]] = tables_->quantile(pi[k], uniforms[k]);
      return;
    case DependencyPath::Analytic: analytic_->sampler(x, uniforms); return;
    case DependencyPath::Numerical:
      for (std::size_t k = 0; k < pi.size(); ++k) {
        const double z = invert_panel(k, x, uniforms[k], stream);
        x[pi[k]] = space.marginal(pi[k]).quantile(z);
      }
      return;
  }
}

std::vector<double> DependencyModel::transform(std::span<const double> x_u, std::span<const double> uniforms,
                                               RandomStream& stream) const {
  if (x_u.size() != subset_.u.size()) throw std::invalid_argument("transform: x_u has wrong size");
  if (uniforms.size() != subset_.pi.size()) throw std::invalid_argument("transform: one uniform per pi coordinate");
  for (double v : uniforms)
    if (!(v > 0.0 && v < 1.0)) throw std::domain_error("transform: uniforms must lie in (0,1)");
  std::vector<double> x(subset_.dim(), 0.0);
  for (std::size_t i = 0; i < subset_.u.size(); ++i) x[subset_.u[i]] = x_u[i];
  complete(x, uniforms, stream);
  std::vector<double> out(subset_.pi.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[subset_.pi[k]];
  return out;
}

double DependencyModel::conditioning_mass(std::span<const double> x, RandomStream& stream) const {
  if (analytic_ && analytic_->mass) return analytic_->mass(x);
  if (ew_->is_constant()) return 1.0;
  const InputSpace& space = ew_->space();
  std::vector<double> y(x.begin(), x.end());
  NeumaierSum s;
  for (std::size_t i = 0; i < options_.inner_mc; ++i) {
    for (std::size_t j : subset_.pi) y[j] = space.marginal(j).quantile(stream.uniform());
    s.add(ew_->unscaled(y));
  }
  return s.value() / static_cast<double>(options_.inner_mc);
}

TargetSampler::TargetSampler(std::shared_ptr<const EffectiveWeight> ew, const SampleOptions& options,
                             std::shared_ptr<const ProductTables> tables, RandomStream pilot)
    : ew_(std::move(ew)), tables_(std::move(tables)) {
  const InputSpace& space = ew_->space();
  const bool numerical = options.dependency.force_numerical;
  if (!numerical && ew_->is_constant()) {
    method_ = Method::Independent;
  } else if (!numerical && ew_->is_product_form()) {
    method_ = Method::ProductForm;
    if (!tables_) tables_ = std::make_shared<ProductTables>(*ew_);
  } else if (!numerical && options.allow_rejection && ew_->weight().is_indicator() && space.independent()) {
    method_ = Method::Rejection;
    constexpr std::size_t kPilot = 20000;
    std::vector<double> x(space.dim());
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < kPilot; ++i) {
      space.draw_point(pilot, x);
      if (ew_->unscaled(x) > 0.0) ++accepted;
    }
    if (accepted < 2)
      throw DegenerateWeightError("rejection sampling starved: acceptance rate " +
                                  std::to_string(static_cast<double>(accepted) / kPilot) + " below 1e-4");
  } else {
    method_ = Method::Transform;
    transform_.emplace(ew_, SubsetSpec::none(space.dim()), options.dependency, tables_);
  }
}

void TargetSampler::draw(RandomStream& stream, std::span<double> x) const {
  const InputSpace& space = ew_->space();
  switch (method_) {
    case Method::Independent: space.draw_point(stream, x); return;
    case Method::ProductForm:
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = tables_->quantile(j, stream.uniform());
      return;
    case Method::Rejection: {
      constexpr std::size_t kMaxTries = 2000000;
      for (std::size_t t = 0; t < kMaxTries; ++t) {
        space.draw_point(stream, x);
        if (ew_->unscaled(x) > 0.0) return;
      }
      throw DegenerateWeightError("rejection sampling starved");
    }
    case Method::Transform: {
      std::vector<double> uniforms(x.size());
      for (double& v : uniforms) v = stream.uniform();
      RandomStream inner = stream.child(1);
      transform_->complete(x, uniforms, inner);
      return;
    }
  }
}

PointSet sample_target(std::shared_ptr<const EffectiveWeight> ew, std::size_t n, const RandomStream& stream,
                       const SampleOptions& options, unsigned threads, std::shared_ptr<const ProductTables> tables) {
  if (n < 1) throw ConfigError("sample size must be >= 1");
  TargetSampler sampler(ew, options, std::move(tables), stream.child(~0ull));
  PointSet out(n, ew->space().dim());
  parallel_for(n, threads, [&](std::size_t i) {
    RandomStream s = stream.child(i);
    sampler.draw(s, out.row(i));
  });
  return out;
}

}  // namespace kbsa
