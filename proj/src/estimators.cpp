#include "kbsa/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kbsa/errors.hpp"
#include "kbsa/parallel.hpp"
#include "kbsa/special.hpp"

namespace kbsa {

namespace {

// Stream tags under the base stream.
constexpr std::uint64_t kDenominatorTag = 1;
constexpr std::uint64_t kIndexTag = 2;
constexpr std::uint64_t kFunctionalTag = 3;

std::uint64_t kind_tag(IndexKind k) { return static_cast<std::uint64_t>(k); }

void add_into(std::vector<NeumaierSum>& acc, std::span<const double> y) {
  for (std::size_t l = 0; l < y.size(); ++l) acc[l].add(y[l]);
}

struct PairStats {
  double mean = 0.0;
  double std_error = 0.0;
  bool all_zero = true;
};

// Mean of f(i, (i+s) mod n) over i < n, s < shifts, with the variance of an
// incomplete two-sample U-statistic:
//   SE^2 = [Var(c) + Var(d) - Var(all) / S] / n,
// where c_i averages over the B partners of A_i and d_j over the A partners
// of B_j. With S = 1 this is the plain Var / n.
template <class F>
PairStats pair_stats(std::size_t n, std::size_t shifts, F&& f) {
  std::vector<NeumaierSum> c(n), d(n);
  NeumaierSum all;
  PairStats st;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < shifts; ++s) {
      const std::size_t j = (i + s) % n;
      const double v = f(i, j);
      if (v != 0.0) st.all_zero = false;
      c[i].add(v);
      d[j].add(v);
      all.add(v);
    }
  }
  const double total = static_cast<double>(n) * static_cast<double>(shifts);
  st.mean = all.value() / total;
  NeumaierSum var_all;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < shifts; ++s) {
      const double v = f(i, (i + s) % n) - st.mean;
      var_all.add(v * v);
    }
  std::vector<double> cv(n), dv(n);
  for (std::size_t i = 0; i < n; ++i) {
    cv[i] = c[i].value() / shifts;
    dv[i] = d[i].value() / shifts;
  }
  const double va = total > 1 ? var_all.value() / (total - 1.0) : 0.0;
  double v2;
  if (shifts == 1)
    v2 = va;
  else
    v2 = sample_variance(cv) + sample_variance(dv) - va / static_cast<double>(shifts);
  st.std_error = std::sqrt(std::max(0.0, v2) / static_cast<double>(n));
  return st;
}

// Mean of f(i, (i+s) mod n) over i < n, s < shifts.
template <class F>
double pair_mean(std::size_t n, std::size_t shifts, F&& f) {
  NeumaierSum all;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < shifts; ++s) all.add(f(i, (i + s) % n));
  return all.value() / (static_cast<double>(n) * static_cast<double>(shifts));
}

}  // namespace

std::string to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::FirstOrder: return "first_order";
    case IndexKind::Total: return "total";
    case IndexKind::Upsilon: return "upsilon";
  }
  return "";
}

std::uint64_t subset_key(const SubsetSpec& u) {
  std::uint64_t h = mix64(0x7375627365747375ull);
  for (std::size_t j : u.u) h = mix64(h ^ (j + 1));
  h = mix64(h ^ 0xFFFFull);
  for (std::size_t j : u.pi) h = mix64(h ^ (j + 1));
  return h;
}

ThetaGrid ThetaGrid::trapezoid(double a, double b, std::size_t n) {
  if (n < 2 || !(b > a)) throw ConfigError("trapezoid grid needs n >= 2 and b > a", "estimator.theta_grid");
  ThetaGrid g;
  const double h = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back(a + h * static_cast<double>(i));
    g.weights.push_back((i == 0 || i + 1 == n) ? 0.5 * h : h);
  }
  return g;
}

void ThetaGrid::validate() const {
  if (nodes.empty()) throw ConfigError("theta grid must not be empty", "estimator.theta_grid");
  if (nodes.size() != weights.size())
    throw ConfigError("theta grid needs one weight per node", "estimator.theta_grid.weights");
  if (!std::is_sorted(nodes.begin(), nodes.end()))
    throw ConfigError("theta nodes must be sorted", "estimator.theta_grid.nodes");
  for (double q : weights)
    if (!(q > 0.0) || !std::isfinite(q))
      throw ConfigError("quadrature weights must be finite and > 0", "estimator.theta_grid.weights");
}

void EstimatorConfig::validate() const {
  if (m1 < 2) throw ConfigError("m1 must be >= 2", "estimator.m1");
  if (m < 2) throw ConfigError("m must be >= 2", "estimator.m");
  if (M < 2) throw ConfigError("M must be >= 2", "estimator.M");
  if (M < 10 * m) throw ConfigError("M must be >= 10 m", "estimator.M");
  if (M < 10 * m1) throw ConfigError("M must be >= 10 m1", "estimator.M");
  if (pair_shifts < 1) throw ConfigError("pair_shifts must be >= 1", "estimator.pair_shifts");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("ci_level must be in (0,1)", "estimator.ci_level");
  if (threads < 1) throw ConfigError("threads must be >= 1", "threads");
  if (theta_grid) theta_grid->validate();
  dependency.validate();
}

ConfidenceInterval asymptotic_ci(double estimate, double std_error, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("asymptotic_ci: level must be in (0,1)");
  const double z = special::normal_quantile(0.5 + 0.5 * level);
  return {estimate - z * std_error, estimate + z * std_error};
}

ConfidenceInterval asymptotic_ci(std::span<const double> summands, double mu_c, double level) {
  if (summands.size() < 30) throw std::invalid_argument("asymptotic_ci: need m >= 30 summands");
  if (!(mu_c > 0.0)) throw ZeroDenominatorError("asymptotic_ci: denominator must be > 0");
  const double m = static_cast<double>(summands.size());
  const double est = ordered_mean(summands) / mu_c;
  const double sigma = std::sqrt(sample_variance(summands));
  return asymptotic_ci(est, sigma / (std::sqrt(m) * mu_c), level);
}

std::vector<std::string> IndexEstimate::flags() const {
  std::vector<std::string> f;
  if (clamped) f.push_back("clamped_negative");
  if (extrapolated_sigma) f.push_back("extrapolated_sigma");
  return f;
}

Estimator::Estimator(ModelPtr model, std::shared_ptr<const EffectiveWeight> weight, AnalyticProvider analytic,
                     EstimatorConfig config)
    : model_(std::move(model)),
      weight_(std::move(weight)),
      analytic_(std::move(analytic)),
      config_(std::move(config)),
      base_(config_.seed, 0) {
  config_.validate();
  if (!model_ || !weight_) throw ConfigError("estimator needs a model and a weight");
  if (model_->input_dim() != weight_->space().dim())
    throw ConfigError("model input dimension " + std::to_string(model_->input_dim()) +
                          " does not match the input space (" + std::to_string(weight_->space().dim()) + ")",
                      "model");
  if (model_->needs_theta() && !config_.theta_grid)
    throw ConfigError("model needs theta; set estimator.theta_grid", "estimator.theta_grid");
  config_.dependency.analytic = analytic_;
  if (config_.theta_grid) {
    for (std::size_t g = 0; g < config_.theta_grid->nodes.size(); ++g) {
      thetas_.push_back(config_.theta_grid->nodes[g]);
      quad_.push_back(config_.theta_grid->weights[g]);
    }
  } else {
    thetas_.push_back(std::nullopt);
    quad_.push_back(1.0);
  }
  width_ = thetas_.size() * model_->output_dim();
  if (weight_->is_product_form() && !weight_->is_constant()) tables_ = std::make_shared<ProductTables>(*weight_);
}

const TargetSampler& Estimator::target_sampler() {
  if (!sampler_) {
    SampleOptions opt;
    opt.dependency = config_.dependency;
    // force_numerical targets r; exact outer draws (e.g. rejection) stay on
    opt.dependency.force_numerical = false;
    sampler_ = std::make_unique<TargetSampler>(weight_, opt, tables_, base_.child({9, 9}));
  }
  return *sampler_;
}

const DependencyModel& Estimator::dependency(const SubsetSpec& u) {
  std::vector<std::size_t> key = u.u;
  key.push_back(std::numeric_limits<std::size_t>::max());
  key.insert(key.end(), u.pi.begin(), u.pi.end());
  std::lock_guard lock(dependency_mutex_);
  auto& slot = dependencies_[key];
  if (!slot) slot = std::make_unique<DependencyModel>(weight_, u, config_.dependency, tables_);
  return *slot;
}

void Estimator::outputs(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = model_->output_dim();
  for (std::size_t g = 0; g < thetas_.size(); ++g) model_->evaluate(x, thetas_[g], y.subspan(g * n, n));
}

void Estimator::outputs_batch(const PointSet& xs, std::span<double> ys) const {
  const std::size_t n = model_->output_dim();
  const std::size_t rows = xs.size();
  if (thetas_.size() == 1) {
    model_->evaluate_batch(xs, thetas_[0], ys);
    return;
  }
  std::vector<double> buf(rows * n);
  for (std::size_t g = 0; g < thetas_.size(); ++g) {
    model_->evaluate_batch(xs, thetas_[g], buf);
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(buf.begin() + i * n, n, ys.begin() + i * width_ + g * n);
  }
}

double Estimator::draw_outer(RandomStream& s, std::span<double> x) {
  if (config_.outer_sampling == OuterSampling::Reweighted) {
    weight_->space().draw_point(s, x);
    return (*weight_)(x);
  }
  target_sampler().draw(s, x);
  return 1.0;
}

// Every kernel is <phi(y), phi(y')>, so a side reduces to its feature
// vector, one block per theta node. Jackknifed rows use
// 2 phi(full) - (phi(h1) + phi(h2)) / 2. With a block index only that block
// is returned, its outputs shifted by -shift.
std::vector<double> Estimator::features(const KernelSpec& k, std::span<const double> rows,
                                        std::span<const double> halves, std::size_t block,
                                        std::span<const double> shift) const {
  const std::size_t n = model_->output_dim();
  const std::size_t fd = k.feature_dim(n);
  const bool one = block < quad_.size();
  const std::size_t g0 = one ? block : 0, g1 = one ? block + 1 : quad_.size();
  const std::size_t fw = (g1 - g0) * fd;
  const std::size_t count = rows.size() / width_;
  const bool jack = !halves.empty();
  std::vector<double> f(count * fw, 0.0);
  std::vector<double> y(n), tmp(fd);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t g = g0; g < g1; ++g) {
      double* out = f.data() + i * fw + (g - g0) * fd;
      auto add = [&](std::span<const double> src, std::size_t offset, double c) {
        for (std::size_t l = 0; l < n; ++l) y[l] = src[offset + g * n + l] - (shift.empty() ? 0.0 : shift[l]);
        k.features(y, tmp);
        for (std::size_t r = 0; r < fd; ++r) out[r] += c * tmp[r];
      };
      add(rows, i * width_, jack ? 2.0 : 1.0);
      if (jack) {
        add(halves, 2 * i * width_, -0.5);
        add(halves, (2 * i + 1) * width_, -0.5);
      }
    }
  return f;
}

double Estimator::feature_dot(const KernelSpec& k, const double* fa, const double* fb) const {
  const std::size_t fd = k.feature_dim(model_->output_dim());
  double s = 0.0;
  for (std::size_t g = 0; g < quad_.size(); ++g) {
    double t = 0.0;
    for (std::size_t r = 0; r < fd; ++r) t += fa[g * fd + r] * fb[g * fd + r];
    s += quad_[g] * t;
  }
  return s;
}

// d/d mu_l of a statistic whose rows are centered by the overall mean, by
// central differences at the scale of SE(mu_l). at(g, shift) evaluates the
// theta block g alone, the only one a shift of its outputs can change.
std::vector<double> Estimator::mean_gradient(
    const std::function<double(std::size_t, std::span<const double>)>& at) {
  const auto& cov = denominator_panel().mean_cov;
  const std::size_t n = model_->output_dim();
  std::vector<double> grad(width_, 0.0), shift(n, 0.0);
  for (std::size_t l = 0; l < width_; ++l) {
    const double h = std::sqrt(cov[l * width_ + l]);
    if (!(h > 0.0)) continue;
    const std::size_t g = l / n, c = l % n;
    shift[c] = h;
    const double up = at(g, shift);
    shift[c] = -h;
    const double down = at(g, shift);
    shift[c] = 0.0;
    grad[l] = (up - down) / (2.0 * h);
  }
  return grad;
}

const Estimator::DenominatorPanel& Estimator::denominator_panel() {
  if (denominator_panel_) return *denominator_panel_;
  target_sampler();
  const std::size_t M = config_.M;
  const std::size_t d = weight_->space().dim();
  DenominatorPanel p;
  p.y.assign(2 * M * width_, 0.0);
  p.w.assign(2 * M, 0.0);
  const RandomStream stream = base_.child(kDenominatorTag);
  parallel_for(M, config_.threads, [&](std::size_t i) {
    std::vector<double> x(d);
    for (std::size_t side = 0; side < 2; ++side) {
      const std::size_t r = 2 * i + side;
      RandomStream s = stream.child({i, side});
      const double w = draw_outer(s, x);
      p.w[r] = w;
      if (w != 0.0) outputs(x, std::span<double>(p.y).subspan(r * width_, width_));
    }
  });
  NeumaierSum wsum;
  std::vector<NeumaierSum> ysum(width_);
  for (std::size_t r = 0; r < 2 * M; ++r) {
    wsum.add(p.w[r]);
    for (std::size_t l = 0; l < width_; ++l) ysum[l].add(p.w[r] * p.y[r * width_ + l]);
  }
  if (!(wsum.value() > 0.0)) throw ZeroDenominatorError("all denominator-panel weights are 0");
  p.mean_weight = wsum.value() / static_cast<double>(2 * M);
  p.mean.resize(width_);
  for (std::size_t l = 0; l < width_; ++l) p.mean[l] = ysum[l].value() / wsum.value();
  for (std::size_t r = 0; r < 2 * M; ++r)
    for (std::size_t l = 0; l < width_; ++l) p.y[r * width_ + l] -= p.mean[l];
  // Cov of the weighted mean: sum w^2 (y - mu)(y - mu)^T / (sum w)^2.
  std::vector<NeumaierSum> cov(width_ * width_);
  for (std::size_t r = 0; r < 2 * M; ++r) {
    if (p.w[r] == 0.0) continue;
    const double* y = p.y.data() + r * width_;
    for (std::size_t l = 0; l < width_; ++l)
      for (std::size_t q = 0; q < width_; ++q) cov[l * width_ + q].add(p.w[r] * p.w[r] * y[l] * y[q]);
  }
  p.mean_cov.resize(width_ * width_);
  for (std::size_t i = 0; i < cov.size(); ++i) p.mean_cov[i] = cov[i].value() / (wsum.value() * wsum.value());
  denominator_panel_ = std::move(p);
  return *denominator_panel_;
}

const std::vector<double>& Estimator::overall_mean() { return denominator_panel().mean; }

double Estimator::mean_weight() { return denominator_panel().mean_weight; }

DenominatorEstimate Estimator::denominator(const KernelSpec& k) {
  auto it = denominators_.find(k.name());
  if (it != denominators_.end()) return it->second;
  const DenominatorPanel& p = denominator_panel();
  const std::size_t M = config_.M;
  const std::size_t shifts = std::min(config_.pair_shifts, M);
  const double w2 = p.mean_weight * p.mean_weight;
  const std::size_t fw = quad_.size() * k.feature_dim(model_->output_dim());
  auto pair = [&](const std::vector<double>& f, std::size_t i, std::size_t j) {
    const double ww = p.w[2 * i] * p.w[2 * j + 1];
    if (ww == 0.0) return 0.0;
    return feature_dot(k, f.data() + 2 * i * fw, f.data() + (2 * j + 1) * fw) * ww / w2;
  };
  const auto f = features(k, p.y, {});
  auto st = pair_stats(M, shifts, [&](std::size_t i, std::size_t j) { return pair(f, i, j); });
  if (!(st.mean > 0.0) || !std::isfinite(st.mean))
    throw ZeroDenominatorError("kernel " + k.name() + ": denominator estimate is " + std::to_string(st.mean) +
                               "; the output does not vary under the target law");
  DenominatorEstimate est{k.name(), st.mean, st.std_error, {}};
  const std::size_t fd = k.feature_dim(model_->output_dim());
  est.mean_gradient = mean_gradient([&](std::size_t g, std::span<const double> shift) {
    const auto fs = features(k, p.y, {}, g, shift);
    return pair_mean(M, shifts, [&](std::size_t i, std::size_t j) {
      const double ww = p.w[2 * i] * p.w[2 * j + 1];
      if (ww == 0.0) return 0.0;
      double t = 0.0;
      for (std::size_t r = 0; r < fd; ++r) t += fs[2 * i * fd + r] * fs[(2 * j + 1) * fd + r];
      return quad_[g] * t * ww / w2;
    });
  });
  denominators_.emplace(k.name(), est);
  return est;
}

std::vector<double> Estimator::inner_mean(const SubsetSpec& u, std::span<const double> x, std::size_t m1,
                                          RandomStream& stream, std::span<double> halves) {
  const DependencyModel& dm = dependency(u);
  std::vector<double> mean(width_, 0.0);
  if (u.full()) {
    outputs(x, mean);
    if (!halves.empty())
      for (std::size_t h = 0; h < 2; ++h) std::copy(mean.begin(), mean.end(), halves.begin() + h * width_);
    return mean;
  }
  const std::size_t d = x.size();
  PointSet pts(m1, d);
  std::vector<double> uniforms(u.pi.size());
  for (std::size_t t = 0; t < m1; ++t) {
    auto row = pts.row(t);
    std::copy(x.begin(), x.end(), row.begin());
    for (double& v : uniforms) v = stream.uniform();
    dm.complete(row, uniforms, stream);
  }
  std::vector<double> ys(m1 * width_);
  outputs_batch(pts, ys);
  const std::size_t cut = m1 / 2;
  std::vector<NeumaierSum> acc(width_), first(width_);
  for (std::size_t t = 0; t < m1; ++t) {
    if (t == cut) first = acc;
    add_into(acc, std::span<const double>(ys).subspan(t * width_, width_));
  }
  for (std::size_t l = 0; l < width_; ++l) mean[l] = acc[l].value() / static_cast<double>(m1);
  if (!halves.empty())
    for (std::size_t l = 0; l < width_; ++l) {
      halves[l] = first[l].value() / static_cast<double>(cut);
      halves[width_ + l] = (acc[l].value() - first[l].value()) / static_cast<double>(m1 - cut);
    }
  return mean;
}

std::vector<double> Estimator::mean_given_uniforms(const SubsetSpec& u, std::span<const double> uniforms,
                                                   std::size_t m1, RandomStream& stream, std::span<double> halves) {
  const DependencyModel& dm = dependency(u);
  const std::size_t d = weight_->space().dim();
  PointSet pts(m1, d);
  std::vector<double> w(m1);
  for (std::size_t t = 0; t < m1; ++t) {
    auto row = pts.row(t);
    w[t] = draw_outer(stream, row);
    if (w[t] != 0.0) dm.complete(row, uniforms, stream);
  }
  std::vector<double> ys(m1 * width_);
  outputs_batch(pts, ys);
  const std::size_t cut = m1 / 2;
  NeumaierSum wsum[2];
  std::vector<NeumaierSum> acc[2] = {std::vector<NeumaierSum>(width_), std::vector<NeumaierSum>(width_)};
  for (std::size_t t = 0; t < m1; ++t) {
    if (w[t] == 0.0) continue;
    const std::size_t h = t < cut ? 0 : 1;
    wsum[h].add(w[t]);
    for (std::size_t l = 0; l < width_; ++l) acc[h][l].add(w[t] * ys[t * width_ + l]);
  }
  const double wtot = wsum[0].value() + wsum[1].value();
  if (!(wtot > 0.0)) throw ZeroDenominatorError("mu(U): all " + std::to_string(m1) + " inner weights are 0");
  std::vector<double> mean(width_);
  for (std::size_t l = 0; l < width_; ++l) mean[l] = (acc[0][l].value() + acc[1][l].value()) / wtot;
  if (!halves.empty()) {
    // A half without weight carries no correction.
    const bool both = wsum[0].value() > 0.0 && wsum[1].value() > 0.0;
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t l = 0; l < width_; ++l)
        halves[h * width_ + l] = both ? acc[h][l].value() / wsum[h].value() : mean[l];
  }
  return mean;
}

std::vector<double> Estimator::star(const SubsetSpec& u, std::span<const double> x, std::span<const double> x2,
                                    std::span<const double> uniforms, RandomStream& stream) {
  const DependencyModel& dm = dependency(u);
  std::vector<double> p(x.begin(), x.end()), q(x2.begin(), x2.end());
  if (!u.full()) {
    dm.complete(p, uniforms, stream);
    dm.complete(q, uniforms, stream);
  }
  std::vector<double> yp(width_), yq(width_);
  outputs(p, yp);
  outputs(q, yq);
  for (std::size_t l = 0; l < width_; ++l) yp[l] -= yq[l];
  return yp;
}

// One side (A or B) of outer index i.
void Estimator::side(const SubsetSpec& u, IndexKind kind, RandomStream s, std::span<double> out,
                     std::span<double> halves, double& weight) {
  const std::size_t d = weight_->space().dim();
  const std::size_t m1 = config_.m1;
  std::vector<double> x(d);
  std::fill(out.begin(), out.end(), 0.0);
  std::fill(halves.begin(), halves.end(), 0.0);
  switch (kind) {
    case IndexKind::FirstOrder: {
      RandomStream s0 = s.child(0);
      weight = draw_outer(s0, x);
      if (weight == 0.0) return;
      RandomStream s1 = s.child(1);
      auto mu = inner_mean(u, x, m1, s1, halves);
      const auto& mean = overall_mean();
      for (std::size_t l = 0; l < width_; ++l) out[l] = mu[l] - mean[l];
      for (std::size_t i = 0; i < halves.size(); ++i) halves[i] -= mean[i % width_];
      return;
    }
    case IndexKind::Total: {
      RandomStream s0 = s.child(0);
      weight = draw_outer(s0, x);
      if (weight == 0.0) return;
      RandomStream s1 = s.child(1);
      std::vector<double> uniforms(u.pi.size());
      for (double& v : uniforms) v = s1.uniform();
      if (!u.full()) dependency(u).complete(x, uniforms, s1);
      outputs(x, out);
      RandomStream s2 = s.child(2);
      auto mu = mean_given_uniforms(u, uniforms, m1, s2, halves);
      for (std::size_t i = 0; i < halves.size(); ++i) halves[i] = out[i % width_] - halves[i];
      for (std::size_t l = 0; l < width_; ++l) out[l] -= mu[l];
      return;
    }
    case IndexKind::Upsilon: {
      std::vector<double> x2(d);
      RandomStream s0 = s.child(0);
      RandomStream s1 = s.child(1);
      weight = draw_outer(s0, x);
      if (weight == 0.0) return;
      weight *= draw_outer(s1, x2);
      if (weight == 0.0) return;
      RandomStream s2 = s.child(2);
      std::vector<double> uniforms(u.pi.size());
      for (double& v : uniforms) v = s2.uniform();
      auto diff = star(u, x, x2, uniforms, s2);
      std::copy(diff.begin(), diff.end(), out.begin());
      return;
    }
  }
}

Estimator::Panel Estimator::build_panel(const SubsetSpec& u, IndexKind kind) {
  if (u.dim() != weight_->space().dim()) throw ConfigError("subset does not match the input dimension", "subsets");
  denominator_panel();
  dependency(u);
  const std::size_t m = config_.m;
  Panel p;
  p.a.assign(m * width_, 0.0);
  p.b.assign(m * width_, 0.0);
  p.wa.assign(m, 0.0);
  p.wb.assign(m, 0.0);
  const bool halves = config_.jackknife && kind != IndexKind::Upsilon;
  if (halves) {
    p.ha.assign(2 * m * width_, 0.0);
    p.hb.assign(2 * m * width_, 0.0);
  }
  const std::size_t hw = halves ? 2 * width_ : 0;
  const RandomStream stream = base_.child({kIndexTag, subset_key(u), kind_tag(kind)});
  parallel_for(m, config_.threads, [&](std::size_t i) {
    RandomStream si = stream.child(i);
    side(u, kind, si.child(0), std::span<double>(p.a).subspan(i * width_, width_),
         std::span<double>(p.ha).subspan(i * hw, hw), p.wa[i]);
    side(u, kind, si.child(1), std::span<double>(p.b).subspan(i * width_, width_),
         std::span<double>(p.hb).subspan(i * hw, hw), p.wb[i]);
  });
  return p;
}

IndexEstimate Estimator::finish(const SubsetSpec& u, IndexKind kind, const KernelSpec& k, const Panel& panel,
                                std::uint64_t evaluations) {
  const std::size_t m = config_.m;
  const std::size_t shifts = std::min(config_.pair_shifts, m);
  const double wbar = mean_weight();
  const double norm = kind == IndexKind::Upsilon ? std::pow(wbar, 4) : wbar * wbar;
  const std::size_t fw = quad_.size() * k.feature_dim(model_->output_dim());
  auto pair = [&](const std::vector<double>& fa, const std::vector<double>& fb, std::size_t i, std::size_t j) {
    const double ww = panel.wa[i] * panel.wb[j];
    if (ww == 0.0) return 0.0;
    return feature_dot(k, fa.data() + i * fw, fb.data() + j * fw) * ww / norm;
  };
  const auto fa = features(k, panel.a, panel.ha);
  const auto fb = features(k, panel.b, panel.hb);
  auto st = pair_stats(m, shifts, [&](std::size_t i, std::size_t j) {
    const double v = pair(fa, fb, i, j);
    if (!std::isfinite(v)) throw EstimationError("kernel " + k.name() + " returned a non-finite value");
    return v;
  });

  IndexEstimate e;
  e.kind = kind;
  e.u = u.u;
  e.kernel = k.name();
  e.level = config_.ci_level;
  e.m1 = config_.m1;
  e.m = m;
  e.M = config_.M;
  e.seed = config_.seed;
  e.evaluations = evaluations;
  e.extrapolated_sigma = kind == IndexKind::Upsilon;

  if (kind == IndexKind::Upsilon && st.all_zero) {
    // Paired differences vanish identically: the bound is 0 whatever the
    // denominator.
    e.ci = {0.0, 0.0};
    return e;
  }
  const DenominatorEstimate den = denominator(k);
  const double raw = st.mean / den.value;
  // Delta method over the numerator, the denominator and the shared overall
  // mean; only first-order summands are centered by that mean.
  std::vector<double> grad(width_, 0.0);
  if (kind == IndexKind::FirstOrder)
    grad = mean_gradient([&](std::size_t g, std::span<const double> shift) {
      const std::size_t fd = k.feature_dim(model_->output_dim());
      const auto fsa = features(k, panel.a, panel.ha, g, shift);
      const auto fsb = features(k, panel.b, panel.hb, g, shift);
      return pair_mean(m, shifts, [&](std::size_t i, std::size_t j) {
        const double ww = panel.wa[i] * panel.wb[j];
        if (ww == 0.0) return 0.0;
        double t = 0.0;
        for (std::size_t r = 0; r < fd; ++r) t += fsa[i * fd + r] * fsb[j * fd + r];
        return quad_[g] * t * ww / norm;
      });
    });
  for (std::size_t l = 0; l < width_; ++l) grad[l] -= raw * den.mean_gradient[l];
  const auto& cov = denominator_panel().mean_cov;
  double var = st.std_error * st.std_error + raw * raw * den.std_error * den.std_error;
  for (std::size_t l = 0; l < width_; ++l)
    for (std::size_t q = 0; q < width_; ++q) var += grad[l] * cov[l * width_ + q] * grad[q];
  e.std_error = std::sqrt(std::max(0.0, var)) / den.value;
  e.ci = asymptotic_ci(raw, e.std_error, config_.ci_level);
  e.value = raw;
  if (raw < 0.0) {
    e.value = 0.0;
    e.clamped = true;
  }
  e.ci.lo = std::max(0.0, e.ci.lo);
  e.ci.hi = std::max(0.0, e.ci.hi);
  e.sqrt_value = std::sqrt(e.value);
  e.sqrt_std_error = e.value > 0.0 ? e.std_error / (2.0 * e.sqrt_value) : std::sqrt(e.std_error);
  return e;
}

std::vector<IndexEstimate> Estimator::estimate(const SubsetSpec& u, const std::vector<KernelSpec>& kernels,
                                               const std::vector<IndexKind>& kinds) {
  // Denominators first, so an invalid analysis fails before any subset work.
  for (const auto& k : kernels) denominator(k);
  std::vector<IndexEstimate> out;
  for (IndexKind kind : kinds) {
    const std::uint64_t before = model_->meter().count();
    Panel panel = build_panel(u, kind);
    const std::uint64_t used = model_->meter().count() - before;
    for (const auto& k : kernels) out.push_back(finish(u, kind, k, panel, used));
  }
  return out;
}

IndexEstimate Estimator::first_order(const SubsetSpec& u, const KernelSpec& k) {
  return estimate(u, {k}, {IndexKind::FirstOrder}).front();
}

IndexEstimate Estimator::total(const SubsetSpec& u, const KernelSpec& k) {
  return estimate(u, {k}, {IndexKind::Total}).front();
}

IndexEstimate Estimator::upsilon(const SubsetSpec& u, const KernelSpec& k) {
  const std::uint64_t before = model_->meter().count();
  Panel panel = build_panel(u, IndexKind::Upsilon);
  return finish(u, IndexKind::Upsilon, k, panel, model_->meter().count() - before);
}

FunctionalPanel Estimator::functionals(const SubsetSpec& u, SfKind which, std::size_t n, std::uint64_t tag) {
  const std::size_t d = weight_->space().dim();
  denominator_panel();
  dependency(u);
  FunctionalPanel fp;
  fp.points = PointSet(n, d);
  fp.values.assign(n * width_, 0.0);
  fp.weights.assign(n, 0.0);
  const RandomStream stream = base_.child({kFunctionalTag, tag, subset_key(u), static_cast<std::uint64_t>(which)});
  parallel_for(n, config_.threads, [&](std::size_t i) {
    RandomStream s = stream.child(i);
    auto out = std::span<double>(fp.values).subspan(i * width_, width_);
    auto x = fp.points.row(i);
    switch (which) {
      case SfKind::FirstOrder:
      case SfKind::Total:
      case SfKind::Star: {
        const IndexKind kind = which == SfKind::FirstOrder ? IndexKind::FirstOrder
                               : which == SfKind::Total    ? IndexKind::Total
                                                           : IndexKind::Upsilon;
        side(u, kind, s, out, {}, fp.weights[i]);
        // The outer point of every kind comes from child 0.
        RandomStream s0 = s.child(0);
        draw_outer(s0, x);
        break;
      }
      case SfKind::Centered: {
        RandomStream s0 = s.child(0);
        fp.weights[i] = draw_outer(s0, x);
        if (fp.weights[i] == 0.0) break;
        RandomStream s1 = s.child(1);
        std::vector<double> uniforms(u.pi.size());
        for (double& v : uniforms) v = s1.uniform();
        std::vector<double> y(x.begin(), x.end());
        if (!u.full()) dependency(u).complete(y, uniforms, s1);
        outputs(y, out);
        const auto& mean = overall_mean();
        for (std::size_t l = 0; l < width_; ++l) out[l] -= mean[l];
        break;
      }
    }
  });
  return fp;
}

}  // namespace kbsa
