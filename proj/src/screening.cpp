#include "kbsa/screening.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "kbsa/errors.hpp"
#include "kbsa/parallel.hpp"

namespace kbsa {

namespace {

constexpr std::uint64_t kMorrisTag = 4;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void MorrisDesign::validate() const {
  if (trajectories < 1) throw ConfigError("screening needs at least one trajectory", "screening.trajectories");
  if (levels < 2 || levels % 2 != 0) throw ConfigError("levels must be even and >= 2", "screening.levels");
}

std::string to_string(MuStarMode mode) {
  return mode == MuStarMode::Independent ? "independent" : "dependent";
}

std::vector<Trajectory> morris_trajectories(const MorrisDesign& design, std::size_t d, const RandomStream& stream) {
  design.validate();
  if (d == 0) throw std::invalid_argument("morris_trajectories: d must be > 0");
  const std::size_t p = design.levels;
  const std::size_t jump = p / 2;
  const double h = 1.0 / static_cast<double>(p - 1);
  std::vector<Trajectory> out;
  out.reserve(design.trajectories);
  for (std::size_t r = 0; r < design.trajectories; ++r) {
    RandomStream s = stream.child(r);
    std::vector<std::size_t> level(d);
    for (auto& l : level) l = s.below(p);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = d; i > 1; --i) std::swap(order[i - 1], order[s.below(i)]);
    Trajectory t{PointSet(d + 1, d), order};
    for (std::size_t j = 0; j < d; ++j) t.points(0, j) = level[j] * h;
    for (std::size_t step = 0; step < d; ++step) {
      const std::size_t j = order[step];
      level[j] = level[j] + jump <= p - 1 ? level[j] + jump : level[j] - jump;
      for (std::size_t k = 0; k < d; ++k) t.points(step + 1, k) = level[k] * h;
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<MuStar> mu_star(Estimator& estimator, const std::vector<Trajectory>& design, const MorrisDesign& params,
                            MuStarMode mode, const KernelSpec& norm) {
  const InputSpace& space = estimator.weight().space();
  const std::size_t d = space.dim();
  const std::size_t R = design.size();
  const std::size_t p = params.levels;
  const double delta = params.delta();
  const std::size_t width = estimator.output_width();
  for (const auto& t : design)
    if (t.points.dim() != d || t.points.size() != d + 1) throw std::invalid_argument("mu_star: design does not match d");

  const auto midpoint = [p](double g) {
    return (g * static_cast<double>(p - 1) + 0.5) / static_cast<double>(p);
  };

  // Weighted marginal of X_j (u = {}, j first) and the conditional model of
  // the rest given X_j.
  std::vector<const DependencyModel*> marginal_dm(d, nullptr), cond_dm(d, nullptr);
  if (mode == MuStarMode::Dependent) {
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<std::size_t> pi{j};
      for (std::size_t k = 0; k < d; ++k)
        if (k != j) pi.push_back(k);
      marginal_dm[j] = &estimator.dependency(SubsetSpec::make(d, {}, pi));
      cond_dm[j] = &estimator.dependency(SubsetSpec::make(d, {j}));
    }
  }
  const RandomStream base = RandomStream(estimator.config().seed, 0).child(kMorrisTag);

  std::vector<double> ee(R * d, 0.0);
  parallel_for(R, estimator.config().threads, [&](std::size_t r) {
    const Trajectory& t = design[r];
    std::vector<double> x(d), x2(d), probs(d), y(width), y2(width), diff(width);
    if (mode == MuStarMode::Independent) {
      auto map = [&](std::size_t row, std::span<double> out) {
        for (std::size_t k = 0; k < d; ++k) {
          const double g = t.points(row, k);
          // Unbounded margins cannot take the 0 and 1 levels.
          probs[k] = space.marginal(k).unbounded() ? midpoint(g) : g;
        }
        space.to_inputs(probs, out);
      };
      map(0, x);
      estimator.outputs(x, y);
      for (std::size_t s = 0; s < d; ++s) {
        map(s + 1, x2);
        estimator.outputs(x2, y2);
        for (std::size_t l = 0; l < width; ++l) diff[l] = y2[l] - y[l];
        ee[r * d + t.moved[s]] = norm.effect_norm(diff) / delta;
        y.swap(y2);
      }
      return;
    }
    for (std::size_t s = 0; s < d; ++s) {
      const std::size_t j = t.moved[s];
      const RandomStream st = base.child({r, s});
      std::vector<double> uniforms;
      for (std::size_t k = 0; k < d; ++k)
        if (k != j) uniforms.push_back(midpoint(t.points(s, k)));
      auto point = [&](double g, std::span<double> out) {
        RandomStream q = st;
        std::fill(out.begin(), out.end(), 0.0);
        const double z = marginal_dm[j]->conditional_quantile(0, out, {}, midpoint(g), q);
        out[j] = space.marginal(j).quantile(z);
        RandomStream c = st.child(1);
        cond_dm[j]->complete(out, uniforms, c);
      };
      point(t.points(s, j), x);
      point(t.points(s + 1, j), x2);
      estimator.outputs(x, y);
      estimator.outputs(x2, y2);
      for (std::size_t l = 0; l < width; ++l) y[l] = y2[l] - y[l];
      ee[r * d + j] = norm.effect_norm(y) / delta;
    }
  });

  std::vector<MuStar> out(d);
  std::vector<double> col(R);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t r = 0; r < R; ++r) col[r] = ee[r * d + j];
    out[j].value = ordered_mean(col);
    out[j].std_error = R > 1 ? std::sqrt(sample_variance(col) / static_cast<double>(R)) : 0.0;
  }
  return out;
}

std::vector<std::size_t> ScreeningReport::important() const {
  std::vector<std::size_t> s;
  for (const auto& e : entries)
    if (e.important) s.push_back(e.input);
  return s;
}

std::string ScreeningReport::note() const {
  std::string n = "important iff sqrt(upsilon) >= " + fmt(threshold) +
                  "; upsilon bounds the total index, so inputs below the threshold are unimportant by total index too";
  if (mode == MuStarMode::Dependent)
    n += "; mu_star: dependent elementary effects, complement re-derived through the dependency model after each step";
  else
    n += "; mu_star: classical elementary effects";
  return n;
}

std::string ScreeningReport::csv() const {
  std::string s = "input,sqrt_upsilon,mu_star,rank,important\n";
  for (const auto& e : entries)
    s += "X" + std::to_string(e.input + 1) + "," + fmt(e.upsilon.sqrt_value) + "," + fmt(e.mu_star.value) + "," +
         std::to_string(e.rank) + "," + (e.important ? "true" : "false") + "\n";
  return s;
}

ScreeningReport screen_rank(Estimator& estimator, const KernelSpec& kernel, const ScreeningConfig& config) {
  config.design.validate();
  if (!(config.threshold >= 0.0) || !std::isfinite(config.threshold))
    throw ConfigError("threshold must be a finite number >= 0", "screening.threshold");
  const EffectiveWeight& ew = estimator.weight();
  const std::size_t d = ew.space().dim();
  ScreeningReport rep;
  rep.kernel = kernel.name();
  rep.threshold = config.threshold;
  rep.mode = config.mode.value_or(ew.is_constant() ? MuStarMode::Independent : MuStarMode::Dependent);
  const std::uint64_t before = estimator.model().meter().count();

  for (std::size_t j = 0; j < d; ++j) {
    ScreeningEntry e;
    e.input = j;
    e.upsilon = estimator.upsilon(SubsetSpec::make(d, {j}), kernel);
    rep.entries.push_back(std::move(e));
  }
  const auto design = morris_trajectories(config.design, d, RandomStream(estimator.config().seed, 0).child({kMorrisTag, 1}));
  const auto mu = mu_star(estimator, design, config.design, rep.mode, kernel);
  for (std::size_t j = 0; j < d; ++j) rep.entries[j].mu_star = mu[j];

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rep.entries[a].upsilon.sqrt_value > rep.entries[b].upsilon.sqrt_value;
  });
  for (std::size_t r = 0; r < d; ++r) rep.entries[order[r]].rank = r + 1;
  for (auto& e : rep.entries) e.important = e.upsilon.sqrt_value >= config.threshold;
  rep.evaluations = estimator.model().meter().count() - before;
  return rep;
}

std::vector<std::size_t> important_set(const std::vector<IndexEstimate>& estimates, double threshold) {
  std::vector<std::size_t> s;
  for (const auto& e : estimates)
    if (e.sqrt_value >= threshold) s.insert(s.end(), e.u.begin(), e.u.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace kbsa
