#include "kbsa/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kbsa/errors.hpp"
#include "kbsa/parallel.hpp"

namespace kbsa {

namespace {

std::string describe(std::span<const double> x) {
  std::string s = "(";
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j) s += ", ";
    s += std::to_string(x[j]);
  }
  return s + ")";
}

void require_model(const ModelPtr& model, WeightSource source, const char* kind) {
  if (source == WeightSource::Outputs && !model)
    throw ConfigError(std::string(kind) + " weight on outputs needs a model", "weight");
}

}  // namespace

bool Box::contains(std::span<const double> v) const {
  for (std::size_t l = 0; l < lower.size() && l < v.size(); ++l)
    if (v[l] < lower[l]) return false;
  for (std::size_t l = 0; l < upper.size() && l < v.size(); ++l)
    if (v[l] > upper[l]) return false;
  return true;
}

double Logistic::operator()(double s) const { return 1.0 / (1.0 + std::exp(-slope * (s - offset))); }

WeightFunction WeightFunction::constant(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError("constant weight must be finite and > 0", "weight.value");
  WeightFunction w;
  w.kind_ = WeightKind::Constant;
  w.scale_ = value;
  return w;
}

WeightFunction WeightFunction::indicator_threshold(Box box, ModelPtr model, WeightSource source) {
  require_model(model, source, "indicator_threshold");
  WeightFunction w;
  w.kind_ = WeightKind::IndicatorThreshold;
  w.box_ = std::move(box);
  w.model_ = std::move(model);
  w.source_ = source;
  return w;
}

WeightFunction WeightFunction::polynomial(std::vector<double> alpha) {
  if (alpha.empty()) throw ConfigError("polynomial weight needs exponents", "weight.alpha");
  for (double a : alpha)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("polynomial exponents must be finite and >= 0", "weight.alpha");
  WeightFunction w;
  w.kind_ = WeightKind::Polynomial;
  w.alpha_ = std::move(alpha);
  return w;
}

WeightFunction WeightFunction::smooth_membership(ScoreFn score, Logistic m, ModelPtr model, WeightSource source) {
  require_model(model, source, "smooth_membership");
  if (!score) throw ConfigError("smooth_membership needs a score", "weight.score");
  WeightFunction w;
  w.kind_ = WeightKind::SmoothMembership;
  w.score_ = std::move(score);
  w.logistic_ = m;
  w.model_ = std::move(model);
  w.source_ = source;
  return w;
}

WeightFunction WeightFunction::composite(ScoreFn score, Logistic m, Box box, ModelPtr model, WeightSource source) {
  WeightFunction w = smooth_membership(std::move(score), m, std::move(model), source);
  w.kind_ = WeightKind::Composite;
  w.box_ = std::move(box);
  return w;
}

WeightFunction WeightFunction::functional_loss(LossFn loss, Reduction reduction, std::vector<double> theta_grid,
                                               Box box, ModelPtr model) {
  if (!model) throw ConfigError("functional_loss needs a model", "weight");
  if (!loss) throw ConfigError("functional_loss needs a loss", "weight.loss");
  if (theta_grid.empty()) throw ConfigError("functional_loss needs a theta grid", "weight.theta");
  WeightFunction w;
  w.kind_ = WeightKind::FunctionalLoss;
  w.loss_ = std::move(loss);
  w.reduction_ = reduction;
  w.theta_grid_ = std::move(theta_grid);
  w.box_ = std::move(box);
  w.model_ = std::move(model);
  return w;
}

WeightFunction WeightFunction::custom(std::string name, std::function<double(std::span<const double>)> fn) {
  if (!fn) throw ConfigError("custom weight needs a callable", "weight");
  WeightFunction w;
  w.kind_ = WeightKind::Custom;
  w.custom_name_ = std::move(name);
  w.custom_ = std::move(fn);
  return w;
}

std::string WeightFunction::name() const {
  switch (kind_) {
    case WeightKind::Constant: return "constant";
    case WeightKind::IndicatorThreshold: return "indicator_threshold";
    case WeightKind::Polynomial: return "polynomial";
    case WeightKind::SmoothMembership: return "smooth_membership";
    case WeightKind::Composite: return "composite";
    case WeightKind::FunctionalLoss: return "functional_loss";
    case WeightKind::Custom: return custom_name_;
  }
  return "";
}

WeightFunction WeightFunction::scaled(double lambda) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("weight scale must be finite and > 0");
  WeightFunction w = *this;
  w.scale_ = scale_ * lambda;
  return w;
}

bool WeightFunction::is_constant() const {
  if (kind_ == WeightKind::Constant) return true;
  if (kind_ == WeightKind::Polynomial)
    return std::all_of(alpha_.begin(), alpha_.end(), [](double a) { return a == 0.0; });
  return false;
}

double WeightFunction::factor(std::size_t j, double xj) const {
  if (kind_ == WeightKind::Polynomial) return alpha_[j] == 0.0 ? 1.0 : std::pow(xj, alpha_[j]);
  return 1.0;
}

double WeightFunction::raw(std::span<const double> x) const {
  double small[16];
  std::vector<double> heap;
  auto source_vector = [&]() -> std::span<const double> {
    if (source_ == WeightSource::Inputs) return x;
    const std::size_t n = model_->output_dim();
    std::span<double> out(small, n);
    if (n > 16) {
      heap.resize(n);
      out = heap;
    }
    model_->evaluate(x, std::nullopt, out);
    return out;
  };
  switch (kind_) {
    case WeightKind::Constant: return 1.0;
    case WeightKind::IndicatorThreshold: return box_.contains(source_vector()) ? 1.0 : 0.0;
    case WeightKind::Polynomial: {
      if (x.size() != alpha_.size())
        throw ModelEvaluationError("polynomial weight: expected " + std::to_string(alpha_.size()) + " inputs");
      double p = 1.0;
      for (std::size_t j = 0; j < alpha_.size(); ++j)
        if (alpha_[j] != 0.0) p *= std::pow(x[j], alpha_[j]);
      return p;
    }
    case WeightKind::SmoothMembership: return logistic_(score_(source_vector()));
    case WeightKind::Composite: {
      auto v = source_vector();
      return box_.contains(v) ? logistic_(score_(v)) : 0.0;
    }
    case WeightKind::FunctionalLoss: {
      std::vector<double> losses;
      losses.reserve(theta_grid_.size());
      std::vector<double> y(model_->output_dim());
      for (double theta : theta_grid_) {
        model_->evaluate(x, theta, y);
        if (!box_.contains(y)) return 0.0;
        losses.push_back(loss_(y, theta));
      }
      switch (reduction_) {
        case Reduction::Mean: return ordered_mean(losses);
        case Reduction::Max: return *std::max_element(losses.begin(), losses.end());
        case Reduction::Min: return *std::min_element(losses.begin(), losses.end());
      }
      return 0.0;
    }
    case WeightKind::Custom: return custom_(x);
  }
  return 0.0;
}

double WeightFunction::unscaled(std::span<const double> x) const {
  const double v = raw(x);
  if (!(v >= 0.0) || !std::isfinite(v))
    throw ModelEvaluationError("weight " + name() + " is negative or not finite at " + describe(x));
  return v;
}

double WeightFunction::operator()(std::span<const double> x) const {
  const double v = unscaled(x);
  return scale_ == 1.0 ? v : scale_ * v;
}

EffectiveWeight::EffectiveWeight(WeightFunction weight, std::shared_ptr<const InputSpace> space, std::uint64_t pilot_seed)
    : weight_(std::move(weight)), space_(std::move(space)) {
  if (!space_) throw ConfigError("effective weight needs an input space");
  if (weight_.kind() == WeightKind::Polynomial && weight_.alpha().size() != space_->dim())
    throw ConfigError("polynomial exponents must match the input dimension", "weight.alpha");
  if (weight_.model() && weight_.model()->input_dim() != space_->dim())
    throw ConfigError("weight model dimension does not match the inputs", "weight");
  if (is_constant()) return;

  constexpr std::size_t kPilot = 1000;
  RandomStream stream(pilot_seed, 0);
  std::vector<double> x(space_->dim());
  NeumaierSum sum;
  for (std::size_t i = 0; i < kPilot; ++i) {
    space_->draw_point(stream, x);
    sum.add((*this)(x));
  }
  const double mean = sum.value() / kPilot;
  if (!std::isfinite(mean)) throw DegenerateWeightError("weight pilot mean is not finite");
  if (mean == 0.0) throw DegenerateWeightError("weight is zero on all pilot points; the behavior looks empty");
}

double EffectiveWeight::unscaled(std::span<const double> x) const {
  const double w = weight_.unscaled(x);
  if (space_->independent() || w == 0.0) return w;
  return w * space_->copula_at(x);
}

double EffectiveWeight::operator()(std::span<const double> x) const {
  const double w = unscaled(x);
  return weight_.scale() == 1.0 ? w : weight_.scale() * w;
}

EffectiveWeight EffectiveWeight::scaled(double lambda) const {
  EffectiveWeight e = *this;
  e.weight_ = weight_.scaled(lambda);
  return e;
}

MeanEstimate normalizing_constant(const EffectiveWeight& ew, std::size_t n, const RandomStream& stream) {
  if (n < 2) throw ConfigError("normalizing_constant needs n >= 2");
  std::vector<double> w(n);
  std::vector<double> x(ew.space().dim());
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream s = stream.child(i);
    ew.space().draw_point(s, x);
    w[i] = ew.unscaled(x);
  }
  if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; }))
    throw DegenerateWeightError("all " + std::to_string(n) + " weight evaluations are 0");
  // Scale applied last so that normalizing_constant(l * w) == l * normalizing_constant(w).
  const double scale = ew.weight().scale();
  return {scale * ordered_mean(w), scale * std::sqrt(sample_variance(w) / n)};
}

}  // namespace kbsa
