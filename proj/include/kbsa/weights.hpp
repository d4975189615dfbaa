#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbsa/marginals.hpp"
#include "kbsa/models.hpp"

namespace kbsa {

enum class WeightKind { Constant, IndicatorThreshold, Polynomial, SmoothMembership, Composite, FunctionalLoss, Custom };

// What a score or a box reads: model outputs M(x) or the inputs x.
enum class WeightSource { Outputs, Inputs };

enum class Reduction { Mean, Max, Min };

// Classifier score c(.) on the source vector.
using ScoreFn = std::function<double(std::span<const double>)>;
// Per-theta desirability of an output vector; must be >= 0.
using LossFn = std::function<double(std::span<const double> y, double theta)>;

// Box [lower_l, upper_l] on the source vector; missing bounds are infinite.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
  bool contains(std::span<const double> v) const;
};

struct Logistic {
  double slope = 1.0;
  double offset = 0.0;
  double operator()(double s) const;
};

// Non-negative weight w(x) defining the behavior of interest.
class WeightFunction {
 public:
  static WeightFunction constant(double value = 1.0);
  // 1{v in box}, v = M(x) or x.
  static WeightFunction indicator_threshold(Box box, ModelPtr model, WeightSource source = WeightSource::Outputs);
  // prod_j x_j^alpha_j
  static WeightFunction polynomial(std::vector<double> alpha);
  // logistic(c(v))
  static WeightFunction smooth_membership(ScoreFn score, Logistic m, ModelPtr model,
                                          WeightSource source = WeightSource::Outputs);
  // logistic(c(v)) * 1{v in box}
  static WeightFunction composite(ScoreFn score, Logistic m, Box box, ModelPtr model,
                                  WeightSource source = WeightSource::Outputs);
  // reduce_theta loss(M(x, theta), theta) * 1{M(x, theta) in box for all theta}
  static WeightFunction functional_loss(LossFn loss, Reduction reduction, std::vector<double> theta_grid, Box box,
                                        ModelPtr model);
  static WeightFunction custom(std::string name, std::function<double(std::span<const double>)> fn);

  WeightKind kind() const { return kind_; }
  std::string name() const;

  // Finite, >= 0. Throws ModelEvaluationError (with the point) otherwise.
  double operator()(std::span<const double> x) const;
  // Same, without the scale factor.
  double unscaled(std::span<const double> x) const;

  // lambda * w, same kind.
  WeightFunction scaled(double lambda) const;
  double scale() const { return scale_; }

  // Constant weights and zero-exponent polynomials.
  bool is_constant() const;
  // Weights taking values in {0, scale()}.
  bool is_indicator() const { return kind_ == WeightKind::IndicatorThreshold; }
  // Weights that factor over coordinates: value = scale * prod_j factor(j, x_j).
  bool is_product_form() const { return kind_ == WeightKind::Polynomial || kind_ == WeightKind::Constant; }
  double factor(std::size_t j, double xj) const;

  const std::vector<double>& alpha() const { return alpha_; }
  const Box& box() const { return box_; }
  ModelPtr model() const { return model_; }

 private:
  WeightFunction() = default;
  double raw(std::span<const double> x) const;

  WeightKind kind_ = WeightKind::Constant;
  double scale_ = 1.0;
  std::vector<double> alpha_;
  Box box_;
  ModelPtr model_;
  WeightSource source_ = WeightSource::Outputs;
  ScoreFn score_;
  Logistic logistic_;
  LossFn loss_;
  Reduction reduction_ = Reduction::Mean;
  std::vector<double> theta_grid_;
  std::string custom_name_;
  std::function<double(std::span<const double>)> custom_;
};

struct MeanEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// w_e(x) = w(x) c(F_1(x_1), ..., F_d(x_d)).
class EffectiveWeight {
 public:
  // Runs a 1000-point pilot under F_ind and throws DegenerateWeightError if
  // its mean is zero or not finite.
  EffectiveWeight(WeightFunction weight, std::shared_ptr<const InputSpace> space, std::uint64_t pilot_seed = 0x70696C6F74ull);

  double operator()(std::span<const double> x) const;
  double unscaled(std::span<const double> x) const;

  const WeightFunction& weight() const { return weight_; }
  const InputSpace& space() const { return *space_; }
  std::shared_ptr<const InputSpace> space_ptr() const { return space_; }

  // Constant w_e: constant weight under independence.
  bool is_constant() const { return weight_.is_constant() && space_->independent(); }
  bool is_product_form() const { return weight_.is_product_form() && space_->independent(); }

  // Copy with the raw weight rescaled by lambda.
  EffectiveWeight scaled(double lambda) const;

 private:
  WeightFunction weight_;
  std::shared_ptr<const InputSpace> space_;
};

// Monte Carlo estimate of E[w_e(Y)], Y ~ F_ind, with SE = sd / sqrt(n).
// Throws DegenerateWeightError when all n weights are 0.
MeanEstimate normalizing_constant(const EffectiveWeight& ew, std::size_t n, const RandomStream& stream);

}  // namespace kbsa
