#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kbsa/depmodel.hpp"
#include "kbsa/models.hpp"
#include "kbsa/weights.hpp"

namespace kbsa {

// Everything an analysis needs besides the estimator settings.
struct Problem {
  std::string name;
  std::shared_ptr<const InputSpace> space;
  ModelPtr model;
  std::shared_ptr<const EffectiveWeight> weight;
  AnalyticProvider analytic;  // may be empty
};

// M = X1^2 + X2^2 + X3^2 with X_j ~ Uniform(-sqrt(c), sqrt(c)) and
// w = 1{M <= c}: X^w is uniform on the ball of radius sqrt(c). With
// `analytic`, singleton subsets get the closed-form conditional sampler.
Problem quadratic_ball(double c, bool analytic = true);

// Same model and weight on standard normal inputs (no closed form).
Problem quadratic_gaussian(double c);

// Four-output g-Sobol model on Uniform(0,1)^10 with w = prod x_j^alpha_j.
Problem gsobol(std::vector<double> alpha);

// Single-output g-function on Uniform(0,1)^d with constant weight.
Problem gfunction(std::vector<double> a);

// Constant model on Uniform(0,1)^d with constant weight.
Problem constant_model(std::size_t d, double value = 5.0);

// Closed-form pieces of the ball case, used as oracles.
namespace ball {

// Conditional sampler for u = {j}: fills the two other coordinates.
void complete_singleton(double c, std::size_t j, std::span<double> x, std::span<const double> uniforms);

// E[1{M <= c} | X_j = x_j] under the uniform box.
double conditioning_mass(double c, double xj);

// Quantile of |T| where T has density (2/pi) sqrt(1 - t^2) on [-1, 1];
// its square is Beta(1/2, 3/2).
double half_disk_quantile(double v);

// sqrt-indices on the ball (any j): first-order, total and upsilon for the
// l1 and quadratic kernels.
struct Reference {
  double fo_l1, tot_l1, ups_l1;
  double fo_q, tot_q, ups_q;
};
Reference reference();

}  // namespace ball

// Parameters of the g-Sobol tables.
std::vector<double> gsobol_alpha_zero();
std::vector<double> gsobol_alpha_table2();

}  // namespace kbsa
