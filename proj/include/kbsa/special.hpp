#pragma once

// Special functions needed by the marginal families.

namespace kbsa::special {

double normal_cdf(double z);
double normal_pdf(double z);

// Inverse standard normal CDF (Wichura AS241, relative error ~1e-16).
// Returns -inf / +inf at 0 / 1.
double normal_quantile(double p);

double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b) by Lentz continued fractions.
double incomplete_beta(double a, double b, double x);

// Inverse of I_x(a, b) in x, safeguarded Newton on a shrinking bracket.
double incomplete_beta_inverse(double a, double b, double p);

}  // namespace kbsa::special
