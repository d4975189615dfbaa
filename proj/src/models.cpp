#include "kbsa/models.hpp"

#include <cmath>
#include <cstring>

#include "kbsa/errors.hpp"

namespace kbsa {

namespace {

std::string point_string(std::span<const double> x) {
  std::string s = "(";
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j) s += ", ";
    s += std::to_string(x[j]);
  }
  return s + ")";
}

}  // namespace

void Model::check_output(std::span<const double> x, std::span<const double> y) const {
  for (double v : y)
    if (!std::isfinite(v)) throw ModelEvaluationError(name() + ": non-finite output at " + point_string(x));
}

void Model::evaluate(std::span<const double> x, std::optional<double> theta, std::span<double> y) const {
  if (x.size() != input_dim())
    throw ModelEvaluationError(name() + ": expected " + std::to_string(input_dim()) + " inputs, got " +
                               std::to_string(x.size()));
  if (y.size() != output_dim()) throw ModelEvaluationError(name() + ": output buffer has wrong size");
  if (needs_theta() && !theta) throw ModelEvaluationError(name() + ": theta required");
  compute(x, theta, y);
  meter_.add(1);
  check_output(x, y);
}

std::vector<double> Model::evaluate(std::span<const double> x, std::optional<double> theta) const {
  std::vector<double> y(output_dim());
  evaluate(x, theta, y);
  return y;
}

void Model::evaluate_batch(const PointSet& xs, std::optional<double> theta, std::span<double> ys) const {
  const std::size_t n_out = output_dim();
  if (ys.size() != xs.size() * n_out) throw ModelEvaluationError(name() + ": batch output buffer has wrong size");
  for (std::size_t i = 0; i < xs.size(); ++i) evaluate(xs.row(i), theta, ys.subspan(i * n_out, n_out));
}

void QuadraticSum::compute(std::span<const double> x, std::optional<double>, std::span<double> y) const {
  double s = 0.0;
  for (double v : x) s += v * v;
  y[0] = s;
}

const GSobol4::Matrix& GSobol4::paper_matrix() {
  static const Matrix a = {{
      {0, 0, 6.52, 6.52, 6.52, 6.52, 6.52, 6.52, 6.52, 6.52},
      {0, 1, 4.5, 9, 99, 99, 99, 99, 99, 99},
      {1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
      {50, 50, 50, 50, 50, 50, 50, 50, 50, 50},
  }};
  return a;
}

GSobol4::GSobol4() : a_(paper_matrix()) {}

void GSobol4::compute(std::span<const double> x, std::optional<double>, std::span<double> y) const {
  for (std::size_t l = 0; l < kRows; ++l) {
    double p = 1.0;
    for (std::size_t j = 0; j < kDim; ++j) {
      const double a = a_[l][j];
      p *= (std::fabs(4.0 * x[j] - 2.0) + a) / (1.0 + a);
    }
    y[l] = p;
  }
}

GFunction::GFunction(std::vector<double> a) : a_(std::move(a)) {
  if (a_.empty()) throw ConfigError("gfunction needs at least one coefficient", "model.a");
  for (double v : a_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("gfunction coefficients must be finite and >= 0", "model.a");
}

void GFunction::compute(std::span<const double> x, std::optional<double>, std::span<double> y) const {
  double p = 1.0;
  for (std::size_t j = 0; j < a_.size(); ++j) p *= (std::fabs(4.0 * x[j] - 2.0) + a_[j]) / (1.0 + a_[j]);
  y[0] = p;
}

std::vector<double> GFunction::sobol_first_order() const {
  std::vector<double> v(a_.size());
  double prod = 1.0;
  for (std::size_t j = 0; j < a_.size(); ++j) {
    v[j] = (1.0 / 3.0) / ((1.0 + a_[j]) * (1.0 + a_[j]));
    prod *= 1.0 + v[j];
  }
  for (double& vj : v) vj /= prod - 1.0;
  return v;
}

std::vector<double> GFunction::sobol_total() const {
  std::vector<double> v(a_.size());
  double prod = 1.0;
  for (std::size_t j = 0; j < a_.size(); ++j) {
    v[j] = (1.0 / 3.0) / ((1.0 + a_[j]) * (1.0 + a_[j]));
    prod *= 1.0 + v[j];
  }
  std::vector<double> t(a_.size());
  for (std::size_t j = 0; j < a_.size(); ++j) t[j] = v[j] * (prod / (1.0 + v[j])) / (prod - 1.0);
  return t;
}

void Linear::compute(std::span<const double> x, std::optional<double>, std::span<double> y) const {
  double s = b_;
  for (std::size_t j = 0; j < a_.size(); ++j) s += a_[j] * x[j];
  y[0] = s;
}

void ThetaToy::compute(std::span<const double> x, std::optional<double> theta, std::span<double> y) const {
  y[0] = *theta * x[0] + x[1];
}

void ThetaIgnoring::compute(std::span<const double> x, std::optional<double>, std::span<double> y) const {
  inner_->evaluate(x, std::nullopt, y);
}

std::uint64_t matrix_checksum(const GSobol4::Matrix& a) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& row : a)
    for (double v : row) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
      }
    }
  return h;
}

}  // namespace kbsa
