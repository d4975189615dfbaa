#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbsa/marginals.hpp"

namespace kbsa {

// Counts model evaluations. Phases are measured by differencing snapshots.
class EvaluationMeter {
 public:
  void add(std::uint64_t n) { count_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
  void reset() { count_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual bool needs_theta() const { return false; }
  virtual std::string name() const = 0;

  // Checked, metered evaluation. Throws ModelEvaluationError on dimension
  // mismatch, missing theta, or non-finite output.
  void evaluate(std::span<const double> x, std::optional<double> theta, std::span<double> y) const;
  std::vector<double> evaluate(std::span<const double> x, std::optional<double> theta = std::nullopt) const;

  // Row i of `xs` -> ys[i*N .. i*N+N). Order preserving.
  virtual void evaluate_batch(const PointSet& xs, std::optional<double> theta, std::span<double> ys) const;

  EvaluationMeter& meter() const { return meter_; }

 protected:
  virtual void compute(std::span<const double> x, std::optional<double> theta, std::span<double> y) const = 0;
  void check_output(std::span<const double> x, std::span<const double> y) const;

 private:
  mutable EvaluationMeter meter_;
};

using ModelPtr = std::shared_ptr<const Model>;

// M(x) = sum x_j^2
class QuadraticSum final : public Model {
 public:
  explicit QuadraticSum(std::size_t d = 3) : d_(d) {}
  std::size_t input_dim() const override { return d_; }
  std::size_t output_dim() const override { return 1; }
  std::string name() const override { return "quadratic"; }

 protected:
  void compute(std::span<const double> x, std::optional<double>, std::span<double> y) const override;

 private:
  std::size_t d_;
};

// y_l = prod_j (|4 x_j - 2| + A[l][j]) / (1 + A[l][j])
class GSobol4 final : public Model {
 public:
  static constexpr std::size_t kRows = 4;
  static constexpr std::size_t kDim = 10;
  using Matrix = std::array<std::array<double, kDim>, kRows>;

  GSobol4();
  explicit GSobol4(const Matrix& a) : a_(a) {}
  static const Matrix& paper_matrix();

  std::size_t input_dim() const override { return kDim; }
  std::size_t output_dim() const override { return kRows; }
  std::string name() const override { return "gsobol4"; }
  const Matrix& matrix() const { return a_; }

 protected:
  void compute(std::span<const double> x, std::optional<double>, std::span<double> y) const override;

 private:
  Matrix a_;
};

// Single-output g-function with coefficients a.
class GFunction final : public Model {
 public:
  explicit GFunction(std::vector<double> a);
  std::size_t input_dim() const override { return a_.size(); }
  std::size_t output_dim() const override { return 1; }
  std::string name() const override { return "gfunction"; }
  const std::vector<double>& coefficients() const { return a_; }

  // Closed-form first-order and total Sobol indices under independent
  // Uniform(0,1) inputs.
  std::vector<double> sobol_first_order() const;
  std::vector<double> sobol_total() const;

 protected:
  void compute(std::span<const double> x, std::optional<double>, std::span<double> y) const override;

 private:
  std::vector<double> a_;
};

// y = intercept + sum a_j x_j. Zero coefficients give the constant model.
class Linear final : public Model {
 public:
  Linear(std::vector<double> coefficients, double intercept = 0.0)
      : a_(std::move(coefficients)), b_(intercept) {}
  std::size_t input_dim() const override { return a_.size(); }
  std::size_t output_dim() const override { return 1; }
  std::string name() const override { return "linear"; }

 protected:
  void compute(std::span<const double> x, std::optional<double>, std::span<double> y) const override;

 private:
  std::vector<double> a_;
  double b_;
};

// y = theta * x_1 + x_2
class ThetaToy final : public Model {
 public:
  std::size_t input_dim() const override { return 2; }
  std::size_t output_dim() const override { return 1; }
  bool needs_theta() const override { return true; }
  std::string name() const override { return "theta_toy"; }

 protected:
  void compute(std::span<const double> x, std::optional<double> theta, std::span<double> y) const override;
};

// Wraps another model and ignores theta; handy for "constant in theta" checks.
class ThetaIgnoring final : public Model {
 public:
  explicit ThetaIgnoring(ModelPtr inner) : inner_(std::move(inner)) {}
  std::size_t input_dim() const override { return inner_->input_dim(); }
  std::size_t output_dim() const override { return inner_->output_dim(); }
  bool needs_theta() const override { return true; }
  std::string name() const override { return inner_->name(); }

 protected:
  void compute(std::span<const double> x, std::optional<double>, std::span<double> y) const override;

 private:
  ModelPtr inner_;
};

// FNV-1a over the bytes of the embedded table.
std::uint64_t matrix_checksum(const GSobol4::Matrix& a);

}  // namespace kbsa
