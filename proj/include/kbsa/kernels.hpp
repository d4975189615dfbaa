#pragma once

#include <span>
#include <string>
#include <vector>

namespace kbsa {

enum class KernelKind { L1, Lp, L2, Quadratic, OwenLp };

// Kernels on output vectors with k(y, 0) = 0:
//   L1         |y|_1 |y'|_1
//   Lp(p)      |y|_p^p |y'|_p^p
//   L2         |y|_2^2 |y'|_2^2
//   Quadratic  <y, y'>^2
//   OwenLp(p)  |y|_2^{2p} |y'|_2^{2p}   (|y|^{2p}|y'|^{2p} for scalars)
//
// Any evaluator with k(ly, ly') = l^degree k(y, y') can be plugged into the
// estimators; these five are the ones shipped.
class KernelSpec {
 public:
  static KernelSpec l1() { return {KernelKind::L1, 1.0}; }
  static KernelSpec lp(double p);
  static KernelSpec l2() { return {KernelKind::L2, 2.0}; }
  static KernelSpec quadratic() { return {KernelKind::Quadratic, 2.0}; }
  static KernelSpec owen(double p);

  // Parses "l1", "l2", "quadratic", "lp" / "owen" (with p).
  static KernelSpec parse(const std::string& name, double p = 2.0);

  KernelKind kind() const { return kind_; }
  double p() const { return p_; }
  double degree() const;

  // Throws std::invalid_argument on dimension mismatch or empty input.
  double eval(std::span<const double> y, std::span<const double> y2) const;

  // Feature map with eval(y, y2) = <phi(y), phi(y2)>: a scalar for the
  // product kernels, vec(y y^T) for the quadratic kernel.
  std::size_t feature_dim(std::size_t n) const { return kind_ == KernelKind::Quadratic ? n * n : 1; }
  void features(std::span<const double> y, std::span<double> out) const;

  // Norm used to turn a vector of output differences into a scalar effect:
  // 1-norm for L1, p-norm for Lp, 2-norm otherwise.
  double effect_norm(std::span<const double> y) const;

  // "l1", "l2", "quadratic", "lp3", "owen2"
  std::string name() const;

  bool operator==(const KernelSpec&) const = default;

 private:
  KernelSpec(KernelKind kind, double p) : kind_(kind), p_(p) {}
  double feature(std::span<const double> y) const;

  KernelKind kind_;
  double p_;
};

// Smallest eigenvalue of the Gram matrix [k(y_i, y_j)], 2 <= n <= 200.
double gram_psd_check(const KernelSpec& k, const std::vector<std::vector<double>>& points);

}  // namespace kbsa
