#include "kbsa/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "kbsa/errors.hpp"

namespace kbsa {

KernelSpec KernelSpec::lp(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("lp kernel needs p >= 1");
  return {KernelKind::Lp, p};
}

KernelSpec KernelSpec::owen(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("owen kernel needs p >= 1");
  return {KernelKind::OwenLp, p};
}

KernelSpec KernelSpec::parse(const std::string& name, double p) {
  if (name == "l1") return l1();
  if (name == "l2") return l2();
  if (name == "quadratic") return quadratic();
  if (name == "lp") return lp(p);
  if (name == "owen") return owen(p);
  // Suffixed forms produced by name(), e.g. "lp3", "owen2".
  for (const std::string prefix : {"lp", "owen"}) {
    if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
      const std::string rest = name.substr(prefix.size());
      char* end = nullptr;
      const double q = std::strtod(rest.c_str(), &end);
      if (end && *end == '\0') return prefix == "lp" ? lp(q) : owen(q);
    }
  }
  throw ConfigError("unknown kernel '" + name + "'");
}

double KernelSpec::degree() const {
  switch (kind_) {
    case KernelKind::L1: return 2.0;
    case KernelKind::Lp: return 2.0 * p_;
    case KernelKind::L2:
    case KernelKind::Quadratic: return 4.0;
    case KernelKind::OwenLp: return 4.0 * p_;
  }
  return 0.0;
}

// Scalar feature of the product kernels.
double KernelSpec::feature(std::span<const double> y) const {
  switch (kind_) {
    case KernelKind::L1: {
      double s = 0.0;
      for (double v : y) s += std::fabs(v);
      return s;
    }
    case KernelKind::Lp: {
      double s = 0.0;
      for (double v : y) s += std::pow(std::fabs(v), p_);
      return s;
    }
    case KernelKind::L2: {
      double s = 0.0;
      for (double v : y) s += v * v;
      return s;
    }
    case KernelKind::OwenLp: {
      double s = 0.0;
      for (double v : y) s += v * v;
      return p_ == 1.0 ? s : std::pow(s, p_);
    }
    case KernelKind::Quadratic: break;
  }
  return 0.0;
}

double KernelSpec::eval(std::span<const double> y, std::span<const double> y2) const {
  if (y.size() != y2.size() || y.empty())
    throw std::invalid_argument("kernel: dimension mismatch (" + std::to_string(y.size()) + " vs " +
                                std::to_string(y2.size()) + ")");
  if (kind_ == KernelKind::Quadratic) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * y2[i];
    return s * s;
  }
  return feature(y) * feature(y2);
}

void KernelSpec::features(std::span<const double> y, std::span<double> out) const {
  if (out.size() != feature_dim(y.size())) throw std::invalid_argument("kernel features: bad output size");
  if (kind_ != KernelKind::Quadratic) {
    out[0] = feature(y);
    return;
  }
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) out[i * y.size() + j] = y[i] * y[j];
}

double KernelSpec::effect_norm(std::span<const double> y) const {
  switch (kind_) {
    case KernelKind::L1: return feature(y);
    case KernelKind::Lp: return std::pow(feature(y), 1.0 / p_);
    default: {
      double s = 0.0;
      for (double v : y) s += v * v;
      return std::sqrt(s);
    }
  }
}

std::string KernelSpec::name() const {
  std::ostringstream os;
  switch (kind_) {
    case KernelKind::L1: return "l1";
    case KernelKind::L2: return "l2";
    case KernelKind::Quadratic: return "quadratic";
    case KernelKind::Lp: os << "lp" << p_; break;
    case KernelKind::OwenLp: os << "owen" << p_; break;
  }
  return os.str();
}

double gram_psd_check(const KernelSpec& k, const std::vector<std::vector<double>>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 2 || n > 200) throw std::invalid_argument("gram_psd_check: need 2..200 points");
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = k.eval(points[i], points[j]);
      g(i, j) = v;
      g(j, i) = v;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace kbsa
