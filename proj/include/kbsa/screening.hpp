#pragma once

#include <string>
#include <vector>

#include "kbsa/estimators.hpp"

namespace kbsa {

struct MorrisDesign {
  std::size_t trajectories = 50;  // R
  std::size_t levels = 8;         // p, even

  // p / (2 (p - 1))
  double delta() const { return static_cast<double>(levels) / (2.0 * static_cast<double>(levels - 1)); }
  void validate() const;
};

// d+1 grid points; step s moves coordinate moved[s] by +/- delta.
struct Trajectory {
  PointSet points;
  std::vector<std::size_t> moved;
};

std::vector<Trajectory> morris_trajectories(const MorrisDesign& design, std::size_t d, const RandomStream& stream);

enum class MuStarMode { Independent, Dependent };
std::string to_string(MuStarMode mode);

struct MuStar {
  double value = 0.0;
  double std_error = 0.0;
};

// Mean absolute elementary effect of input j, |M(after) - M(before)| / delta,
// with vector outputs reduced by `norm`.
//
// Independent: grid level g maps to X_j = F_j^{-1}(g); the weight is ignored.
// Dependent: level g becomes the probability (g (p-1) + 1/2) / p; X_j comes
// from the weighted marginal of X^w_j and the other coordinates are
// re-derived through the dependency model of u = {j}, holding the
// trajectory's uniforms fixed, before and after every step of j.
std::vector<MuStar> mu_star(Estimator& estimator, const std::vector<Trajectory>& design, const MorrisDesign& params,
                            MuStarMode mode, const KernelSpec& norm);

struct ScreeningConfig {
  MorrisDesign design;
  double threshold = 0.2;
  std::optional<MuStarMode> mode;  // default: Independent only for constant weights on independent inputs
};

struct ScreeningEntry {
  std::size_t input = 0;  // 0-based
  IndexEstimate upsilon;
  MuStar mu_star;
  std::size_t rank = 0;  // 1 = largest sqrt(upsilon)
  bool important = false;
};

struct ScreeningReport {
  std::string kernel;
  double threshold = 0.0;
  MuStarMode mode = MuStarMode::Independent;
  std::vector<ScreeningEntry> entries;  // input order
  std::uint64_t evaluations = 0;

  std::vector<std::size_t> important() const;
  // Metadata line describing the decision rule and the mu* construction.
  std::string note() const;
  // input,sqrt_upsilon,mu_star,rank,important
  std::string csv() const;
};

ScreeningReport screen_rank(Estimator& estimator, const KernelSpec& kernel, const ScreeningConfig& config);

// Inputs whose sqrt(index) >= threshold.
std::vector<std::size_t> important_set(const std::vector<IndexEstimate>& estimates, double threshold);

}  // namespace kbsa
