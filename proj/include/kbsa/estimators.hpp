#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbsa/depmodel.hpp"
#include "kbsa/kernels.hpp"
#include "kbsa/models.hpp"
#include "kbsa/testcases.hpp"
#include "kbsa/weights.hpp"

namespace kbsa {

enum class IndexKind { FirstOrder, Total, Upsilon };
std::string to_string(IndexKind kind);

// How outer points X^w are produced. Target draws them from F^w directly
// (every weight 1); Reweighted draws Y ~ F_ind and carries w_e(Y).
enum class OuterSampling { Target, Reweighted };

enum class SfKind { FirstOrder, Total, Centered, Star };

// Quadrature over theta for functional outputs.
struct ThetaGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  static ThetaGrid single(double theta) { return {{theta}, {1.0}}; }
  // n-point composite trapezoid on [a, b].
  static ThetaGrid trapezoid(double a, double b, std::size_t n);
  void validate() const;
};

struct EstimatorConfig {
  std::size_t m1 = 500;
  std::size_t m = 5000;
  std::size_t M = 50000;
  std::uint64_t seed = 0;
  OuterSampling outer_sampling = OuterSampling::Target;
  // Each A_i is paired with B_{(i+s) mod m} for s < pair_shifts; 1 gives
  // the plain paired estimator.
  std::size_t pair_shifts = 64;
  // Half-sample jackknife on the inner means of first-order and total
  // summands; removes the O(1/m1) bias of the plug-in estimator.
  bool jackknife = true;
  double ci_level = 0.95;
  std::optional<ThetaGrid> theta_grid;
  unsigned threads = 1;
  DependencyOptions dependency;

  void validate() const;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// estimate -/+ z_{1-alpha/2} * std_error.
ConfidenceInterval asymptotic_ci(double estimate, double std_error, double level);
// Paired form: estimate = mean(summands) / mu_c, sigma = sd(summands); m >= 30.
ConfidenceInterval asymptotic_ci(std::span<const double> summands, double mu_c, double level);

struct IndexEstimate {
  IndexKind kind = IndexKind::FirstOrder;
  std::vector<std::size_t> u;  // 0-based
  std::string kernel;
  double value = 0.0;
  double sqrt_value = 0.0;
  double std_error = 0.0;
  double sqrt_std_error = 0.0;  // delta method
  ConfidenceInterval ci;
  double level = 0.95;
  std::size_t m1 = 0, m = 0, M = 0;
  std::uint64_t seed = 0;
  std::uint64_t evaluations = 0;
  bool clamped = false;             // negative estimate reset to 0
  bool extrapolated_sigma = false;  // CI from the summands' own variance (upsilon)

  std::vector<std::string> flags() const;
};

struct DenominatorEstimate {
  std::string kernel;
  double value = 0.0;
  double std_error = 0.0;
  std::vector<double> mean_gradient;  // d value / d overall mean
};

// Values of a sensitivity functional on n outer points.
struct FunctionalPanel {
  PointSet points;
  std::vector<double> values;  // n x output_width
  std::vector<double> weights;
};

// Kernel-based index estimation for one (model, weight) pair. Denominators
// are computed once per kernel and shared by every subset.
class Estimator {
 public:
  Estimator(ModelPtr model, std::shared_ptr<const EffectiveWeight> weight, AnalyticProvider analytic,
            EstimatorConfig config);
  Estimator(const Problem& problem, EstimatorConfig config)
      : Estimator(problem.model, problem.weight, problem.analytic, std::move(config)) {}

  const EstimatorConfig& config() const { return config_; }
  const Model& model() const { return *model_; }
  const EffectiveWeight& weight() const { return *weight_; }
  // N per theta node times the number of nodes.
  std::size_t output_width() const { return width_; }

  DenominatorEstimate denominator(const KernelSpec& k);
  const std::vector<double>& overall_mean();
  double mean_weight();

  IndexEstimate first_order(const SubsetSpec& u, const KernelSpec& k);
  IndexEstimate total(const SubsetSpec& u, const KernelSpec& k);
  IndexEstimate upsilon(const SubsetSpec& u, const KernelSpec& k);
  // One shared panel per kind; results ordered kind-major, then kernel.
  std::vector<IndexEstimate> estimate(const SubsetSpec& u, const std::vector<KernelSpec>& kernels,
                                      const std::vector<IndexKind>& kinds);

  // mu(x_u) = (1/m1) sum_t M(x_u, r(x_u, U_t)). A non-empty `halves`
  // (2 x width) receives the means over t < m1/2 and t >= m1/2.
  std::vector<double> inner_mean(const SubsetSpec& u, std::span<const double> x, std::size_t m1,
                                 RandomStream& stream, std::span<double> halves = {});
  // mu(U): mean over X_u of M(X_u, r(X_u, U)), weighted in reweighted mode.
  std::vector<double> mean_given_uniforms(const SubsetSpec& u, std::span<const double> uniforms, std::size_t m1,
                                          RandomStream& stream, std::span<double> halves = {});
  // M(x_u, r(x_u, U)) - M(x2_u, r(x2_u, U)).
  std::vector<double> star(const SubsetSpec& u, std::span<const double> x, std::span<const double> x2,
                           std::span<const double> uniforms, RandomStream& stream);
  FunctionalPanel functionals(const SubsetSpec& u, SfKind which, std::size_t n, std::uint64_t tag);

  const DependencyModel& dependency(const SubsetSpec& u);
  const TargetSampler& target_sampler();

  // Model outputs at every theta node, concatenated (output_width values).
  void outputs(std::span<const double> x, std::span<double> y) const;
  void outputs_batch(const PointSet& xs, std::span<double> ys) const;

 private:
  struct Panel {
    std::vector<double> a, b;    // m x width
    std::vector<double> wa, wb;  // m
    // Same summands from each half of the inner sample, m x 2 x width;
    // empty unless jackknifed.
    std::vector<double> ha, hb;
  };
  struct DenominatorPanel {
    std::vector<double> y;  // 2M x width, centered
    std::vector<double> w;  // 2M
    std::vector<double> mean;
    std::vector<double> mean_cov;  // width x width
    double mean_weight = 1.0;
  };

  double draw_outer(RandomStream& s, std::span<double> x);
  std::vector<double> features(const KernelSpec& k, std::span<const double> rows, std::span<const double> halves,
                               std::size_t block = static_cast<std::size_t>(-1),
                               std::span<const double> shift = {}) const;
  double feature_dot(const KernelSpec& k, const double* fa, const double* fb) const;
  std::vector<double> mean_gradient(const std::function<double(std::size_t, std::span<const double>)>& at);
  const DenominatorPanel& denominator_panel();
  Panel build_panel(const SubsetSpec& u, IndexKind kind);
  void side(const SubsetSpec& u, IndexKind kind, RandomStream s, std::span<double> out, std::span<double> halves,
            double& weight);
  IndexEstimate finish(const SubsetSpec& u, IndexKind kind, const KernelSpec& k, const Panel& panel,
                       std::uint64_t evaluations);

  ModelPtr model_;
  std::shared_ptr<const EffectiveWeight> weight_;
  AnalyticProvider analytic_;
  EstimatorConfig config_;
  std::size_t width_;
  std::vector<std::optional<double>> thetas_;
  std::vector<double> quad_;
  RandomStream base_;
  std::shared_ptr<const ProductTables> tables_;
  std::unique_ptr<TargetSampler> sampler_;
  std::optional<DenominatorPanel> denominator_panel_;
  std::map<std::string, DenominatorEstimate> denominators_;
  std::mutex dependency_mutex_;
  std::map<std::vector<std::size_t>, std::unique_ptr<DependencyModel>> dependencies_;
};

std::uint64_t subset_key(const SubsetSpec& u);

}  // namespace kbsa
