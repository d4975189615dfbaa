#pragma once

#include <array>
#include <string>
#include <vector>

#include "kbsa/estimators.hpp"

namespace kbsa {

struct Check {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;

  bool passed() const;
  std::size_t failures() const;
  std::string json() const;
  // One line per check.
  std::string text() const;
};

// Published sqrt-indices of the g-Sobol study, per input.
struct PaperTable {
  std::array<double, 10> fo_l1, fo_q, tot_l1, tot_q, ups_l1, ups_q;
};
const PaperTable& paper_table1();  // alpha = 0
const PaperTable& paper_table2();  // alpha = (20,20,10,10,10,10,10,1,1,1)

// Coefficients of the single-output g-function used for the Sobol checks.
std::vector<double> gfunction_validation_a();

// Runs every (kind, kernel) for each subset, kind-major within a subset.
std::vector<IndexEstimate> estimate_all(Estimator& est, const std::vector<SubsetSpec>& subsets,
                                        const std::vector<KernelSpec>& kernels, const std::vector<IndexKind>& kinds);

// Finds the estimate for (kind, kernel name, subset).
const IndexEstimate& find_estimate(const std::vector<IndexEstimate>& all, IndexKind kind, const std::string& kernel,
                                   const std::vector<std::size_t>& u);

// |a - b| <= tol
Check abs_check(std::string name, double value, double target, double tol);

// Suites run at the default sample sizes with fixed seeds.
SuiteResult validate_quadratic51(unsigned threads = 1, std::uint64_t seed = 1);
SuiteResult validate_tables52(unsigned threads = 1, std::uint64_t seed = 1);
SuiteResult validate_identities33(unsigned threads = 1, std::uint64_t seed = 1);
// "quadratic51", "tables52", "identities33"
SuiteResult run_suite(const std::string& suite, unsigned threads = 1, std::uint64_t seed = 1);

}  // namespace kbsa
