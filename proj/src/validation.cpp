#include "kbsa/validation.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "kbsa/errors.hpp"
#include "kbsa/report.hpp"
#include "kbsa/testcases.hpp"

namespace kbsa {

bool SuiteResult::passed() const { return failures() == 0; }

std::size_t SuiteResult::failures() const {
  std::size_t n = 0;
  for (const auto& c : checks) n += c.pass ? 0 : 1;
  return n;
}

std::string SuiteResult::json() const {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  j["passed"] = passed();
  j["failures"] = failures();
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks)
    j["checks"].push_back(
        {{"name", c.name}, {"value", c.value}, {"target", c.target}, {"tolerance", c.tolerance}, {"pass", c.pass}});
  return j.dump(2) + "\n";
}

std::string SuiteResult::text() const {
  std::string s;
  char buf[256];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "%s %s: %.4f vs %.4f (tol %.4f)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                  c.value, c.target, c.tolerance);
    s += buf;
  }
  return s;
}

const PaperTable& paper_table1() {
  static const PaperTable t{
      {0.756, 0.556, 0.176, 0.136, 0.099, 0.092, 0.086, 0.082, 0.079, 0.076},
      {0.536, 0.328, 0.027, 0.016, 0.011, 0.009, 0.008, 0.007, 0.007, 0.006},
      {0.756, 0.555, 0.178, 0.148, 0.099, 0.091, 0.085, 0.082, 0.078, 0.076},
      {0.637, 0.436, 0.038, 0.026, 0.015, 0.012, 0.011, 0.011, 0.009, 0.010},
      {1.002, 0.747, 0.235, 0.188, 0.133, 0.124, 0.114, 0.114, 0.105, 0.100},
      {1.230, 0.844, 0.074, 0.048, 0.031, 0.027, 0.021, 0.024, 0.020, 0.018},
  };
  return t;
}

const PaperTable& paper_table2() {
  static const PaperTable t{
      {0.465, 0.388, 0.277, 0.229, 0.173, 0.165, 0.157, 0.319, 0.309, 0.301},
      {0.261, 0.190, 0.075, 0.058, 0.041, 0.040, 0.035, 0.121, 0.116, 0.113},
      {0.465, 0.388, 0.276, 0.229, 0.173, 0.164, 0.157, 0.320, 0.309, 0.300},
      {0.267, 0.197, 0.074, 0.059, 0.043, 0.041, 0.037, 0.123, 0.120, 0.116},
      {0.615, 0.530, 0.374, 0.303, 0.238, 0.224, 0.211, 0.428, 0.417, 0.402},
      {0.477, 0.441, 0.148, 0.104, 0.088, 0.081, 0.069, 0.252, 0.252, 0.233},
  };
  return t;
}

std::vector<double> gfunction_validation_a() { return {0, 1, 4.5, 9, 99, 99, 99, 99, 99, 99}; }

std::vector<IndexEstimate> estimate_all(Estimator& est, const std::vector<SubsetSpec>& subsets,
                                        const std::vector<KernelSpec>& kernels, const std::vector<IndexKind>& kinds) {
  std::vector<IndexEstimate> out;
  for (const auto& u : subsets) {
    auto part = est.estimate(u, kernels, kinds);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

const IndexEstimate& find_estimate(const std::vector<IndexEstimate>& all, IndexKind kind, const std::string& kernel,
                                   const std::vector<std::size_t>& u) {
  for (const auto& e : all)
    if (e.kind == kind && e.kernel == kernel && e.u == u) return e;
  throw std::out_of_range("no estimate for " + to_string(kind) + " " + kernel + " " + subset_label(u));
}

Check abs_check(std::string name, double value, double target, double tol) {
  return Check{std::move(name), value, target, tol, std::fabs(value - target) <= tol};
}

namespace {

const std::vector<IndexKind> kAllKinds{IndexKind::FirstOrder, IndexKind::Total, IndexKind::Upsilon};

std::vector<SubsetSpec> singletons(std::size_t d) {
  std::vector<SubsetSpec> s;
  for (std::size_t j = 0; j < d; ++j) s.push_back(SubsetSpec::make(d, {j}));
  return s;
}

EstimatorConfig defaults(unsigned threads, std::uint64_t seed) {
  EstimatorConfig c;
  c.threads = threads;
  c.seed = seed;
  return c;
}

void table_checks(SuiteResult& r, const std::string& tag, const PaperTable& t, const std::vector<IndexEstimate>& all,
                  double tol_fo, double tol_ups) {
  const std::string l1 = KernelSpec::l1().name(), q = KernelSpec::quadratic().name();
  for (std::size_t j = 0; j < 10; ++j) {
    const std::vector<std::size_t> u{j};
    const std::string x = "X" + std::to_string(j + 1);
    auto add = [&](const char* what, IndexKind kind, const std::string& k, double target, double tol) {
      r.checks.push_back(abs_check(tag + " " + what + " " + k + " " + x, find_estimate(all, kind, k, u).sqrt_value,
                                   target, tol));
    };
    add("first_order", IndexKind::FirstOrder, l1, t.fo_l1[j], tol_fo);
    add("first_order", IndexKind::FirstOrder, q, t.fo_q[j], tol_fo);
    add("total", IndexKind::Total, l1, t.tot_l1[j], tol_fo);
    add("total", IndexKind::Total, q, t.tot_q[j], tol_fo);
    add("upsilon", IndexKind::Upsilon, l1, t.ups_l1[j], tol_ups);
    add("upsilon", IndexKind::Upsilon, q, t.ups_q[j], tol_ups);
  }
}

}  // namespace

SuiteResult validate_quadratic51(unsigned threads, std::uint64_t seed) {
  SuiteResult r{"quadratic51", {}};
  Estimator est(quadratic_ball(1.0), defaults(threads, seed));
  const std::vector<KernelSpec> kernels{KernelSpec::l1(), KernelSpec::quadratic()};
  const auto all = estimate_all(est, singletons(3), kernels, kAllKinds);
  const auto ref = ball::reference();
  for (std::size_t j = 0; j < 3; ++j) {
    const std::vector<std::size_t> u{j};
    const std::string x = " X" + std::to_string(j + 1);
    auto add = [&](const char* what, IndexKind kind, const KernelSpec& k, double target) {
      r.checks.push_back(
          abs_check(std::string(what) + " " + k.name() + x, find_estimate(all, kind, k.name(), u).sqrt_value, target, 0.02));
    };
    add("first_order", IndexKind::FirstOrder, KernelSpec::l1(), ref.fo_l1);
    add("total", IndexKind::Total, KernelSpec::l1(), ref.tot_l1);
    add("upsilon", IndexKind::Upsilon, KernelSpec::l1(), ref.ups_l1);
    add("first_order", IndexKind::FirstOrder, KernelSpec::quadratic(), ref.fo_q);
    add("total", IndexKind::Total, KernelSpec::quadratic(), ref.tot_q);
    add("upsilon", IndexKind::Upsilon, KernelSpec::quadratic(), ref.ups_q);
  }
  return r;
}

SuiteResult validate_tables52(unsigned threads, std::uint64_t seed) {
  SuiteResult r{"tables52", {}};
  const std::vector<KernelSpec> kernels{KernelSpec::l1(), KernelSpec::quadratic()};
  {
    Estimator est(gsobol(gsobol_alpha_zero()), defaults(threads, seed));
    table_checks(r, "table1", paper_table1(), estimate_all(est, singletons(10), kernels, kAllKinds), 0.03, 0.04);
  }
  {
    Estimator est(gsobol(gsobol_alpha_table2()), defaults(threads, seed));
    table_checks(r, "table2", paper_table2(), estimate_all(est, singletons(10), kernels, kAllKinds), 0.04, 0.04);
  }
  return r;
}

SuiteResult validate_identities33(unsigned threads, std::uint64_t seed) {
  SuiteResult r{"identities33", {}};
  const auto a = gfunction_validation_a();
  const GFunction g(a);
  const auto first = g.sobol_first_order();
  const auto total = g.sobol_total();
  Estimator est(gfunction(a), defaults(threads, seed));
  const std::vector<KernelSpec> kernels{KernelSpec::l2(), KernelSpec::owen(1.0)};
  const auto all = estimate_all(est, singletons(a.size()), kernels, kAllKinds);
  const std::string l2 = KernelSpec::l2().name(), ow = KernelSpec::owen(1.0).name();
  for (std::size_t j = 0; j < a.size(); ++j) {
    const std::vector<std::size_t> u{j};
    const std::string x = " X" + std::to_string(j + 1);
    const auto& fo = find_estimate(all, IndexKind::FirstOrder, l2, u);
    const auto& tot = find_estimate(all, IndexKind::Total, l2, u);
    const auto& ups = find_estimate(all, IndexKind::Upsilon, l2, u);
    r.checks.push_back(abs_check("sobol first_order l2" + x, fo.sqrt_value, first[j], 0.03));
    r.checks.push_back(abs_check("sobol total l2" + x, tot.sqrt_value, total[j], 0.03));
    const double se = std::hypot(ups.sqrt_std_error, 2.0 * tot.sqrt_std_error);
    r.checks.push_back(abs_check("sqrt(upsilon) = 2 sqrt(total) l2" + x, ups.sqrt_value, 2.0 * tot.sqrt_value, 3.0 * se));
    const auto& owen = find_estimate(all, IndexKind::FirstOrder, ow, u);
    const double se2 = std::hypot(owen.sqrt_std_error, fo.sqrt_std_error);
    r.checks.push_back(abs_check("owen(1) = l2 first_order" + x, owen.sqrt_value, fo.sqrt_value, 3.0 * se2));
  }
  return r;
}

SuiteResult run_suite(const std::string& suite, unsigned threads, std::uint64_t seed) {
  if (suite == "quadratic51") return validate_quadratic51(threads, seed);
  if (suite == "tables52") return validate_tables52(threads, seed);
  if (suite == "identities33") return validate_identities33(threads, seed);
  throw ConfigError("unknown suite '" + suite + "' (quadratic51, tables52, identities33)", "suite");
}

}  // namespace kbsa
