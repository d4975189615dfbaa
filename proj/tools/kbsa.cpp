#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "kbsa/config.hpp"
#include "kbsa/errors.hpp"
#include "kbsa/report.hpp"
#include "kbsa/validation.hpp"

using namespace kbsa;

namespace {

enum Exit { kOk = 0, kValidationFailed = 1, kEstimation = 2, kConfig = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::optional<std::string> kernel;
  std::optional<double> threshold;
  std::optional<std::size_t> n;
  std::string suite;
};

ConfigOverrides overrides(const Flags& f) {
  ConfigOverrides o;
  o.seed = f.seed;
  o.threads = f.threads;
  o.out_dir = f.out;
  o.kernel = f.kernel;
  o.threshold = f.threshold;
  return o;
}

ReportMeta meta(const std::string& command, const RunConfig& rc, std::uint64_t evaluations) {
  return {command, rc.name, rc.hash, rc.estimator.seed, evaluations};
}

int analyze(const Flags& f) {
  const RunConfig rc = load_config(f.config, overrides(f));
  Estimator est(rc.problem, rc.estimator);
  std::vector<DenominatorEstimate> dens;
  for (const auto& k : rc.kernels) dens.push_back(est.denominator(k));
  const auto all = estimate_all(est, rc.subsets, rc.kernels, rc.kinds);
  const std::uint64_t evals = rc.problem.model->meter().count();
  const std::string table = table_csv(all, rc.subsets, rc.kernels, rc.kinds);
  write_file(rc.out_dir, "indices.csv", table);
  write_file(rc.out_dir, "records.csv", records_csv(all));
  write_file(rc.out_dir, "report.json", analyze_json(meta("analyze", rc, evals), all, dens));
  std::cout << table;
  return kOk;
}

int screen(const Flags& f) {
  const RunConfig rc = load_config(f.config, overrides(f));
  Estimator est(rc.problem, rc.estimator);
  const ScreeningReport rep = screen_rank(est, rc.screening_kernel, rc.screening);
  const std::uint64_t evals = rc.problem.model->meter().count();
  write_file(rc.out_dir, "screening.csv", rep.csv());
  write_file(rc.out_dir, "screening.json", screening_json(meta("screen", rc, evals), rep));
  std::cout << rep.csv();
  return kOk;
}

int validate(const Flags& f) {
  std::vector<std::string> suites;
  if (f.suite.empty() || f.suite == "all")
    suites = {"quadratic51", "identities33", "tables52"};
  else
    suites = {f.suite};
  bool ok = true;
  for (const auto& s : suites) {
    const SuiteResult r = run_suite(s, f.threads.value_or(1), f.seed.value_or(1));
    std::cout << r.text();
    std::cout << (r.passed() ? "PASS " : "FAIL ") << s << " (" << r.checks.size() - r.failures() << "/"
              << r.checks.size() << ")\n";
    if (f.out) write_file(*f.out, "validation_" + s + ".json", r.json());
    ok = ok && r.passed();
  }
  return ok ? kOk : kValidationFailed;
}

int sample(const Flags& f) {
  const RunConfig rc = load_config(f.config, overrides(f));
  const std::size_t n = f.n.value_or(rc.sample_n);
  if (n < 1) throw ConfigError("n must be >= 1", "--n");
  const auto& ew = rc.problem.weight;
  std::shared_ptr<const ProductTables> tables;
  if (ew->is_product_form() && !ew->is_constant()) tables = std::make_shared<ProductTables>(*ew);
  SampleOptions opt;
  opt.dependency = rc.estimator.dependency;
  opt.dependency.analytic = rc.problem.analytic;
  const PointSet pts = sample_target(ew, n, RandomStream(rc.estimator.seed, 0).child(5), opt, rc.estimator.threads, tables);
  const std::string csv = points_csv(ew->space(), pts);
  write_file(rc.out_dir, "sample.csv", csv);
  std::cout << "wrote " << n << " draws to " << rc.out_dir << "/sample.csv\n";
  return kOk;
}

int converge(const Flags& f) {
  const RunConfig rc = load_config(f.config, overrides(f));
  if (!rc.converge) throw ConfigError("the config has no converge section", "converge");
  const auto& cc = *rc.converge;
  std::vector<ConvergeRow> rows;
  for (std::size_t m : cc.schedule) {
    EstimatorConfig ec = rc.estimator;
    ec.m = m;
    Estimator est(rc.problem, ec);
    const std::uint64_t before = rc.problem.model->meter().count();
    const auto e = est.estimate(cc.subset, {rc.kernels.front()}, {cc.kind}).front();
    rows.push_back({m, rc.problem.model->meter().count() - before, e, cc.reference});
  }
  const std::string csv = converge_csv(rows);
  write_file(rc.out_dir, "converge.csv", csv);
  std::cout << csv;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-based sensitivity indices for weighted input distributions"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* c, bool needs_config) {
    auto* opt = c->add_option("--config", f.config, "JSON run configuration");
    if (needs_config) opt->required();
    c->add_option("--seed", f.seed, "Base seed (overrides the config)");
    c->add_option("--threads", f.threads, "Worker threads")->envname("KBSA_THREADS")->check(CLI::Range(1u, 1024u));
    c->add_option("--out", f.out, "Output directory");
  };
  auto* an = app.add_subcommand("analyze", "Estimate first-order, total and upsilon indices");
  common(an, true);
  an->add_option("--kernel", f.kernel, "Kernel: l1, l2, quadratic, lpP, owenP");
  auto* sc = app.add_subcommand("screen", "Upsilon screening with Morris mu*");
  common(sc, true);
  sc->add_option("--kernel", f.kernel, "Kernel: l1, l2, quadratic, lpP, owenP");
  sc->add_option("--threshold", f.threshold, "Importance threshold on sqrt(upsilon)");
  auto* va = app.add_subcommand("validate", "Reproduce the published values");
  common(va, false);
  va->add_option("suite", f.suite, "quadratic51, tables52, identities33 or all")
      ->check(CLI::IsMember({"quadratic51", "tables52", "identities33", "all"}));
  auto* sa = app.add_subcommand("sample", "Draw from the weighted input law");
  common(sa, true);
  sa->add_option("--n", f.n, "Number of draws");
  auto* cv = app.add_subcommand("converge", "Error-versus-budget sweep over m");
  common(cv, true);
  cv->add_option("--kernel", f.kernel, "Kernel: l1, l2, quadratic, lpP, owenP");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*an) return analyze(f);
    if (*sc) return screen(f);
    if (*va) return validate(f);
    if (*sa) return sample(f);
    if (*cv) return converge(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEstimation;
  }
  return kOk;
}
