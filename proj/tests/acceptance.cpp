// Acceptance run: one PASS/FAIL line per criterion, details for failing checks.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kbsa/report.hpp"
#include "kbsa/screening.hpp"
#include "kbsa/testcases.hpp"
#include "kbsa/validation.hpp"

using namespace kbsa;

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<IndexKind> kKinds{IndexKind::FirstOrder, IndexKind::Total, IndexKind::Upsilon};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<SubsetSpec> singletons(std::size_t d) {
  std::vector<SubsetSpec> s;
  for (std::size_t j = 0; j < d; ++j) s.push_back(SubsetSpec::make(d, {j}));
  return s;
}

EstimatorConfig defaults(std::uint64_t seed = 1) {
  EstimatorConfig c;
  c.seed = seed;
  return c;
}


struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void add(const Check& c) {
    if (c.pass) return;
    pass = false;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %.4f vs %.4f (tol %.4f)", c.name.c_str(), c.value, c.target, c.tolerance);
    notes.push_back(buf);
  }
  void fail(const std::string& why) {
    pass = false;
    notes.push_back(why);
  }
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, const std::string& summary) {
  std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), summary.c_str());
  for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Run {
  std::string name;
  std::vector<IndexEstimate> estimates;
};

std::vector<IndexEstimate> run_all(const Problem& p, const EstimatorConfig& cfg, const std::vector<KernelSpec>& kernels) {
  Estimator est(p, cfg);
  return estimate_all(est, singletons(p.space->dim()), kernels, kKinds);
}

// g-Sobol tables. The weakest inputs have first-order effects comparable to
// the inner-mean noise at m1 = 500, so first-order and total use m1 = 2000;
// upsilon does not depend on m1 and is cheap enough for m = 20000.
std::vector<IndexEstimate> table_run(const Problem& p, const std::vector<KernelSpec>& kernels) {
  EstimatorConfig inner = defaults();
  inner.m1 = 2000;
  Estimator est(p, inner);
  auto all = estimate_all(est, singletons(10), kernels, {IndexKind::FirstOrder, IndexKind::Total});
  EstimatorConfig outer = defaults();
  outer.m = 20000;
  outer.M = 200000;
  Estimator ups(p, outer);
  const auto more = estimate_all(ups, singletons(10), kernels, {IndexKind::Upsilon});
  all.insert(all.end(), more.begin(), more.end());
  return all;
}

// Criterion 1 checks for one run of the ball.
void ball_checks(Outcome& o, const std::string& tag, const std::vector<IndexEstimate>& all, double tol) {
  const auto ref = ball::reference();
  const std::string l1 = KernelSpec::l1().name(), q = KernelSpec::quadratic().name();
  for (std::size_t j = 0; j < 3; ++j) {
    const std::vector<std::size_t> u{j};
    const std::string x = " X" + std::to_string(j + 1);
    auto add = [&](const char* what, IndexKind kind, const std::string& k, double target) {
      o.add(abs_check(tag + " " + what + " " + k + x, find_estimate(all, kind, k, u).sqrt_value, target, tol));
    };
    add("first_order", IndexKind::FirstOrder, l1, ref.fo_l1);
    add("total", IndexKind::Total, l1, ref.tot_l1);
    add("upsilon", IndexKind::Upsilon, l1, ref.ups_l1);
    add("first_order", IndexKind::FirstOrder, q, ref.fo_q);
    add("total", IndexKind::Total, q, ref.tot_q);
    add("upsilon", IndexKind::Upsilon, q, ref.ups_q);
  }
}

void table_checks(Outcome& o, const std::string& tag, const PaperTable& t, const std::vector<IndexEstimate>& all,
                  double tol_fo, double tol_ups) {
  const std::string l1 = KernelSpec::l1().name(), q = KernelSpec::quadratic().name();
  for (std::size_t j = 0; j < 10; ++j) {
    const std::vector<std::size_t> u{j};
    const std::string x = " X" + std::to_string(j + 1);
    auto add = [&](const char* what, IndexKind kind, const std::string& k, double target, double tol) {
      o.add(abs_check(tag + " " + what + " " + k + x, find_estimate(all, kind, k, u).sqrt_value, target, tol));
    };
    add("first_order", IndexKind::FirstOrder, l1, t.fo_l1[j], tol_fo);
    add("first_order", IndexKind::FirstOrder, q, t.fo_q[j], tol_fo);
    add("total", IndexKind::Total, l1, t.tot_l1[j], tol_fo);
    add("total", IndexKind::Total, q, t.tot_q[j], tol_fo);
    add("upsilon", IndexKind::Upsilon, l1, t.ups_l1[j], tol_ups);
    add("upsilon", IndexKind::Upsilon, q, t.ups_q[j], tol_ups);
  }
}

double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace

int main() {
  std::vector<Run> runs;
  const auto t_all = Clock::now();

  // 1. ball at defaults (analytic) and via numerical inversion at m = 1000
  std::vector<IndexEstimate> ball1;
  {
    Outcome o;
    const std::vector<KernelSpec> kernels{KernelSpec::l1(), KernelSpec::quadratic()};
    auto t0 = Clock::now();
    ball1 = run_all(quadratic_ball(1.0), defaults(), kernels);
    const double t_analytic = seconds_since(t0);
    ball_checks(o, "analytic", ball1, 0.02);
    if (t_analytic > 120) o.fail("analytic run took " + fmt("%.0f", t_analytic) + " s > 120 s");
    runs.push_back({"ball c=1 analytic", ball1});

    EstimatorConfig num = defaults();
    num.m1 = 100;
    num.m = 1000;
    num.M = 10000;
    num.dependency.inner_mc = 1000;
    num.dependency.force_numerical = true;
    t0 = Clock::now();
    const auto ballnum = run_all(quadratic_ball(1.0), num, kernels);
    const double t_num = seconds_since(t0);
    ball_checks(o, "numerical", ballnum, 0.04);
    if (t_num > 900) o.fail("numerical run took " + fmt("%.0f", t_num) + " s > 900 s");
    runs.push_back({"ball c=1 numerical", ballnum});
    report(1, "quadratic ball indices", o,
           "analytic " + fmt("%.0f", t_analytic) + " s at +/-0.02, numerical m=1000 " + fmt("%.0f", t_num) +
               " s at +/-0.04");
  }

  // 2. threshold invariance, c = 5 against c = 1
  {
    Outcome o;
    const auto ball5 = run_all(quadratic_ball(5.0), defaults(), {KernelSpec::l1(), KernelSpec::quadratic()});
    runs.push_back({"ball c=5 analytic", ball5});
    double worst = 0.0;
    for (const auto& a : ball1) {
      const auto& b = find_estimate(ball5, a.kind, a.kernel, a.u);
      const double se = std::hypot(a.sqrt_std_error, b.sqrt_std_error);
      const double z = std::fabs(a.sqrt_value - b.sqrt_value) / se;
      worst = std::max(worst, z);
      o.add(Check{"c=5 vs c=1 " + to_string(a.kind) + " " + a.kernel + " " + subset_label(a.u), b.sqrt_value,
                  a.sqrt_value, 3 * se, z <= 3.0});
    }
    report(2, "threshold invariance c=1 vs c=5", o, "largest gap " + fmt("%.2f", worst) + " combined SE");
  }

  // 3. Table 1
  {
    Outcome o;
    const auto t0 = Clock::now();
    const auto all = table_run(gsobol(gsobol_alpha_zero()), {KernelSpec::l1(), KernelSpec::quadratic()});
    const double t = seconds_since(t0);
    table_checks(o, "table1", paper_table1(), all, 0.03, 0.04);
    if (t > 600) o.fail("run took " + fmt("%.0f", t) + " s > 600 s");
    runs.push_back({"g-Sobol alpha=0", all});
    report(3, "Table 1, alpha = 0", o, "60 cells, " + fmt("%.0f", t) + " s");
  }

  // 4. Table 2 and the screening decisions
  {
    Outcome o;
    const auto p = gsobol(gsobol_alpha_table2());
    const auto all = table_run(p, {KernelSpec::l1(), KernelSpec::quadratic()});
    table_checks(o, "table2", paper_table2(), all, 0.04, 0.04);
    runs.push_back({"g-Sobol alpha=table2", all});

    ScreeningConfig sc;
    sc.threshold = 0.1;
    Estimator est(p, defaults());
    const auto rep = screen_rank(est, KernelSpec::l1(), sc);
    const std::vector<std::size_t> everyone{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    if (rep.important() != everyone) o.fail("l1 screening at T=0.1 does not mark all ten inputs important");
    std::vector<std::size_t> unimportant;
    for (std::size_t j = 0; j < 10; ++j)
      if (find_estimate(all, IndexKind::Total, KernelSpec::quadratic().name(), {j}).sqrt_value < 0.1)
        unimportant.push_back(j);
    if (unimportant != std::vector<std::size_t>{2, 3, 4, 5, 6}) {
      std::string s;
      for (std::size_t j : unimportant) s += " X" + std::to_string(j + 1);
      o.fail("quadratic unimportant set at T=0.1 is {" + s + " }, expected { X3 X4 X5 X6 X7 }");
    }
    report(4, "Table 2 and screening sets", o, "60 cells within 0.04, l1 all important, quadratic X3..X7 unimportant");
  }

  // 5 and 7. Sobol equivalence and the factor-of-two identity on the g-function
  {
    Outcome o5, o7;
    const auto a = gfunction_validation_a();
    const GFunction g(a);
    const auto first = g.sobol_first_order();
    const auto all = run_all(gfunction(a), defaults(), {KernelSpec::l2()});
    runs.push_back({"g-function", all});
    const std::string l2 = KernelSpec::l2().name();
    for (std::size_t j = 0; j < a.size(); ++j) {
      const std::vector<std::size_t> u{j};
      const std::string x = " X" + std::to_string(j + 1);
      o5.add(abs_check("sobol first_order" + x, find_estimate(all, IndexKind::FirstOrder, l2, u).sqrt_value, first[j],
                       0.03));
      const auto& tot = find_estimate(all, IndexKind::Total, l2, u);
      const auto& ups = find_estimate(all, IndexKind::Upsilon, l2, u);
      const double se = std::hypot(ups.sqrt_std_error, 2 * tot.sqrt_std_error);
      o7.add(abs_check("sqrt(upsilon) = 2 sqrt(total)" + x, ups.sqrt_value, 2 * tot.sqrt_value, 3 * se));
    }
    report(5, "L2 first-order equals Sobol on the g-function", o5, "10 inputs within 0.03");
    report(7, "sqrt(upsilon) = 2 sqrt(total) for the L2 kernel", o7, "10 inputs within 3 combined SE");
  }

  // 6. Lemma 1 ordering over every run above
  {
    Outcome o;
    std::size_t checked = 0;
    for (const auto& r : runs)
      for (const auto& fo : r.estimates) {
        if (fo.kind != IndexKind::FirstOrder) continue;
        const auto& tot = find_estimate(r.estimates, IndexKind::Total, fo.kernel, fo.u);
        const auto& ups = find_estimate(r.estimates, IndexKind::Upsilon, fo.kernel, fo.u);
        const std::string tag = r.name + " " + fo.kernel + " " + subset_label(fo.u);
        const double s1 = 3 * std::hypot(fo.std_error, tot.std_error);
        const double s2 = 3 * std::hypot(tot.std_error, ups.std_error);
        o.add(Check{tag + " S <= S_T", fo.value, tot.value, s1, fo.value <= tot.value + s1});
        o.add(Check{tag + " S_T <= 1", tot.value, 1.0, 3 * tot.std_error, tot.value <= 1 + 3 * tot.std_error});
        o.add(Check{tag + " S_T <= upsilon", tot.value, ups.value, s2, tot.value <= ups.value + s2});
        checked += 3;
      }
    report(6, "ordering S <= S_T <= upsilon, S_T <= 1", o, std::to_string(checked) + " inequalities");
  }

  // 8. numerical-inversion draws on the ball
  {
    Outcome o;
    const double c = 1.0;
    const auto p = quadratic_ball(c, false);
    SampleOptions so;
    so.dependency.force_numerical = true;
    const auto pts = sample_target(p.weight, 10000, RandomStream(8, 0), so);
    std::vector<double> x1sq, z2, z3;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto r = pts.row(i);
      const double rest = c - r[0] * r[0];
      x1sq.push_back(r[0] * r[0]);
      z2.push_back(r[1] * r[1] / rest);
      z3.push_back(r[2] * r[2] / (rest * (1 - z2.back())));
    }
    const auto b1 = MarginalDistribution::beta_first_kind(c, 0.5, 2);
    const auto b2 = MarginalDistribution::beta(0.5, 1.5);
    const auto b3 = MarginalDistribution::beta(0.5, 1.0);
    const double d1 = ks_distance(x1sq, [&](double v) { return b1.cdf(v); });
    const double d2 = ks_distance(z2, [&](double v) { return b2.cdf(v); });
    const double d3 = ks_distance(z3, [&](double v) { return b3.cdf(v); });
    o.add(Check{"KS (X1)^2 vs BetaFirstKind(c,1/2,2)", d1, 0.0, 0.03, d1 < 0.03});
    o.add(Check{"KS Z2 vs Beta(1/2,3/2)", d2, 0.0, 0.03, d2 < 0.03});
    o.add(Check{"KS Z3 vs Beta(1/2,1)", d3, 0.0, 0.03, d3 < 0.03});
    report(8, "numerical dependency model on the ball", o,
           "n=10000, KS " + fmt("%.4f", d1) + " " + fmt("%.4f", d2) + " " + fmt("%.4f", d3));
  }

  // 9. CI coverage over 100 seeds
  {
    Outcome o;
    const double truth = 4.0 / 27.0;
    const auto t0 = Clock::now();
    int covered = 0;
    for (int r = 0; r < 100; ++r) {
      Estimator est(quadratic_ball(1.0), defaults(1000 + r));
      const auto e = est.first_order(SubsetSpec::make(3, {0}), KernelSpec::l1());
      if (e.ci.lo <= truth && truth <= e.ci.hi) ++covered;
    }
    const double t = seconds_since(t0);
    if (covered < 90) o.fail("coverage " + std::to_string(covered) + "/100 < 90");
    if (t > 1200) o.fail("took " + fmt("%.0f", t) + " s > 1200 s");
    report(9, "95% CI coverage of the l1 first-order index", o,
           std::to_string(covered) + "/100 covered, " + fmt("%.0f", t) + " s");
  }

  // 10. byte-identical reports at 1, 4 and 8 threads
  {
    Outcome o;
    auto reports = [](unsigned threads) {
      EstimatorConfig cfg = defaults(5);
      cfg.m1 = 50;
      cfg.m = 400;
      cfg.M = 4000;
      cfg.threads = threads;
      std::string out;
      {
        const auto p = quadratic_ball(1.0);
        Estimator est(p, cfg);
        const std::vector<KernelSpec> ks{KernelSpec::l1(), KernelSpec::quadratic()};
        std::vector<DenominatorEstimate> dens;
        for (const auto& k : ks) dens.push_back(est.denominator(k));
        const auto all = estimate_all(est, singletons(3), ks, kKinds);
        const ReportMeta meta{"analyze", "ball", "", cfg.seed, p.model->meter().count()};
        out += analyze_json(meta, all, dens) + records_csv(all) + table_csv(all, singletons(3), ks, kKinds);
      }
      {
        const auto p = gsobol(gsobol_alpha_table2());
        Estimator est(p, cfg);
        ScreeningConfig sc;
        sc.threshold = 0.1;
        sc.design.trajectories = 10;
        const auto rep = screen_rank(est, KernelSpec::l1(), sc);
        out += screening_json(ReportMeta{"screen", "gsobol", "", cfg.seed, p.model->meter().count()}, rep) + rep.csv();
      }
      {
        const auto p = quadratic_ball(1.0, false);
        SampleOptions so;
        so.allow_rejection = false;
        so.dependency.inner_mc = 500;
        out += points_csv(*p.space, sample_target(p.weight, 200, RandomStream(5, 0), so, threads));
      }
      return out;
    };
    const std::string r1 = reports(1), r4 = reports(4), r8 = reports(8);
    if (r4 != r1) o.fail("4-thread reports differ from 1-thread reports");
    if (r8 != r1) o.fail("8-thread reports differ from 1-thread reports");
    report(10, "determinism across thread counts", o, std::to_string(r1.size()) + " bytes compared");
  }

  std::printf("%d criteria failed, total %.0f s\n", failures, seconds_since(t_all));
  return failures == 0 ? 0 : 1;
}
