#include "kbsa/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kbsa/errors.hpp"
#include "kbsa/external_model.hpp"

namespace kbsa {

using nlohmann::json;

namespace {

// A JSON object plus its dotted path, with strict key checking.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  Node child(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing field", at(key));
    return Node(j_.at(key), at(key));
  }
  Node item(std::size_t i) const { return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }

  void object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) throw ConfigError("expected an object", path_);
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError("unknown field", at(it.key()));
  }

  double number(const std::string& key) const {
    const auto& v = child(key).raw();
    if (!v.is_number()) throw ConfigError("expected a number", at(key));
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("expected a finite number", at(key));
    return x;
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::uint64_t count(const std::string& key) const {
    const auto& v = child(key).raw();
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError("expected a non-negative integer", at(key));
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError("expected true or false", at(key));
    return v.get<bool>();
  }

  std::string text(const std::string& key) const {
    const auto& v = child(key).raw();
    if (!v.is_string()) throw ConfigError("expected a string", at(key));
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    const Node n = child(key);
    if (!n.raw().is_array()) throw ConfigError("expected an array of numbers", n.path());
    std::vector<double> out;
    for (std::size_t i = 0; i < n.raw().size(); ++i) {
      const auto& v = n.raw().at(i);
      if (!v.is_number() || !std::isfinite(v.get<double>()))
        throw ConfigError("expected a finite number", n.path() + "[" + std::to_string(i) + "]");
      out.push_back(v.get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

MarginalDistribution parse_marginal(const Node& n) {
  n.object({"family", "lo", "hi", "mean", "sd", "a", "b", "scale", "repeat"});
  const std::string fam = n.text("family");
  try {
    if (fam == "uniform") return MarginalDistribution::uniform(n.number("lo", 0.0), n.number("hi", 1.0));
    if (fam == "normal") return MarginalDistribution::normal(n.number("mean", 0.0), n.number("sd", 1.0));
    if (fam == "beta") return MarginalDistribution::beta(n.number("a"), n.number("b"));
    if (fam == "beta_first_kind")
      return MarginalDistribution::beta_first_kind(n.number("scale"), n.number("a"), n.number("b"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), n.path());
  }
  throw ConfigError("unknown family '" + fam + "' (uniform, normal, beta, beta_first_kind)", n.at("family"));
}

std::vector<MarginalDistribution> parse_inputs(const Node& n) {
  if (!n.raw().is_array() || n.raw().empty()) throw ConfigError("expected a non-empty array", n.path());
  std::vector<MarginalDistribution> out;
  for (std::size_t i = 0; i < n.raw().size(); ++i) {
    const Node item = n.item(i);
    const MarginalDistribution m = parse_marginal(item);
    const std::uint64_t rep = item.count("repeat", 1);
    if (rep < 1) throw ConfigError("repeat must be >= 1", item.at("repeat"));
    out.insert(out.end(), rep, m);
  }
  return out;
}

ModelPtr parse_model(const Node& n) {
  if (!n.raw().is_object()) throw ConfigError("expected an object", n.path());
  const std::string kind = n.text("kind");
  if (kind == "quadratic") {
    n.object({"kind", "d"});
    const auto d = n.count("d", 3);
    if (d < 1) throw ConfigError("d must be >= 1", n.at("d"));
    return std::make_shared<const QuadraticSum>(d);
  }
  if (kind == "gsobol4") {
    n.object({"kind"});
    return std::make_shared<const GSobol4>();
  }
  if (kind == "gfunction") {
    n.object({"kind", "a"});
    auto a = n.numbers("a");
    if (a.empty()) throw ConfigError("need at least one coefficient", n.at("a"));
    for (double v : a)
      if (v < 0.0) throw ConfigError("coefficients must be >= 0", n.at("a"));
    return std::make_shared<const GFunction>(std::move(a));
  }
  if (kind == "linear") {
    n.object({"kind", "coefficients", "intercept"});
    auto a = n.numbers("coefficients");
    if (a.empty()) throw ConfigError("need at least one coefficient", n.at("coefficients"));
    return std::make_shared<const Linear>(std::move(a), n.number("intercept", 0.0));
  }
  if (kind == "theta_toy") {
    n.object({"kind"});
    return std::make_shared<const ThetaToy>();
  }
  if (kind == "external") {
    n.object({"kind", "command", "input_dim", "output_dim", "batch_size", "timeout_seconds"});
    ExternalModelOptions o;
    const Node cmd = n.child("command");
    if (!cmd.raw().is_array() || cmd.raw().empty()) throw ConfigError("expected a non-empty argv array", cmd.path());
    for (std::size_t i = 0; i < cmd.raw().size(); ++i) {
      if (!cmd.raw().at(i).is_string()) throw ConfigError("expected a string", cmd.item(i).path());
      o.command.push_back(cmd.raw().at(i).get<std::string>());
    }
    o.input_dim = n.count("input_dim");
    o.output_dim = n.count("output_dim");
    o.batch_size = n.count("batch_size", 256);
    o.timeout_seconds = n.number("timeout_seconds", 30.0);
    if (o.input_dim < 1 || o.output_dim < 1) throw ConfigError("dimensions must be >= 1", n.path());
    if (o.batch_size < 1) throw ConfigError("batch_size must be >= 1", n.at("batch_size"));
    if (!(o.timeout_seconds > 0.0)) throw ConfigError("timeout_seconds must be > 0", n.at("timeout_seconds"));
    return std::make_shared<const ExternalModel>(std::move(o));
  }
  throw ConfigError("unknown model '" + kind + "' (quadratic, gsobol4, gfunction, linear, theta_toy, external)",
                    n.at("kind"));
}

std::vector<double> bound(const Node& n, const std::string& key) {
  if (!n.has(key)) return {};
  if (n.raw().at(key).is_number()) return {n.number(key)};
  return n.numbers(key);
}

Box parse_box(const Node& n) { return Box{bound(n, "lower"), bound(n, "upper")}; }

WeightSource parse_source(const Node& n) {
  const std::string s = n.text("source", "outputs");
  if (s == "outputs") return WeightSource::Outputs;
  if (s == "inputs") return WeightSource::Inputs;
  throw ConfigError("source must be 'outputs' or 'inputs'", n.at("source"));
}

// Linear score c(v) = intercept + sum coefficients_l v_l.
ScoreFn parse_score(const Node& n, std::size_t width) {
  n.object({"coefficients", "intercept"});
  auto a = n.numbers("coefficients");
  if (a.size() != width)
    throw ConfigError("expected " + std::to_string(width) + " coefficients", n.at("coefficients"));
  const double b = n.number("intercept", 0.0);
  return [a, b](std::span<const double> v) {
    double s = b;
    for (std::size_t l = 0; l < a.size(); ++l) s += a[l] * v[l];
    return s;
  };
}

WeightFunction parse_weight(const Node& n, const ModelPtr& model, std::size_t d) {
  if (!n.raw().is_object()) throw ConfigError("expected an object", n.path());
  const std::string kind = n.text("kind");
  auto source_width = [&](WeightSource s) { return s == WeightSource::Outputs ? model->output_dim() : d; };
  auto check_box = [&](const Box& b, std::size_t width) {
    if (b.lower.size() > 1 && b.lower.size() != width)
      throw ConfigError("expected 1 or " + std::to_string(width) + " bounds", n.at("lower"));
    if (b.upper.size() > 1 && b.upper.size() != width)
      throw ConfigError("expected 1 or " + std::to_string(width) + " bounds", n.at("upper"));
  };
  auto widen = [](Box b, std::size_t width) {
    if (b.lower.size() == 1) b.lower.assign(width, b.lower[0]);
    if (b.upper.size() == 1) b.upper.assign(width, b.upper[0]);
    return b;
  };
  if (kind == "constant") {
    n.object({"kind", "value"});
    const double v = n.number("value", 1.0);
    if (!(v > 0.0)) throw ConfigError("value must be > 0", n.at("value"));
    return WeightFunction::constant(v);
  }
  if (kind == "indicator_threshold") {
    n.object({"kind", "lower", "upper", "source"});
    const WeightSource src = parse_source(n);
    Box b = parse_box(n);
    if (b.lower.empty() && b.upper.empty()) throw ConfigError("need 'lower' and/or 'upper'", n.path());
    check_box(b, source_width(src));
    return WeightFunction::indicator_threshold(widen(b, source_width(src)), model, src);
  }
  if (kind == "polynomial") {
    n.object({"kind", "alpha"});
    auto alpha = n.numbers("alpha");
    if (alpha.size() != d) throw ConfigError("expected " + std::to_string(d) + " exponents", n.at("alpha"));
    for (double a : alpha)
      if (a < 0.0) throw ConfigError("exponents must be >= 0", n.at("alpha"));
    return WeightFunction::polynomial(std::move(alpha));
  }
  if (kind == "smooth_membership" || kind == "composite") {
    if (kind == "composite")
      n.object({"kind", "score", "slope", "offset", "source", "lower", "upper"});
    else
      n.object({"kind", "score", "slope", "offset", "source"});
    const WeightSource src = parse_source(n);
    ScoreFn score = parse_score(n.child("score"), source_width(src));
    const Logistic m{n.number("slope", 1.0), n.number("offset", 0.0)};
    if (kind == "smooth_membership") return WeightFunction::smooth_membership(score, m, model, src);
    Box b = parse_box(n);
    check_box(b, source_width(src));
    return WeightFunction::composite(score, m, widen(b, source_width(src)), model, src);
  }
  if (kind == "functional_loss") {
    n.object({"kind", "loss", "output", "reduction", "theta_grid", "lower", "upper"});
    const std::string loss = n.text("loss", "square");
    const std::uint64_t out = n.count("output", 0);
    if (out >= model->output_dim()) throw ConfigError("output index out of range", n.at("output"));
    LossFn fn;
    if (loss == "square")
      fn = [out](std::span<const double> y, double) { return y[out] * y[out]; };
    else if (loss == "abs")
      fn = [out](std::span<const double> y, double) { return std::fabs(y[out]); };
    else
      throw ConfigError("loss must be 'square' or 'abs'", n.at("loss"));
    const std::string red = n.text("reduction", "mean");
    Reduction r;
    if (red == "mean")
      r = Reduction::Mean;
    else if (red == "max")
      r = Reduction::Max;
    else if (red == "min")
      r = Reduction::Min;
    else
      throw ConfigError("reduction must be mean, max or min", n.at("reduction"));
    auto grid = n.numbers("theta_grid");
    if (grid.empty()) throw ConfigError("theta grid must not be empty", n.at("theta_grid"));
    Box b = parse_box(n);
    check_box(b, model->output_dim());
    return WeightFunction::functional_loss(fn, r, std::move(grid), widen(b, model->output_dim()), model);
  }
  throw ConfigError("unknown weight '" + kind +
                        "' (constant, indicator_threshold, polynomial, smooth_membership, composite, functional_loss)",
                    n.at("kind"));
}

KernelSpec parse_kernel(const json& v, const std::string& path) {
  try {
    if (v.is_string()) return KernelSpec::parse(v.get<std::string>());
    if (v.is_object()) {
      Node n(v, path);
      n.object({"name", "p"});
      return KernelSpec::parse(n.text("name"), n.number("p", 2.0));
    }
  } catch (const ConfigError& e) {
    if (!e.path().empty()) throw;
    throw ConfigError(e.what(), path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), path);
  }
  throw ConfigError("expected a kernel name or {name, p}", path);
}

std::vector<std::size_t> parse_indices_1based(const Node& n, std::size_t d) {
  if (!n.raw().is_array()) throw ConfigError("expected an array of 1-based input indices", n.path());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n.raw().size(); ++i) {
    const auto& v = n.raw().at(i);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1 || v.get<std::int64_t>() > static_cast<std::int64_t>(d))
      throw ConfigError("expected an input index in 1.." + std::to_string(d), n.item(i).path());
    out.push_back(v.get<std::size_t>() - 1);
  }
  return out;
}

SubsetSpec parse_subset(const Node& n, std::size_t d) {
  try {
    if (n.raw().is_array()) return SubsetSpec::make(d, parse_indices_1based(n, d));
    n.object({"u", "pi"});
    auto u = parse_indices_1based(n.child("u"), d);
    std::vector<std::size_t> pi;
    if (n.has("pi")) pi = parse_indices_1based(n.child("pi"), d);
    return SubsetSpec::make(d, u, pi);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), n.path());
  }
}

IndexKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "first_order") return IndexKind::FirstOrder;
  if (s == "total") return IndexKind::Total;
  if (s == "upsilon") return IndexKind::Upsilon;
  throw ConfigError("expected first_order, total or upsilon", path);
}

EstimatorConfig parse_estimator(const Node& n) {
  EstimatorConfig c;
  n.object({"m1", "m", "M", "outer_sampling", "pair_shifts", "jackknife", "ci_level", "theta_grid", "dependency"});
  c.m1 = n.count("m1", c.m1);
  c.m = n.count("m", c.m);
  c.M = n.count("M", c.M);
  c.pair_shifts = n.count("pair_shifts", c.pair_shifts);
  c.jackknife = n.flag("jackknife", c.jackknife);
  c.ci_level = n.number("ci_level", c.ci_level);
  const std::string os = n.text("outer_sampling", "target");
  if (os == "target")
    c.outer_sampling = OuterSampling::Target;
  else if (os == "reweighted")
    c.outer_sampling = OuterSampling::Reweighted;
  else
    throw ConfigError("expected 'target' or 'reweighted'", n.at("outer_sampling"));
  if (n.has("theta_grid")) {
    const Node g = n.child("theta_grid");
    g.object({"nodes", "weights", "trapezoid"});
    if (g.has("trapezoid")) {
      auto t = g.numbers("trapezoid");
      if (t.size() != 3 || t[2] < 2 || t[2] != std::floor(t[2]))
        throw ConfigError("expected [a, b, n] with integer n >= 2", g.at("trapezoid"));
      c.theta_grid = ThetaGrid::trapezoid(t[0], t[1], static_cast<std::size_t>(t[2]));
    } else {
      ThetaGrid tg{g.numbers("nodes"), {}};
      tg.weights = g.has("weights") ? g.numbers("weights") : std::vector<double>(tg.nodes.size(), 1.0);
      c.theta_grid = tg;
    }
  }
  if (n.has("dependency")) {
    const Node dn = n.child("dependency");
    dn.object({"inner_mc", "inversion_tol", "force_numerical", "analytic"});
    c.dependency.inner_mc = dn.count("inner_mc", c.dependency.inner_mc);
    c.dependency.inversion_tol = dn.number("inversion_tol", c.dependency.inversion_tol);
    c.dependency.force_numerical = dn.flag("force_numerical", false);
  }
  return c;
}

// The uniform-ball problem, when the config describes it exactly.
bool is_ball(const json& j, const InputSpace& space, const WeightFunction& w, const Model& model, double& c) {
  if (model.name() != "quadratic" || model.input_dim() != 3) return false;
  if (w.kind() != WeightKind::IndicatorThreshold || !w.box().lower.empty() || w.box().upper.size() != 1) return false;
  if (j.at("weight").value("source", "outputs") != "outputs") return false;
  c = w.box().upper[0];
  if (!(c > 0.0)) return false;
  const double h = std::sqrt(c);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& m = space.marginal(k);
    if (m.family() != Family::Uniform) return false;
    if (std::fabs(m.support_lo() + h) > 1e-12 * h || std::fabs(m.support_hi() - h) > 1e-12 * h) return false;
  }
  return true;
}

json canonical_form(json j) {
  j.erase("threads");
  j.erase("output");
  return j;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

RunConfig parse_config(const std::string& text, const ConfigOverrides& ov) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("the config must be a JSON object");
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.threads) doc["threads"] = *ov.threads;
  if (ov.out_dir) doc["output"]["dir"] = *ov.out_dir;
  if (ov.kernel) {
    doc["kernels"] = json::array({*ov.kernel});
    doc["screening"]["kernel"] = *ov.kernel;
  }
  if (ov.threshold) doc["screening"]["threshold"] = *ov.threshold;

  const Node root(doc, "");
  root.object({"name", "seed", "threads", "model", "inputs", "weight", "kernels", "subsets", "indices", "estimator",
               "screening", "sample", "converge", "output"});
  RunConfig rc;
  rc.name = root.text("name", "run");
  if (!root.has("seed")) throw ConfigError("a seed is required", "seed");
  const std::uint64_t seed = root.count("seed");
  const std::uint64_t threads = root.count("threads", 1);
  if (threads < 1 || threads > 1024) throw ConfigError("threads must be in 1..1024", "threads");

  ModelPtr model = parse_model(root.child("model"));
  std::shared_ptr<const InputSpace> space;
  try {
    space = std::make_shared<const InputSpace>(parse_inputs(root.child("inputs")));
  } catch (const ConfigError& e) {
    if (!e.path().empty()) throw;
    throw ConfigError(e.what(), "inputs");
  }
  const std::size_t d = space->dim();
  if (model->input_dim() != d)
    throw ConfigError("model takes " + std::to_string(model->input_dim()) + " inputs but " + std::to_string(d) +
                          " marginals are declared",
                      "inputs");
  WeightFunction w = root.has("weight") ? parse_weight(root.child("weight"), model, d) : WeightFunction::constant();
  auto ew = std::make_shared<const EffectiveWeight>(std::move(w), space);

  rc.estimator = root.has("estimator") ? parse_estimator(root.child("estimator")) : EstimatorConfig{};
  rc.estimator.seed = seed;
  rc.estimator.threads = static_cast<unsigned>(threads);
  const bool analytic =
      root.has("estimator") && root.child("estimator").has("dependency")
          ? root.child("estimator").child("dependency").flag("analytic", true)
          : true;
  rc.problem = Problem{rc.name, space, model, ew, {}};
  double c = 0.0;
  if (analytic && root.has("weight") && is_ball(doc, *space, ew->weight(), *model, c))
    rc.problem.analytic = quadratic_ball(c, true).analytic;

  if (root.has("kernels")) {
    const Node ks = root.child("kernels");
    if (!ks.raw().is_array() || ks.raw().empty()) throw ConfigError("expected a non-empty array", ks.path());
    for (std::size_t i = 0; i < ks.raw().size(); ++i) rc.kernels.push_back(parse_kernel(ks.raw().at(i), ks.item(i).path()));
  } else {
    rc.kernels = {KernelSpec::l1(), KernelSpec::quadratic()};
  }

  if (root.has("subsets")) {
    const Node ss = root.child("subsets");
    if (!ss.raw().is_array() || ss.raw().empty()) throw ConfigError("expected a non-empty array", ss.path());
    for (std::size_t i = 0; i < ss.raw().size(); ++i) rc.subsets.push_back(parse_subset(ss.item(i), d));
  } else {
    for (std::size_t j = 0; j < d; ++j) rc.subsets.push_back(SubsetSpec::make(d, {j}));
  }

  if (root.has("indices")) {
    const Node is = root.child("indices");
    if (!is.raw().is_array() || is.raw().empty()) throw ConfigError("expected a non-empty array", is.path());
    for (std::size_t i = 0; i < is.raw().size(); ++i) {
      if (!is.raw().at(i).is_string()) throw ConfigError("expected a string", is.item(i).path());
      rc.kinds.push_back(parse_kind(is.raw().at(i).get<std::string>(), is.item(i).path()));
    }
  } else {
    rc.kinds = {IndexKind::FirstOrder, IndexKind::Total, IndexKind::Upsilon};
  }

  if (root.has("screening")) {
    const Node s = root.child("screening");
    s.object({"threshold", "kernel", "trajectories", "levels", "mode"});
    rc.screening.threshold = s.number("threshold", 0.2);
    if (rc.screening.threshold < 0.0) throw ConfigError("threshold must be >= 0", s.at("threshold"));
    rc.screening.design.trajectories = s.count("trajectories", 50);
    rc.screening.design.levels = s.count("levels", 8);
    if (s.has("kernel")) rc.screening_kernel = parse_kernel(s.raw().at("kernel"), s.at("kernel"));
    if (s.has("mode")) {
      const std::string m = s.text("mode");
      if (m == "independent")
        rc.screening.mode = MuStarMode::Independent;
      else if (m == "dependent")
        rc.screening.mode = MuStarMode::Dependent;
      else
        throw ConfigError("expected 'independent' or 'dependent'", s.at("mode"));
    }
    rc.screening.design.validate();
  } else if (!rc.kernels.empty()) {
    rc.screening_kernel = rc.kernels.front();
  }

  if (root.has("sample")) {
    const Node s = root.child("sample");
    s.object({"n"});
    rc.sample_n = s.count("n", rc.sample_n);
    if (rc.sample_n < 1) throw ConfigError("n must be >= 1", s.at("n"));
  }

  if (root.has("converge")) {
    const Node cv = root.child("converge");
    cv.object({"schedule", "subset", "kind", "reference"});
    ConvergeConfig cc;
    const Node sch = cv.child("schedule");
    if (!sch.raw().is_array() || sch.raw().empty()) throw ConfigError("expected a non-empty array", sch.path());
    for (std::size_t i = 0; i < sch.raw().size(); ++i) {
      const auto& v = sch.raw().at(i);
      if (!v.is_number_integer() || v.get<std::int64_t>() < 30)
        throw ConfigError("expected an integer m >= 30", sch.item(i).path());
      cc.schedule.push_back(v.get<std::size_t>());
    }
    cc.subset = cv.has("subset") ? parse_subset(cv.child("subset"), d) : SubsetSpec::make(d, {0});
    cc.kind = parse_kind(cv.text("kind", "first_order"), cv.at("kind"));
    if (cv.has("reference")) cc.reference = cv.number("reference");
    rc.converge = cc;
  }

  if (root.has("output")) {
    const Node o = root.child("output");
    o.object({"dir"});
    rc.out_dir = o.text("dir", rc.out_dir);
  }

  rc.estimator.validate();
  if (model->needs_theta() && !rc.estimator.theta_grid)
    throw ConfigError("model needs theta; set a grid", "estimator.theta_grid");
  if (rc.converge) {
    for (std::size_t m : rc.converge->schedule)
      if (rc.estimator.M < 10 * m) throw ConfigError("estimator.M must be >= 10 * every scheduled m", "converge.schedule");
  }

  rc.canonical = canonical_form(doc).dump();
  rc.hash = sha256_hex(rc.canonical);
  return rc;
}

RunConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'", "--config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

}  // namespace kbsa
