#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "kbsa/config.hpp"
#include "kbsa/errors.hpp"

using namespace kbsa;
using nlohmann::json;

namespace {

json ball_json() {
  return json::parse(R"({
    "name": "ball", "seed": 3,
    "model": {"kind": "quadratic", "d": 3},
    "inputs": [{"family": "uniform", "lo": -1, "hi": 1, "repeat": 3}],
    "weight": {"kind": "indicator_threshold", "upper": 1.0},
    "estimator": {"m1": 10, "m": 100, "M": 1000}
  })");
}

std::string error_path(const json& j) {
  try {
    parse_config(j.dump());
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

std::string read(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("minimal config and defaults") {
  const auto rc = parse_config(ball_json().dump());
  CHECK(rc.name == "ball");
  CHECK(rc.estimator.seed == 3);
  CHECK(rc.estimator.threads == 1);
  CHECK(rc.kernels.size() == 2);
  CHECK(rc.subsets.size() == 3);
  CHECK(rc.kinds.size() == 3);
  CHECK(rc.problem.model->input_dim() == 3);
  CHECK(static_cast<bool>(rc.problem.analytic));
  CHECK(rc.hash.size() == 64);
  CHECK(rc.estimator.jackknife);
  auto j = ball_json();
  j["estimator"]["jackknife"] = false;
  CHECK_FALSE(parse_config(j.dump()).estimator.jackknife);
  j["estimator"]["jackknife"] = 1;
  CHECK(error_path(j) == "estimator.jackknife");
}

TEST_CASE("ball detection needs the exact setup") {
  auto j = ball_json();
  j["inputs"][0]["hi"] = 2;
  j["inputs"][0]["lo"] = -2;
  CHECK_FALSE(static_cast<bool>(parse_config(j.dump()).problem.analytic));
  j = ball_json();
  j["estimator"]["dependency"] = {{"analytic", false}};
  CHECK_FALSE(static_cast<bool>(parse_config(j.dump()).problem.analytic));
}

TEST_CASE("errors name the offending field") {
  auto j = ball_json();
  j.erase("seed");
  CHECK(error_path(j) == "seed");
  j = ball_json();
  j["estimator"]["m1"] = 1;
  CHECK(error_path(j) == "estimator.m1");
  j = ball_json();
  j["estimator"]["M"] = 999;
  CHECK(error_path(j) == "estimator.M");
  j = ball_json();
  j["estimator"]["bogus"] = 1;
  CHECK(error_path(j) == "estimator.bogus");
  j = ball_json();
  j["weight"]["kind"] = "nope";
  CHECK(error_path(j) == "weight.kind");
  j = ball_json();
  j["inputs"][0]["family"] = "cauchy";
  CHECK(error_path(j) == "inputs[0].family");
  j = ball_json();
  j["subsets"] = {{4}};
  CHECK(error_path(j) == "subsets[0][0]");
  j = ball_json();
  j["kernels"] = {"gauss"};
  CHECK(error_path(j) == "kernels[0]");
  j = ball_json();
  j["inputs"][0]["repeat"] = 2;
  CHECK(error_path(j) == "inputs");
  j = ball_json();
  j["converge"] = {{"schedule", {10}}};
  CHECK(error_path(j) == "converge.schedule[0]");
  j = ball_json();
  j["model"] = {{"kind", "theta_toy"}};
  j["inputs"][0]["repeat"] = 2;
  j.erase("weight");
  CHECK(error_path(j) == "estimator.theta_grid");
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("hash ignores threads, output and key order") {
  auto a = ball_json();
  auto b = ball_json();
  b["threads"] = 4;
  b["output"] = {{"dir", "elsewhere"}};
  const auto ra = parse_config(a.dump()), rb = parse_config(b.dump(2));
  CHECK(ra.hash == rb.hash);
  CHECK(rb.estimator.threads == 4);
  CHECK(rb.out_dir == "elsewhere");
  auto c = ball_json();
  c["seed"] = 4;
  CHECK(parse_config(c.dump()).hash != ra.hash);
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("overrides replace file values") {
  ConfigOverrides ov;
  ov.seed = 11;
  ov.threads = 2;
  ov.out_dir = "o";
  ov.kernel = "lp3";
  ov.threshold = 0.5;
  const auto rc = parse_config(ball_json().dump(), ov);
  CHECK(rc.estimator.seed == 11);
  CHECK(rc.estimator.threads == 2);
  CHECK(rc.out_dir == "o");
  REQUIRE(rc.kernels.size() == 1);
  CHECK(rc.kernels[0] == KernelSpec::lp(3));
  CHECK(rc.screening_kernel == KernelSpec::lp(3));
  CHECK(rc.screening.threshold == 0.5);
  CHECK(rc.hash == parse_config([] {
                     auto j = ball_json();
                     j["seed"] = 11;
                     j["kernels"] = {"lp3"};
                     j["screening"] = {{"kernel", "lp3"}, {"threshold", 0.5}};
                     return j.dump();
                   }())
                       .hash);
}

TEST_CASE("weights, subsets and grids") {
  auto j = ball_json();
  j["subsets"] = json::array({json::array({1, 3}), {{"u", {2}}, {"pi", {3, 1}}}});
  j["kernels"] = json::array({"l1", {{"name", "owen"}, {"p", 2}}});
  const auto rc = parse_config(j.dump());
  CHECK(rc.subsets[0].u == std::vector<std::size_t>{0, 2});
  CHECK(rc.subsets[1].pi == std::vector<std::size_t>{2, 0});
  CHECK(rc.kernels[1] == KernelSpec::owen(2));

  auto g = json::parse(R"({
    "seed": 1, "model": {"kind": "theta_toy"},
    "inputs": [{"family": "uniform", "lo": 0, "hi": 1, "repeat": 2}],
    "weight": {"kind": "functional_loss", "loss": "square", "theta_grid": [0, 1], "upper": 10},
    "estimator": {"m1": 10, "m": 100, "M": 1000, "theta_grid": {"trapezoid": [0, 1, 5]}}
  })");
  const auto rg = parse_config(g.dump());
  CHECK(rg.estimator.theta_grid->nodes.size() == 5);
  CHECK(rg.problem.weight->weight().kind() == WeightKind::FunctionalLoss);

  auto p = json::parse(R"({
    "seed": 1, "model": {"kind": "gsobol4"},
    "inputs": [{"family": "uniform", "lo": 0, "hi": 1, "repeat": 10}],
    "weight": {"kind": "polynomial", "alpha": [20,20,10,10,10,10,10,1,1,1]}
  })");
  CHECK(parse_config(p.dump()).problem.weight->is_product_form());
}

TEST_CASE("shipped configs load") {
  for (const char* f : {"gsobol_alpha0.json", "gsobol_alpha20.json", "quadratic51.json", "constant.json"}) {
    const std::string path = std::string(KBSA_CONFIG_DIR) + "/" + f;
    CHECK_NOTHROW(parse_config(read(path)));
  }
}
