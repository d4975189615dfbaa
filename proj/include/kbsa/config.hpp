#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kbsa/estimators.hpp"
#include "kbsa/screening.hpp"
#include "kbsa/testcases.hpp"

namespace kbsa {

struct ConvergeConfig {
  std::vector<std::size_t> schedule;  // values of m
  SubsetSpec subset;
  IndexKind kind = IndexKind::FirstOrder;
  std::optional<double> reference;  // true value, for the error column
};

// Everything one CLI run needs. Built from a JSON document:
//
//   {
//     "name": "...", "seed": 1, "threads": 1,
//     "model":   {"kind": "gsobol4"} | {"kind": "quadratic", "d": 3} | ...,
//     "inputs":  [{"family": "uniform", "lo": 0, "hi": 1, "repeat": 10}],
//     "weight":  {"kind": "polynomial", "alpha": [...]} | ...,
//     "kernels": ["l1", "quadratic", {"name": "lp", "p": 3}],
//     "subsets": [[1], [2, 3], {"u": [1], "pi": [3, 2]}],     (1-based)
//     "indices": ["first_order", "total", "upsilon"],
//     "estimator": {"m1": 500, "m": 5000, "M": 50000, ...},
//     "screening": {"threshold": 0.2, "kernel": "l1", ...},
//     "sample": {"n": 1000},
//     "converge": {"schedule": [...], "subset": [1], "kind": "first_order"},
//     "output": {"dir": "out"}
//   }
//
// Unknown keys are rejected. The README documents every field.
struct RunConfig {
  std::string name;
  Problem problem;
  std::vector<KernelSpec> kernels;
  std::vector<SubsetSpec> subsets;
  std::vector<IndexKind> kinds;
  EstimatorConfig estimator;
  ScreeningConfig screening;
  KernelSpec screening_kernel = KernelSpec::l1();
  std::size_t sample_n = 1000;
  std::optional<ConvergeConfig> converge;
  std::string out_dir = "out";
  // Canonical JSON (sorted keys, no threads/output) and its SHA-256.
  std::string canonical;
  std::string hash;
};

// Values from command-line flags; they replace the file's fields.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> kernel;
  std::optional<double> threshold;
};

RunConfig parse_config(const std::string& text, const ConfigOverrides& overrides = {});
RunConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});

std::string sha256_hex(const std::string& data);

}  // namespace kbsa
