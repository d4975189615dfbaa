#pragma once

#include <string>
#include <vector>

#include "kbsa/estimators.hpp"
#include "kbsa/screening.hpp"

namespace kbsa {

inline constexpr const char* kVersion = "1.0.0";

struct ReportMeta {
  std::string command;
  std::string name;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t evaluations = 0;
};

// "X1" or "X1+X3" (1-based).
std::string subset_label(const std::vector<std::size_t>& u);

// Shortest decimal that round-trips, so reports are byte-stable.
std::string format_number(double v);

// One row per estimate: u,kernel,kind,value,sqrt_value,std_error,ci_lo,ci_hi,m1,m,M,seed,flags
std::string records_csv(const std::vector<IndexEstimate>& estimates);

// Paper orientation: one row per (kind, kernel) with sqrt-values, one column per subset.
std::string table_csv(const std::vector<IndexEstimate>& estimates, const std::vector<SubsetSpec>& subsets,
                      const std::vector<KernelSpec>& kernels, const std::vector<IndexKind>& kinds);

std::string analyze_json(const ReportMeta& meta, const std::vector<IndexEstimate>& estimates,
                         const std::vector<DenominatorEstimate>& denominators);

std::string screening_json(const ReportMeta& meta, const ScreeningReport& report);

// Header of marginal names, then one row per point.
std::string points_csv(const InputSpace& space, const PointSet& points);

struct ConvergeRow {
  std::size_t m = 0;
  std::uint64_t evaluations = 0;
  IndexEstimate estimate;
  std::optional<double> reference;
};
std::string converge_csv(const std::vector<ConvergeRow>& rows);

// Creates `dir` if needed and writes dir/name.
void write_file(const std::string& dir, const std::string& name, const std::string& content);

}  // namespace kbsa
