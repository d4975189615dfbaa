#include "kbsa/report.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>

#include "json.hpp"
#include "kbsa/errors.hpp"

namespace kbsa {

using nlohmann::ordered_json;

std::string subset_label(const std::vector<std::size_t>& u) {
  if (u.empty()) return "none";
  std::string s;
  for (std::size_t k = 0; k < u.size(); ++k) s += (k ? "+X" : "X") + std::to_string(u[k] + 1);
  return s;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::string join_flags(const std::vector<std::string>& f) {
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? ";" : "") + f[i];
  return s;
}

ordered_json to_json(const IndexEstimate& e) {
  ordered_json j;
  std::vector<std::size_t> u1;
  for (std::size_t v : e.u) u1.push_back(v + 1);
  j["u"] = u1;
  j["kernel"] = e.kernel;
  j["kind"] = to_string(e.kind);
  j["value"] = e.value;
  j["sqrt_value"] = e.sqrt_value;
  j["std_error"] = e.std_error;
  j["sqrt_std_error"] = e.sqrt_std_error;
  j["ci_lo"] = e.ci.lo;
  j["ci_hi"] = e.ci.hi;
  j["ci_level"] = e.level;
  j["m1"] = e.m1;
  j["m"] = e.m;
  j["M"] = e.M;
  j["seed"] = e.seed;
  j["evaluations"] = e.evaluations;
  j["flags"] = e.flags();
  return j;
}

ordered_json meta_json(const ReportMeta& m) {
  ordered_json j;
  j["command"] = m.command;
  j["name"] = m.name;
  j["config_hash"] = m.config_hash;
  j["version"] = kVersion;
  j["seed"] = m.seed;
  j["evaluations"] = m.evaluations;
  return j;
}

}  // namespace

std::string records_csv(const std::vector<IndexEstimate>& estimates) {
  std::string s = "u,kernel,kind,value,sqrt_value,std_error,ci_lo,ci_hi,m1,m,M,seed,flags\n";
  for (const auto& e : estimates) {
    s += subset_label(e.u) + "," + e.kernel + "," + to_string(e.kind) + "," + format_number(e.value) + "," +
         format_number(e.sqrt_value) + "," + format_number(e.std_error) + "," + format_number(e.ci.lo) + "," +
         format_number(e.ci.hi) + "," + std::to_string(e.m1) + "," + std::to_string(e.m) + "," +
         std::to_string(e.M) + "," + std::to_string(e.seed) + "," + join_flags(e.flags()) + "\n";
  }
  return s;
}

std::string table_csv(const std::vector<IndexEstimate>& estimates, const std::vector<SubsetSpec>& subsets,
                      const std::vector<KernelSpec>& kernels, const std::vector<IndexKind>& kinds) {
  std::map<std::tuple<int, std::string, std::vector<std::size_t>>, double> cell;
  for (const auto& e : estimates) cell[{static_cast<int>(e.kind), e.kernel, e.u}] = e.sqrt_value;
  std::string s = "index,kernel";
  for (const auto& u : subsets) s += "," + subset_label(u.u);
  s += "\n";
  char buf[32];
  for (IndexKind kind : kinds)
    for (const auto& k : kernels) {
      s += "sqrt_" + to_string(kind) + "," + k.name();
      for (const auto& u : subsets) {
        auto it = cell.find({static_cast<int>(kind), k.name(), u.u});
        if (it == cell.end()) {
          s += ",";
          continue;
        }
        std::snprintf(buf, sizeof buf, ",%.3f", it->second);
        s += buf;
      }
      s += "\n";
    }
  return s;
}

std::string analyze_json(const ReportMeta& meta, const std::vector<IndexEstimate>& estimates,
                         const std::vector<DenominatorEstimate>& denominators) {
  ordered_json j;
  j["meta"] = meta_json(meta);
  j["denominators"] = ordered_json::array();
  for (const auto& d : denominators) j["denominators"].push_back({{"kernel", d.kernel}, {"value", d.value}, {"std_error", d.std_error}});
  j["indices"] = ordered_json::array();
  for (const auto& e : estimates) j["indices"].push_back(to_json(e));
  return j.dump(2) + "\n";
}

std::string screening_json(const ReportMeta& meta, const ScreeningReport& r) {
  ordered_json j;
  j["meta"] = meta_json(meta);
  j["kernel"] = r.kernel;
  j["threshold"] = r.threshold;
  j["mu_star_mode"] = to_string(r.mode);
  j["note"] = r.note();
  j["inputs"] = ordered_json::array();
  for (const auto& e : r.entries) {
    ordered_json row;
    row["input"] = "X" + std::to_string(e.input + 1);
    row["upsilon"] = to_json(e.upsilon);
    row["mu_star"] = e.mu_star.value;
    row["mu_star_std_error"] = e.mu_star.std_error;
    row["rank"] = e.rank;
    row["important"] = e.important;
    j["inputs"].push_back(row);
  }
  std::vector<std::string> imp;
  for (std::size_t i : r.important()) imp.push_back("X" + std::to_string(i + 1));
  j["important"] = imp;
  return j.dump(2) + "\n";
}

std::string points_csv(const InputSpace& space, const PointSet& points) {
  std::string s;
  for (std::size_t j = 0; j < space.dim(); ++j) s += (j ? "," : "") + ("X" + std::to_string(j + 1) + ":" + space.marginal(j).name());
  s += "\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.dim(); ++j) s += (j ? "," : "") + format_number(points(i, j));
    s += "\n";
  }
  return s;
}

std::string converge_csv(const std::vector<ConvergeRow>& rows) {
  std::string s = "m,evaluations,value,sqrt_value,std_error,ci_lo,ci_hi,abs_error\n";
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    s += std::to_string(r.m) + "," + std::to_string(r.evaluations) + "," + format_number(e.value) + "," +
         format_number(e.sqrt_value) + "," + format_number(e.std_error) + "," + format_number(e.ci.lo) + "," +
         format_number(e.ci.hi) + "," + (r.reference ? format_number(std::fabs(e.sqrt_value - *r.reference)) : "") +
         "\n";
  }
  return s;
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message(), "output.dir");
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw ConfigError("cannot write '" + path.string() + "'", "output.dir");
}

}  // namespace kbsa
