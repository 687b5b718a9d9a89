#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asdqn/harness/format.hpp"
#include "asdqn/harness/runner.hpp"

namespace asdqn::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kSummaryHeader = "variant,row_type,iteration,n_runs,eval_return_mean,eval_return_var";
inline constexpr int kFinalWindow = 10;

struct RunData {
  fs::path directory;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<double> eval_means;  // index = iteration - 1
};

/// Loads one run directory (manifest.json + iterations.csv). Throws with a
/// readable reason on missing or malformed input.
inline RunData load_run(const fs::path& dir) {
  RunData run{dir, {}, 0, {}};
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest.json");
  const json manifest = json::parse(mf, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("variant") || !manifest["variant"].is_string()) {
    throw std::runtime_error("corrupt manifest.json");
  }
  run.variant = manifest["variant"].get<std::string>();
  if (manifest.contains("seed") && manifest["seed"].is_number_unsigned()) run.seed = manifest["seed"].get<std::uint64_t>();

  std::ifstream csv(dir / "iterations.csv");
  if (!csv) throw std::runtime_error("missing iterations.csv");
  std::string line;
  if (!std::getline(csv, line) || split_csv_line(line) != split_csv_line(kIterationsHeader)) {
    throw std::runtime_error("iterations.csv has an unexpected header");
  }
  int expected = 1;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw std::runtime_error("iterations.csv row " + std::to_string(expected) + " has wrong width");
    if (f[0] != std::to_string(expected)) throw std::runtime_error("iterations.csv rows out of order");
    const auto eval = parse_optional_double(f[2]);
    if (!eval) throw std::runtime_error("iterations.csv row " + std::to_string(expected) + " lacks eval_return_mean");
    run.eval_means.push_back(*eval);
    ++expected;
  }
  if (run.eval_means.empty()) throw std::runtime_error("iterations.csv has no rows");
  return run;
}

/// Expands each argument: a directory holding iterations.csv is a run; any
/// other directory contributes its immediate subdirectories that hold
/// iterations.csv or manifest.json with a variant.
inline std::vector<fs::path> expand_run_dirs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& p : inputs) {
    if (fs::exists(p / "iterations.csv") || !fs::is_directory(p)) {
      out.push_back(p);
      continue;
    }
    std::vector<fs::path> children;
    for (const auto& entry : fs::directory_iterator(p)) {
      if (entry.is_directory() && (fs::exists(entry.path() / "iterations.csv") || fs::exists(entry.path() / "manifest.json"))) {
        children.push_back(entry.path());
      }
    }
    if (children.empty()) {
      out.push_back(p);
    } else {
      std::sort(children.begin(), children.end());
      out.insert(out.end(), children.begin(), children.end());
    }
  }
  return out;
}

struct SummaryRow {
  std::string variant;
  std::string row_type;  // "iteration" or "final10"
  std::optional<int> iteration;
  std::size_t n_runs = 0;
  double eval_return_mean = 0.0;
  std::optional<double> eval_return_var;
};

struct Summary {
  std::vector<SummaryRow> rows;
  std::vector<std::pair<fs::path, std::string>> errors;
};

/// Per variant: for every iteration, mean and sample variance of the
/// per-run eval_return_mean across runs that reached it; then one "final10"
/// row aggregating each run's mean over its last ten iterations.
inline Summary summarize(const std::vector<fs::path>& run_dirs) {
  Summary summary;
  std::map<std::string, std::vector<RunData>> by_variant;
  for (const auto& dir : expand_run_dirs(run_dirs)) {
    try {
      RunData run = load_run(dir);
      by_variant[run.variant].push_back(std::move(run));
    } catch (const std::exception& e) {
      summary.errors.emplace_back(dir, e.what());
    }
  }
  for (const auto& [variant, runs] : by_variant) {
    std::size_t longest = 0;
    for (const auto& r : runs) longest = std::max(longest, r.eval_means.size());
    for (std::size_t i = 0; i < longest; ++i) {
      std::vector<double> xs;
      for (const auto& r : runs) {
        if (i < r.eval_means.size()) xs.push_back(r.eval_means[i]);
      }
      summary.rows.push_back({variant, "iteration", static_cast<int>(i + 1), xs.size(), mean_of(xs), sample_variance(xs)});
    }
    std::vector<double> finals;
    for (const auto& r : runs) {
      const std::size_t k = std::min<std::size_t>(kFinalWindow, r.eval_means.size());
      finals.push_back(mean_of(std::vector<double>(r.eval_means.end() - static_cast<std::ptrdiff_t>(k), r.eval_means.end())));
    }
    summary.rows.push_back({variant, "final10", std::nullopt, finals.size(), mean_of(finals), sample_variance(finals)});
  }
  return summary;
}

inline void write_summary_csv(const Summary& s, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kSummaryHeader << '\n';
  for (const auto& r : s.rows) {
    out << r.variant << ',' << r.row_type << ',' << (r.iteration ? std::to_string(*r.iteration) : std::string{}) << ','
        << r.n_runs << ',' << format_double(r.eval_return_mean) << ',' << format_optional(r.eval_return_var) << '\n';
  }
}

}  // namespace asdqn::harness
