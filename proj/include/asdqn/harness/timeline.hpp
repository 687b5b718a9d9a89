#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asdqn/harness/format.hpp"

namespace asdqn::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kTimelineHeader = "step,decision,avg_old,avg_new";

struct TimelineRow {
  std::int64_t step = 0;
  std::string decision;
  std::optional<double> avg_old;
  std::optional<double> avg_new;
};

inline std::vector<TimelineRow> read_sync_events(const fs::path& run_dir) {
  std::ifstream in(run_dir / "sync_events.jsonl");
  if (!in) throw std::runtime_error("missing " + (run_dir / "sync_events.jsonl").string());
  std::vector<TimelineRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto opt_number = [](const json& j, const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step") || !j.contains("decision")) {
      throw std::runtime_error("sync_events.jsonl line " + std::to_string(line_no) + " is malformed");
    }
    rows.push_back({j["step"].get<std::int64_t>(), j["decision"].get<std::string>(), opt_number(j, "avg_old"),
                    opt_number(j, "avg_new")});
  }
  return rows;
}

/// Writes <run_dir>/timeline.csv (step, decision, avg_old, avg_new) and
/// returns its path.
inline fs::path sync_timeline(const fs::path& run_dir) {
  const auto rows = read_sync_events(run_dir);
  const fs::path path = run_dir / "timeline.csv";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kTimelineHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << r.decision << ',' << format_optional(r.avg_old) << ',' << format_optional(r.avg_new) << '\n';
  }
  return path;
}

}  // namespace asdqn::harness
