#pragma once

#include <string>
#include <vector>

#include "meshsal/csv.hpp"
#include "meshsal/gaze.hpp"

namespace meshsal {

inline const std::vector<std::string>& gaze_log_header() {
  static const std::vector<std::string> header = {"t_ms", "ox", "oy", "oz", "dx", "dy", "dz",
                                                  "hx",   "hy", "hz", "hdx", "hdy", "hdz"};
  return header;
}

/// Reads a gaze log. Directions are normalized on ingest; near-zero
/// directions and non-increasing timestamps are rejected with the line number.
inline std::vector<GazeSample> load_gaze_log(const std::string& path) {
  const csv::Table table = csv::read(path, gaze_log_header());
  if (table.rows.empty()) throw InputError(path + ": no samples");
  std::vector<GazeSample> log;
  log.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    double v[13];
    for (int k = 0; k < 13; ++k) {
      v[k] = table.number(row, k);
      if (!std::isfinite(v[k])) table.fail(row, "non-finite value");
    }
    GazeSample s;
    s.timestamp_ms = v[0];
    s.gaze_origin = Vec3(v[1], v[2], v[3]);
    s.gaze_direction = Vec3(v[4], v[5], v[6]);
    s.head_position = Vec3(v[7], v[8], v[9]);
    s.head_direction = Vec3(v[10], v[11], v[12]);
    if (s.gaze_direction.norm() < 1e-6) table.fail(row, "gaze direction has near-zero length");
    if (s.head_direction.norm() < 1e-6) table.fail(row, "head direction has near-zero length");
    s.gaze_direction.normalize();
    s.head_direction.normalize();
    if (!log.empty() && !(s.timestamp_ms > log.back().timestamp_ms)) {
      table.fail(row, "timestamps must be strictly increasing");
    }
    log.push_back(s);
  }
  return log;
}

inline std::string format_gaze_log(const std::vector<GazeSample>& log) {
  std::string out;
  for (const auto& h : gaze_log_header()) out += (out.empty() ? "" : ",") + h;
  out += "\n";
  auto vec = [](const Vec3& v) { return csv::format("%.17g,%.17g,%.17g", v.x(), v.y(), v.z()); };
  for (const GazeSample& s : log) {
    out += csv::format("%.17g", s.timestamp_ms) + "," + vec(s.gaze_origin) + "," + vec(s.gaze_direction) + "," +
           vec(s.head_position) + "," + vec(s.head_direction) + "\n";
  }
  return out;
}

inline void save_gaze_log(const std::string& path, const std::vector<GazeSample>& log) {
  csv::write_file(path, format_gaze_log(log));
}

/// `face,w0,w1,w2,start_ms,end_ms,duration_ms` rows.
inline std::string format_fixation_report(const std::vector<Fixation>& fixations) {
  std::string out = "face,w0,w1,w2,start_ms,end_ms,duration_ms\n";
  for (const Fixation& f : fixations) {
    out += std::to_string(f.face) + "," + csv::g9(f.barycentric[0]) + "," + csv::g9(f.barycentric[1]) + "," +
           csv::g9(f.barycentric[2]) + "," + csv::g9(f.start_ms) + "," + csv::g9(f.end_ms) + "," +
           csv::g9(f.duration_ms) + "\n";
  }
  return out;
}

/// Ground truth emitted next to synthetic logs.
inline std::string format_scripted_truth(const std::vector<ScriptedDwell>& truth) {
  std::string out = "face,px,py,pz,start_ms,end_ms\n";
  for (const ScriptedDwell& d : truth) {
    out += std::to_string(d.face) + "," + csv::format("%.17g,%.17g,%.17g", d.model_point.x(), d.model_point.y(),
                                                       d.model_point.z()) +
           "," + csv::g9(d.start_ms) + "," + csv::g9(d.end_ms) + "\n";
  }
  return out;
}

/// Scenario script: `face,duration_ms,saccade_ms` with optional barycentric
/// columns `w0,w1,w2` (all three or none).
inline std::vector<Dwell> load_scenario_dwells(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw InputError("cannot open file: " + path);
  std::string first;
  std::getline(probe, first);
  const bool with_bary = csv::split(first).size() == 6;
  const std::vector<std::string> header = with_bary
                                              ? std::vector<std::string>{"face", "duration_ms", "saccade_ms", "w0", "w1", "w2"}
                                              : std::vector<std::string>{"face", "duration_ms", "saccade_ms"};
  const csv::Table table = csv::read(path, header);
  std::vector<Dwell> dwells;
  for (const auto& row : table.rows) {
    Dwell d;
    d.face = static_cast<int>(table.integer(row, 0));
    d.duration_ms = table.number(row, 1);
    d.saccade_ms = table.number(row, 2);
    if (with_bary) {
      Vec3 w(table.number(row, 3), table.number(row, 4), table.number(row, 5));
      if ((w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-9) table.fail(row, "barycentric weights must be >= 0 and sum to 1");
      d.barycentric = w;
    }
    dwells.push_back(d);
  }
  if (dwells.empty()) throw InputError(path + ": scenario has no dwells");
  return dwells;
}

}  // namespace meshsal
