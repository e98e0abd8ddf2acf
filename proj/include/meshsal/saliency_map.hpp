#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "meshsal/csv.hpp"
#include "meshsal/error.hpp"

namespace meshsal {

/// One nonnegative saliency density per face.
struct SaliencyMap {
  std::vector<double> values;
  bool normalized = false;

  std::size_t size() const { return values.size(); }

  double total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

  double max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

  /// Index of the largest value; ties resolve to the smallest index.
  int argmax() const {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
  }

  /// Returns a copy scaled to sum 1. Throws when the map is all zero.
  SaliencyMap sum_normalized() const {
    const double sum = total();
    if (!(sum > 0.0)) throw InputError("saliency map has zero total");
    SaliencyMap out{values, true};
    for (double& v : out.values) v /= sum;
    return out;
  }

  /// Returns a copy scaled so its maximum is 1 (unchanged if all zero).
  SaliencyMap max_normalized() const {
    SaliencyMap out{values, false};
    const double m = max();
    if (m > 0.0)
      for (double& v : out.values) v /= m;
    return out;
  }
};

inline void validate_saliency(const SaliencyMap& map) {
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (!(map.values[i] >= 0.0) || !std::isfinite(map.values[i])) {
      throw InputError("saliency value at face " + std::to_string(i) + " is negative or not finite");
    }
  }
}

/// `face_index,value` rows with a header; values keep nine significant digits.
inline std::string format_saliency_csv(const SaliencyMap& map) {
  std::string out = "face_index,value\n";
  for (std::size_t f = 0; f < map.values.size(); ++f) out += std::to_string(f) + "," + csv::g9(map.values[f]) + "\n";
  return out;
}

inline void save_saliency(const std::string& path, const SaliencyMap& map) {
  csv::write_file(path, format_saliency_csv(map));
}

/// Reads a saliency map. Face indices must cover 0..F-1 exactly once.
inline SaliencyMap load_saliency(const std::string& path) {
  const csv::Table table = csv::read(path, {"face_index", "value"});
  if (table.rows.empty()) throw InputError(path + ": no samples (saliency map has no rows)");
  SaliencyMap map;
  map.values.assign(table.rows.size(), 0.0);
  std::vector<char> seen(table.rows.size(), 0);
  for (const auto& row : table.rows) {
    const long long f = table.integer(row, 0);
    if (f < 0 || f >= static_cast<long long>(map.values.size()) || seen[f]) {
      table.fail(row, "face index " + row.fields[0] + " out of range or repeated");
    }
    seen[f] = 1;
    const double v = table.number(row, 1);
    if (!(v >= 0.0) || !std::isfinite(v)) table.fail(row, "saliency value must be finite and nonnegative");
    map.values[f] = v;
  }
  const double sum = map.total();
  map.normalized = std::abs(sum - 1.0) <= 1e-6;
  return map;
}

}  // namespace meshsal
