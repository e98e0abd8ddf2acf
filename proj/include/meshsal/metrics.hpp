#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "meshsal/csv.hpp"
#include "meshsal/error.hpp"
#include "meshsal/saliency_map.hpp"

namespace meshsal {

inline constexpr double kKldEpsilon = 1e-12;

struct MetricReport {
  double cc = 0.0;
  double sim = 0.0;
  double kld = 0.0;
  double se = 0.0;
  bool cc_defined = true;  // false when either map is constant
};

/// CC on raw values; SIM on sum-normalized maps; KLD(truth || pred) on maps
/// smoothed by a uniform epsilon before normalizing; SE as the mean squared
/// difference of max-normalized maps.
inline MetricReport compare_maps(const SaliencyMap& pred, const SaliencyMap& truth) {
  const std::size_t n = truth.size();
  if (pred.size() != n) {
    throw InputError("saliency maps differ in length: " + std::to_string(pred.size()) + " vs " + std::to_string(n));
  }
  if (n == 0) throw InputError("saliency maps are empty");
  validate_saliency(pred);
  validate_saliency(truth);
  const double truth_sum = truth.total();
  if (!(truth_sum > 0.0)) throw InputError("reference saliency map is all zero");
  const double pred_sum = pred.total();

  MetricReport r;
  {
    const double mp = pred_sum / n;
    const double mt = truth_sum / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dp = pred.values[i] - mp;
      const double dt = truth.values[i] - mt;
      sxy += dp * dt;
      sxx += dp * dp;
      syy += dt * dt;
    }
    auto constant = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (!constant(pred.values) && !constant(truth.values) && sxx > 0.0 && syy > 0.0) {
      r.cc = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    } else {
      r.cc = 0.0;
      r.cc_defined = false;
    }
  }
  {
    double sim = 0.0;
    if (pred_sum > 0.0) {
      for (std::size_t i = 0; i < n; ++i) sim += std::min(pred.values[i] / pred_sum, truth.values[i] / truth_sum);
    }
    r.sim = std::clamp(sim, 0.0, 1.0);
  }
  {
    const double ps = pred_sum + n * kKldEpsilon;
    const double ts = truth_sum + n * kKldEpsilon;
    double kld = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = (truth.values[i] + kKldEpsilon) / ts;
      const double p = (pred.values[i] + kKldEpsilon) / ps;
      kld += q * std::log(q / p);
    }
    r.kld = std::max(0.0, kld);
  }
  {
    const SaliencyMap ph = pred.max_normalized();
    const SaliencyMap th = truth.max_normalized();
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = ph.values[i] - th.values[i];
      se += d * d;
    }
    r.se = se / n;
  }
  return r;
}

/// `cc=...,sim=...,kld=...,se=...`: bounded metrics with nine decimals,
/// unbounded ones with nine significant digits.
inline std::string format_metric_record(const MetricReport& r) {
  return csv::format("cc=%.9f,sim=%.9f,kld=%.9g,se=%.9g", r.cc, r.sim, r.kld, r.se) +
         (r.cc_defined ? "" : ",cc_undefined=1");
}

inline std::string format_metric_pretty(const MetricReport& r) {
  std::string out;
  out += csv::format("  CC  (correlation)      %12.9f%s\n", r.cc, r.cc_defined ? "" : "  (undefined: constant map)");
  out += csv::format("  SIM (similarity)       %12.9f\n", r.sim);
  out += csv::format("  KLD (truth || pred)    %12.9g\n", r.kld);
  out += csv::format("  SE  (mean sq. error)   %12.9g\n", r.se);
  return out;
}

// Sampling analysis ---------------------------------------------------------

struct AnalysisParams {
  int repeats = 100;
  int samples_per_repeat = 1000;
  double salient_quantile = 0.2;
  std::uint64_t seed = 0;
};

struct AnalysisReport {
  double curvature_concordance = 0.0;
  double variance_concordance = 0.0;
  int repeats = 0;
  int samples_per_repeat = 0;
  double salient_quantile = 0.0;
  std::size_t salient_faces = 0;
  std::size_t non_salient_faces = 0;
};

/// Linear-interpolated quantile of unsorted values (q in [0,1]).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace detail {

// Area-proportional sampling from a subset of faces via inverse CDF.
class AreaSampler {
 public:
  AreaSampler(const std::vector<int>& faces, const std::vector<double>& areas) : faces_(faces) {
    cdf_.reserve(faces.size());
    double acc = 0.0;
    for (int f : faces) {
      acc += areas[f];
      cdf_.push_back(acc);
    }
  }

  template <typename Rng>
  int draw(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cdf_.back());
    const double x = u(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
    return faces_[std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), faces_.size() - 1)];
  }

 private:
  std::vector<int> faces_;
  std::vector<double> cdf_;
};

}  // namespace detail

/// Salient faces are those above the (1 - quantile) saliency quantile. Each
/// repeat draws (salient, non-salient) face pairs with area-proportional
/// probability and counts how often the salient face's metric is strictly
/// larger.
inline AnalysisReport sampling_analysis(const SaliencyMap& map, const std::vector<double>& curvature,
                                        const std::vector<double>& variance, const std::vector<double>& areas,
                                        const AnalysisParams& params = {}) {
  const std::size_t n = map.size();
  if (curvature.size() != n || variance.size() != n || areas.size() != n) {
    throw InputError("analysis inputs differ in length");
  }
  if (params.repeats < 1 || params.samples_per_repeat < 1) throw InputError("repeats and samples must be positive");
  if (!(params.salient_quantile > 0.0 && params.salient_quantile < 1.0)) {
    throw InputError("salient quantile must be in (0, 1)");
  }
  const double threshold = quantile(map.values, 1.0 - params.salient_quantile);
  std::vector<int> salient, rest;
  for (std::size_t f = 0; f < n; ++f) (map.values[f] > threshold ? salient : rest).push_back(static_cast<int>(f));
  if (salient.empty() || rest.empty()) throw InputError("salient or non-salient face set is empty (constant map?)");

  const detail::AreaSampler draw_salient(salient, areas);
  const detail::AreaSampler draw_rest(rest, areas);
  std::mt19937_64 rng(params.seed);
  double curv_sum = 0.0;
  double var_sum = 0.0;
  for (int r = 0; r < params.repeats; ++r) {
    int curv_hits = 0;
    int var_hits = 0;
    for (int s = 0; s < params.samples_per_repeat; ++s) {
      const int a = draw_salient.draw(rng);
      const int b = draw_rest.draw(rng);
      curv_hits += curvature[a] > curvature[b];
      var_hits += variance[a] > variance[b];
    }
    curv_sum += static_cast<double>(curv_hits) / params.samples_per_repeat;
    var_sum += static_cast<double>(var_hits) / params.samples_per_repeat;
  }
  AnalysisReport report;
  report.curvature_concordance = curv_sum / params.repeats;
  report.variance_concordance = var_sum / params.repeats;
  report.repeats = params.repeats;
  report.samples_per_repeat = params.samples_per_repeat;
  report.salient_quantile = params.salient_quantile;
  report.salient_faces = salient.size();
  report.non_salient_faces = rest.size();
  return report;
}

inline std::string format_analysis_record(const AnalysisReport& r) {
  return csv::format("curvature_concordance=%.9f,variance_concordance=%.9f,repeats=%d,samples_per_repeat=%d,"
                     "salient_quantile=%.9g",
                     r.curvature_concordance, r.variance_concordance, r.repeats, r.samples_per_repeat,
                     r.salient_quantile);
}

inline std::string format_analysis_pretty(const AnalysisReport& r) {
  std::string out;
  out += csv::format("  salient faces            %zu (top %.1f%%)\n", r.salient_faces, 100.0 * r.salient_quantile);
  out += csv::format("  non-salient faces        %zu\n", r.non_salient_faces);
  out += csv::format("  curvature concordance    %.2f%%\n", 100.0 * r.curvature_concordance);
  out += csv::format("  variance concordance     %.2f%%\n", 100.0 * r.variance_concordance);
  out += csv::format("  protocol                 %d repeats x %d pairs\n", r.repeats, r.samples_per_repeat);
  return out;
}

// Baseline predictor --------------------------------------------------------

/// Average ranks mapped to [0,1]; ties share their mean rank.
inline std::vector<double> rank_normalize(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = rank / static_cast<double>(n - 1);
    i = j + 1;
  }
  return out;
}

struct BaselineWeights {
  double curvature = 1.0;
  double variance = 1.0;
};

/// Heuristic saliency: blend of rank-normalized curvature and texture variance.
inline SaliencyMap baseline_predict(const std::vector<double>& curvature, const std::vector<double>& variance,
                                    const BaselineWeights& w = {}) {
  if (curvature.size() != variance.size()) throw InputError("baseline inputs differ in length");
  if (w.curvature < 0.0 || w.variance < 0.0 || (w.curvature == 0.0 && w.variance == 0.0)) {
    throw InputError("baseline weights must be nonnegative and not both zero");
  }
  auto constant = [](const std::vector<double>& v) {
    return v.empty() || std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  const bool curv_flat = w.curvature == 0.0 || constant(curvature);
  const bool var_flat = w.variance == 0.0 || constant(variance);
  if (curv_flat && var_flat) throw InputError("baseline inputs are constant");
  const auto rc = rank_normalize(curvature);
  const auto rv = rank_normalize(variance);
  SaliencyMap map;
  map.values.resize(curvature.size());
  for (std::size_t i = 0; i < curvature.size(); ++i) map.values[i] = w.curvature * rc[i] + w.variance * rv[i];
  return map.sum_normalized();
}

}  // namespace meshsal
