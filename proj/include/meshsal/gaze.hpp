#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "meshsal/error.hpp"
#include "meshsal/mesh.hpp"
#include "meshsal/parallel.hpp"
#include "meshsal/raycast.hpp"
#include "meshsal/saliency_map.hpp"

namespace meshsal {

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Angle between two directions in degrees, accurate for small angles.
inline double angle_deg(const Vec3& a, const Vec3& b) { return rad_to_deg(std::atan2(a.cross(b).norm(), a.dot(b))); }

/// One eye-tracker record in the world frame.
struct GazeSample {
  double timestamp_ms = 0.0;
  Vec3 gaze_origin = Vec3::Zero();
  Vec3 gaze_direction = Vec3::UnitZ();
  Vec3 head_position = Vec3::Zero();
  Vec3 head_direction = Vec3::UnitZ();
};

/// Turntable motion of the stimulus: rotation about `axis` through `pivot`
/// by sign * speed * (t - t0) degrees. sign = -1 is clockwise seen from +axis.
struct RotationSchedule {
  Vec3 axis = Vec3::UnitY();
  double angular_speed_deg_s = 15.0;
  double sign = -1.0;
  double t0_ms = 0.0;
  Vec3 pivot = Vec3::Zero();

  /// Model-to-world angle at time t, reduced to (-360, 360).
  double angle_deg(double t_ms) const {
    return std::fmod(sign * angular_speed_deg_s * (t_ms - t0_ms) / 1000.0, 360.0);
  }

  Mat3 model_to_world(double t_ms) const {
    return Eigen::AngleAxisd(deg_to_rad(angle_deg(t_ms)), axis.normalized()).toRotationMatrix();
  }
  Mat3 world_to_model(double t_ms) const {
    return Eigen::AngleAxisd(-deg_to_rad(angle_deg(t_ms)), axis.normalized()).toRotationMatrix();
  }

  Vec3 point_to_world(const Vec3& p, double t_ms) const { return pivot + model_to_world(t_ms) * (p - pivot); }
  Vec3 point_to_model(const Vec3& p, double t_ms) const { return pivot + world_to_model(t_ms) * (p - pivot); }
};

inline void validate_schedule(const RotationSchedule& s) {
  if (!(s.angular_speed_deg_s >= 0.0)) throw InputError("angular speed must be nonnegative");
  if (!(s.axis.norm() > 1e-12)) throw InputError("rotation axis must be nonzero");
  if (s.sign != 1.0 && s.sign != -1.0) throw InputError("rotation sign must be +1 or -1");
}

/// Expresses a world-frame gaze ray in the static model frame.
inline Ray world_to_model(const GazeSample& sample, const RotationSchedule& schedule) {
  const Mat3 r = schedule.world_to_model(sample.timestamp_ms);
  Ray ray;
  ray.origin = schedule.pivot + r * (sample.gaze_origin - schedule.pivot);
  ray.direction = (r * sample.gaze_direction).normalized();
  return ray;
}

/// Inverse of world_to_model: the model-frame ray expressed in the world frame at time t.
inline Ray model_to_world(const Ray& model_ray, double t_ms, const RotationSchedule& schedule) {
  const Mat3 r = schedule.model_to_world(t_ms);
  Ray ray = model_ray;
  ray.origin = schedule.pivot + r * (model_ray.origin - schedule.pivot);
  ray.direction = (r * model_ray.direction).normalized();
  return ray;
}

struct SampleHit {
  double timestamp_ms = 0.0;
  Vec3 world_direction = Vec3::UnitZ();
  Ray model_ray;
  std::optional<Hit> hit;
};

/// Casts every sample against the model. Back-facing hits are dropped.
inline std::vector<SampleHit> intersect_log(const std::vector<GazeSample>& log, const TexturedMesh& mesh, const Bvh& bvh,
                                            const RotationSchedule& schedule) {
  if (log.empty()) throw InputError("no samples in gaze log");
  std::vector<SampleHit> out(log.size());
  parallel_for(log.size(), [&](std::size_t i) {
    SampleHit& sh = out[i];
    sh.timestamp_ms = log[i].timestamp_ms;
    sh.world_direction = log[i].gaze_direction;
    sh.model_ray = world_to_model(log[i], schedule);
    auto hit = closest_hit(bvh, mesh, sh.model_ray);
    if (hit && mesh.face_normal(hit->face).dot(sh.model_ray.origin - hit->point) > 0.0) sh.hit = hit;
  });
  return out;
}

struct IvtParams {
  double velocity_threshold_deg_s = 30.0;
  double min_fixation_duration_ms = 100.0;
  double merge_angle_deg = 0.5;
  double merge_gap_ms = 75.0;
  /// Sample gaps above this multiple of the median interval split the log.
  double gap_factor = 3.0;
};

/// A dwell anchored to a surface point of the static model.
struct Fixation {
  int face = -1;
  Vec3 barycentric = Vec3::Zero();
  Vec3 surface_point = Vec3::Zero();
  double start_ms = 0.0;
  double end_ms = 0.0;
  double duration_ms = 0.0;
  double mean_view_distance = 0.0;
  Vec3 viewpoint = Vec3::Zero();  // mean model-frame eye position
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Builds a fixation from sample indices with per-sample time coverage.
inline Fixation make_fixation(const TexturedMesh& mesh, const std::vector<SampleHit>& hits,
                              const std::vector<std::size_t>& members, const std::vector<double>& cover,
                              double start_ms, double end_ms) {
  std::map<int, double> per_face;
  for (std::size_t i : members) per_face[hits[i].hit->face] += cover[i];
  int modal = -1;
  double best = -1.0;
  for (const auto& [face, w] : per_face) {
    if (w > best) {
      best = w;
      modal = face;
    }
  }
  Vec3 point = Vec3::Zero();
  double weight = 0.0;
  double distance = 0.0;
  Vec3 eye = Vec3::Zero();
  double eye_weight = 0.0;
  for (std::size_t i : members) {
    point += cover[i] * hits[i].hit->point;
    distance += cover[i] * hits[i].hit->t;
    weight += cover[i];
    if (hits[i].hit->face == modal) {
      eye += cover[i] * hits[i].model_ray.origin;
      eye_weight += cover[i];
    }
  }
  point /= weight;
  Fixation fx;
  fx.face = modal;
  fx.barycentric = closest_point_barycentric(point, mesh.corner(modal, 0), mesh.corner(modal, 1), mesh.corner(modal, 2));
  fx.surface_point = fx.barycentric[0] * mesh.corner(modal, 0) + fx.barycentric[1] * mesh.corner(modal, 1) +
                     fx.barycentric[2] * mesh.corner(modal, 2);
  fx.start_ms = start_ms;
  fx.end_ms = end_ms;
  fx.duration_ms = end_ms - start_ms;
  fx.mean_view_distance = distance / weight;
  fx.viewpoint = eye / eye_weight;
  return fx;
}

}  // namespace detail

/// Velocity-threshold (I-VT) fixation identification over intersected samples.
///
/// Angular velocity uses consecutive world-frame gaze directions. Runs of
/// sub-threshold samples that hit the mesh form candidate groups; groups
/// shorter than the minimum duration are dropped, then neighbours that are
/// close in time and visual angle are merged.
inline std::vector<Fixation> classify_fixations(const std::vector<SampleHit>& hits, const TexturedMesh& mesh,
                                                const IvtParams& params = {}) {
  if (hits.empty()) throw InputError("no samples in gaze log");
  const std::size_t n = hits.size();
  if (n < 2) return {};

  std::vector<double> dt(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    dt[i] = hits[i + 1].timestamp_ms - hits[i].timestamp_ms;
    if (!(dt[i] > 0.0)) throw InputError("gaze timestamps must be strictly increasing");
  }
  const double period = detail::median(dt);
  const double split_gap = params.gap_factor * period;
  auto linked = [&](std::size_t i) { return dt[i] <= split_gap; };  // samples i and i+1 share a segment

  std::vector<double> velocity(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && linked(i - 1)) {
      velocity[i] = angle_deg(hits[i - 1].world_direction, hits[i].world_direction) / (dt[i - 1] / 1000.0);
    } else if (i + 1 < n && linked(i)) {
      velocity[i] = angle_deg(hits[i].world_direction, hits[i + 1].world_direction) / (dt[i] / 1000.0);
    }
  }
  std::vector<double> cover(n);
  for (std::size_t i = 0; i < n; ++i) cover[i] = (i + 1 < n && linked(i)) ? std::min(period, dt[i]) : period;

  struct Group {
    std::vector<std::size_t> members;
    double start = 0.0;
    double end = 0.0;
  };
  std::vector<Group> groups;
  std::optional<Group> open;
  auto close = [&] {
    if (open) {
      const std::size_t last = open->members.back();
      open->end = hits[last].timestamp_ms + cover[last];
      if (open->end - open->start >= params.min_fixation_duration_ms) groups.push_back(std::move(*open));
      open.reset();
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    const bool candidate = velocity[i] < params.velocity_threshold_deg_s && hits[i].hit.has_value();
    if (!candidate) {
      close();
      continue;
    }
    if (open && !linked(open->members.back())) close();
    if (!open) open = Group{{}, hits[i].timestamp_ms, 0.0};
    open->members.push_back(i);
  }
  close();

  std::vector<Fixation> fixations;
  std::vector<Group> merged;
  for (auto& g : groups) {
    Fixation fx = detail::make_fixation(mesh, hits, g.members, cover, g.start, g.end);
    if (!merged.empty()) {
      const Fixation& prev = fixations.back();
      const double gap = g.start - merged.back().end;
      const double angle = angle_deg(prev.surface_point - prev.viewpoint, fx.surface_point - prev.viewpoint);
      if (gap < params.merge_gap_ms && angle < params.merge_angle_deg) {
        Group& m = merged.back();
        m.members.insert(m.members.end(), g.members.begin(), g.members.end());
        m.end = g.end;
        fixations.back() = detail::make_fixation(mesh, hits, m.members, cover, m.start, m.end);
        continue;
      }
    }
    merged.push_back(std::move(g));
    fixations.push_back(fx);
  }
  return fixations;
}

struct KernelParams {
  double sigma_angle_deg = 1.0;
  /// Contributions beyond this many spatial sigmas are dropped.
  double truncate_sigmas = 3.0;
  bool normalize = true;
};

/// Accumulates duration-weighted Gaussian splats of the fixations onto face
/// centers. The spatial sigma is d * tan(sigma_angle) for viewing distance d,
/// and only faces oriented toward the fixation's viewpoint receive mass. The
/// fixated face itself always receives its (untruncated) kernel value.
inline SaliencyMap smooth_fixations(const std::vector<Fixation>& fixations, const TexturedMesh& mesh,
                                    const KernelParams& params = {}) {
  const std::size_t nf = mesh.num_faces();
  for (const Fixation& fx : fixations) {
    if (fx.face < 0 || static_cast<std::size_t>(fx.face) >= nf) throw InputError("fixation references invalid face");
  }
  const double tan_sigma = std::tan(deg_to_rad(params.sigma_angle_deg));
  SaliencyMap map;
  map.values.assign(nf, 0.0);
  parallel_for(nf, [&](std::size_t f) {
    const Vec3& c = mesh.face_center(f);
    const Vec3& n = mesh.face_normal(f);
    double acc = 0.0;
    for (const Fixation& fx : fixations) {
      const double sigma = fx.mean_view_distance * tan_sigma;
      const double d2 = (c - fx.surface_point).squaredNorm();
      const bool own = static_cast<std::size_t>(fx.face) == f;
      if (!own) {
        if (!(n.dot(fx.viewpoint - c) > 0.0)) continue;
        const double cut = params.truncate_sigmas * sigma;
        if (d2 > cut * cut) continue;
      }
      if (sigma > 0.0) {
        acc += fx.duration_ms * std::exp(-d2 / (2.0 * sigma * sigma));
      } else if (own) {
        acc += fx.duration_ms;
      }
    }
    map.values[f] = acc;
  });
  const double total = map.total();
  if (!(total > 0.0)) throw InputError("no fixation contributes to the saliency map (zero total)");
  if (params.normalize) map = map.sum_normalized();
  return map;
}

// Synthetic gaze generation ------------------------------------------------

/// One scripted look at a surface point. `saccade_ms` is the transition time
/// from the previous dwell (ignored for the first).
struct Dwell {
  int face = 0;
  std::optional<Vec3> barycentric;  // centroid when absent
  double duration_ms = 300.0;
  double saccade_ms = 50.0;
};

struct Scenario {
  std::vector<Dwell> dwells;
  Vec3 eye = Vec3(0.0, 0.0, -3.0);  // world-frame viewer position
  double noise_deg = 0.0;           // isotropic angular noise (per axis sigma)
  double rate_hz = 120.0;
  double start_ms = 0.0;
  std::uint64_t seed = 0;
};

struct ScriptedDwell {
  int face = -1;
  Vec3 model_point = Vec3::Zero();
  double start_ms = 0.0;
  double end_ms = 0.0;
};

struct SyntheticLog {
  std::vector<GazeSample> samples;
  std::vector<ScriptedDwell> truth;
};

inline Vec3 dwell_point(const TexturedMesh& mesh, const Dwell& d) {
  const Vec3 w = d.barycentric.value_or(Vec3::Constant(1.0 / 3.0));
  return w[0] * mesh.corner(d.face, 0) + w[1] * mesh.corner(d.face, 1) + w[2] * mesh.corner(d.face, 2);
}

/// Renders a scenario into a gaze log. Dwell samples track the rotating
/// world-frame position of their target; saccades interpolate direction
/// linearly between the last and next target directions.
inline SyntheticLog synth_gaze(const Scenario& scenario, const TexturedMesh& mesh, const RotationSchedule& schedule) {
  if (scenario.dwells.empty()) throw InputError("scenario has no dwells");
  if (!(scenario.rate_hz > 0.0)) throw InputError("sample rate must be positive");
  for (const Dwell& d : scenario.dwells) {
    if (d.face < 0 || static_cast<std::size_t>(d.face) >= mesh.num_faces()) {
      throw InputError("scenario targets invalid face " + std::to_string(d.face));
    }
    if (!(d.duration_ms > 0.0) || d.saccade_ms < 0.0) throw InputError("dwell durations must be positive");
  }

  SyntheticLog out;
  double t = scenario.start_ms;
  for (std::size_t i = 0; i < scenario.dwells.size(); ++i) {
    const Dwell& d = scenario.dwells[i];
    if (i > 0) t += d.saccade_ms;
    out.truth.push_back({d.face, dwell_point(mesh, d), t, t + d.duration_ms});
    t += d.duration_ms;
  }
  const double end = t;

  auto target_dir = [&](std::size_t i, double time) {
    return (schedule.point_to_world(out.truth[i].model_point, time) - scenario.eye).normalized();
  };

  std::mt19937_64 rng(scenario.seed);
  std::normal_distribution<double> noise(0.0, deg_to_rad(scenario.noise_deg));
  const double period = 1000.0 / scenario.rate_hz;
  std::size_t dwell = 0;
  for (std::size_t k = 0;; ++k) {
    const double time = scenario.start_ms + static_cast<double>(k) * period;
    if (time >= end) break;
    while (dwell + 1 < out.truth.size() && time >= out.truth[dwell].end_ms) ++dwell;
    Vec3 dir;
    if (time < out.truth[dwell].start_ms) {
      // Saccade from dwell-1 into dwell.
      const double s0 = out.truth[dwell - 1].end_ms;
      const double s1 = out.truth[dwell].start_ms;
      const double alpha = (time - s0) / (s1 - s0);
      dir = ((1.0 - alpha) * target_dir(dwell - 1, s0) + alpha * target_dir(dwell, s1)).normalized();
    } else {
      dir = target_dir(dwell, time);
    }
    if (scenario.noise_deg > 0.0) {
      const Vec3 helper = std::abs(dir.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
      const Vec3 e1 = dir.cross(helper).normalized();
      const Vec3 e2 = dir.cross(e1);
      const double a = noise(rng);
      const double b = noise(rng);
      dir = (dir + std::tan(a) * e1 + std::tan(b) * e2).normalized();
    }
    GazeSample s;
    s.timestamp_ms = time;
    s.gaze_origin = scenario.eye;
    s.gaze_direction = dir;
    s.head_position = scenario.eye;
    s.head_direction = (schedule.pivot - scenario.eye).normalized();
    out.samples.push_back(s);
  }
  return out;
}

/// True when the ray from `eye` to the target's world position at time t
/// first meets the target face from its front side, at a viewing angle whose
/// cosine is above `min_facing_cos`.
inline bool target_visible(const TexturedMesh& mesh, const Bvh& bvh, const RotationSchedule& schedule, const Vec3& eye,
                           int face, const Vec3& model_point, double t_ms, double min_facing_cos = 0.0) {
  GazeSample s;
  s.timestamp_ms = t_ms;
  s.gaze_origin = eye;
  s.gaze_direction = (schedule.point_to_world(model_point, t_ms) - eye).normalized();
  const Ray ray = world_to_model(s, schedule);
  auto hit = closest_hit(bvh, mesh, ray);
  return hit && hit->face == face && mesh.face_normal(face).dot(-ray.direction.normalized()) > min_facing_cos;
}

struct RandomScenarioParams {
  int dwells = 3;
  double min_dwell_ms = 250.0;
  double max_dwell_ms = 600.0;
  double saccade_ms = 50.0;
  /// Minimum model-frame separation between any two targets.
  double min_separation = 0.0;
  /// Keeps targets away from the silhouette, where small gaze noise leaves the mesh.
  double min_facing_cos = 0.3;
  int max_attempts = 10000;
};

/// Draws dwells on faces that stay visible from the eye for the whole dwell.
inline Scenario random_scenario(const TexturedMesh& mesh, const Bvh& bvh, const RotationSchedule& schedule,
                                Scenario base, const RandomScenarioParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_face(0, static_cast<int>(mesh.num_faces()) - 1);
  std::uniform_real_distribution<double> pick_duration(params.min_dwell_ms, params.max_dwell_ms);
  base.dwells.clear();
  double t = base.start_ms;
  std::vector<Vec3> used;
  int attempts = 0;
  while (static_cast<int>(base.dwells.size()) < params.dwells) {
    if (++attempts > params.max_attempts) throw InputError("could not place visible dwell targets");
    Dwell d;
    d.face = pick_face(rng);
    d.duration_ms = std::round(pick_duration(rng));
    d.saccade_ms = base.dwells.empty() ? 0.0 : params.saccade_ms;
    const Vec3 p = dwell_point(mesh, d);
    const double start = t + d.saccade_ms;
    bool ok = true;
    for (const Vec3& q : used) ok = ok && (p - q).norm() >= params.min_separation;
    for (double frac : {0.0, 0.5, 1.0}) {
      ok = ok && target_visible(mesh, bvh, schedule, base.eye, d.face, p, start + frac * d.duration_ms,
                                  params.min_facing_cos);
    }
    if (!ok) continue;
    if (base.dwells.empty()) d.saccade_ms = params.saccade_ms;
    used.push_back(p);
    base.dwells.push_back(d);
    t = start + d.duration_ms;
  }
  return base;
}

}  // namespace meshsal
