#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "meshsal/mesh.hpp"

namespace meshsal {

inline constexpr double kDeterminantEpsilon = 1e-12;
inline constexpr double kBarycentricEpsilon = 1e-9;

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();

  Vec3 at(double t) const { return origin + t * direction; }
};

struct Hit {
  int face = -1;
  double t = 0.0;
  Vec3 barycentric = Vec3::Zero();  // weights of the face's corners 0, 1, 2
  Vec3 point = Vec3::Zero();
};

/// Moller-Trumbore ray/triangle test. Reports front and back facing hits;
/// `face` is left at -1 for the caller to fill in.
inline std::optional<Hit> intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) <= kDeterminantEpsilon) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = ray.origin - v0;
  const double u = s.dot(p) * inv_det;
  if (u < -kBarycentricEpsilon || u > 1.0 + kBarycentricEpsilon) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv_det;
  if (v < -kBarycentricEpsilon || u + v > 1.0 + kBarycentricEpsilon) return std::nullopt;
  const double t = e2.dot(q) * inv_det;
  if (!(t >= ray.t_min && t <= ray.t_max)) return std::nullopt;
  Hit hit;
  hit.t = t;
  hit.barycentric = Vec3(1.0 - u - v, u, v);
  hit.point = ray.at(t);
  return hit;
}

inline std::optional<Hit> intersect_face(const Ray& ray, const TexturedMesh& mesh, int face) {
  auto hit = intersect_triangle(ray, mesh.corner(face, 0), mesh.corner(face, 1), mesh.corner(face, 2));
  if (hit) hit->face = face;
  return hit;
}

/// Closest point to p on triangle (a, b, c), returned as barycentric weights.
inline Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {1.0 - v, v, 0.0};
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {1.0 - w, 0.0, w};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {0.0, 1.0 - w, w};
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return {1.0 - v - w, v, w};
}

/// Strict ordering on hits: smaller t first, then smaller face index.
inline bool closer(const Hit& a, const Hit& b) { return a.t < b.t || (a.t == b.t && a.face < b.face); }

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool contains(const Aabb& b) const {
    return (lo.array() <= b.lo.array()).all() && (hi.array() >= b.hi.array()).all();
  }
  int widest_axis() const {
    const Vec3 ext = hi - lo;
    int axis = 0;
    if (ext[1] > ext[axis]) axis = 1;
    if (ext[2] > ext[axis]) axis = 2;
    return axis;
  }

  /// Slab test. On success `t_enter` is the clipped entry distance.
  bool intersect(const Ray& ray, double t_max, double& t_enter) const {
    double t0 = ray.t_min;
    double t1 = t_max;
    for (int k = 0; k < 3; ++k) {
      const double d = ray.direction[k];
      if (d == 0.0) {
        if (ray.origin[k] < lo[k] || ray.origin[k] > hi[k]) return false;
        continue;
      }
      const double inv = 1.0 / d;
      double a = (lo[k] - ray.origin[k]) * inv;
      double b = (hi[k] - ray.origin[k]) * inv;
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
      if (t0 > t1) return false;
    }
    t_enter = t0;
    return true;
  }
};

struct BvhNode {
  Aabb box;
  int left = -1;   // internal: child indices; leaf: -1
  int right = -1;
  int first = 0;   // leaf: range into face_order
  int count = 0;

  bool is_leaf() const { return left < 0; }
};

struct BvhOptions {
  int max_leaf_size = 4;
};

/// Binary bounding volume hierarchy over mesh faces. Built by median splits
/// of face centroids along the widest axis of each node's box.
class Bvh {
 public:
  const std::vector<BvhNode>& nodes() const { return nodes_; }
  const std::vector<int>& face_order() const { return face_order_; }
  std::size_t num_faces() const { return face_order_.size(); }

  /// Longest root-to-leaf edge count.
  int depth() const { return nodes_.empty() ? 0 : depth_from(0); }

 private:
  friend Bvh build_bvh(const TexturedMesh& mesh, const BvhOptions& options);

  int depth_from(int n) const {
    const BvhNode& node = nodes_[n];
    if (node.is_leaf()) return 0;
    return 1 + std::max(depth_from(node.left), depth_from(node.right));
  }

  std::vector<BvhNode> nodes_;
  std::vector<int> face_order_;
};

inline Bvh build_bvh(const TexturedMesh& mesh, const BvhOptions& options = {}) {
  Bvh bvh;
  const int nf = static_cast<int>(mesh.num_faces());
  if (nf == 0) return bvh;
  const int leaf_size = std::max(1, options.max_leaf_size);

  std::vector<Aabb> face_box(nf);
  for (int f = 0; f < nf; ++f)
    for (int k = 0; k < 3; ++k) face_box[f].extend(mesh.corner(f, k));

  // Pad boxes so hits accepted by the barycentric slack are never culled.
  auto [lo, hi] = mesh.bounds();
  const double pad = 1e-7 * ((hi - lo).norm() + 1.0);

  bvh.face_order_.resize(nf);
  std::iota(bvh.face_order_.begin(), bvh.face_order_.end(), 0);
  const std::vector<Vec3>& centers = mesh.face_centers();

  struct Task {
    int node;
    int begin;
    int end;
  };
  bvh.nodes_.reserve(static_cast<std::size_t>(2 * nf / leaf_size + 2));
  bvh.nodes_.emplace_back();
  std::vector<Task> stack{{0, 0, nf}};
  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    Aabb box;
    for (int i = task.begin; i < task.end; ++i) box.extend(face_box[bvh.face_order_[i]]);
    box.lo.array() -= pad;
    box.hi.array() += pad;
    bvh.nodes_[task.node].box = box;
    const int count = task.end - task.begin;
    if (count <= leaf_size) {
      bvh.nodes_[task.node].first = task.begin;
      bvh.nodes_[task.node].count = count;
      continue;
    }
    const int axis = box.widest_axis();
    const int mid = task.begin + count / 2;
    std::nth_element(bvh.face_order_.begin() + task.begin, bvh.face_order_.begin() + mid,
                     bvh.face_order_.begin() + task.end, [&](int a, int b) {
                       if (centers[a][axis] != centers[b][axis]) return centers[a][axis] < centers[b][axis];
                       return a < b;
                     });
    const int left = static_cast<int>(bvh.nodes_.size());
    bvh.nodes_.emplace_back();
    bvh.nodes_.emplace_back();
    bvh.nodes_[task.node].left = left;
    bvh.nodes_[task.node].right = left + 1;
    stack.push_back({left + 1, mid, task.end});
    stack.push_back({left, task.begin, mid});
  }
  return bvh;
}

struct TraversalStats {
  std::size_t nodes_visited = 0;
  std::size_t triangle_tests = 0;
};

/// Nearest hit along the ray; ties in t resolve to the smaller face index.
/// Returns exactly what a linear scan over all faces would.
inline std::optional<Hit> closest_hit(const Bvh& bvh, const TexturedMesh& mesh, const Ray& ray,
                                      TraversalStats* stats = nullptr) {
  std::optional<Hit> best;
  if (bvh.nodes().empty()) return best;
  const auto& nodes = bvh.nodes();
  double t_enter = 0.0;
  if (!nodes[0].box.intersect(ray, ray.t_max, t_enter)) return best;

  std::array<int, 128> stack{};
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const BvhNode& node = nodes[stack[--top]];
    const double limit = best ? best->t : ray.t_max;
    if (!node.box.intersect(ray, limit, t_enter)) continue;
    if (stats) ++stats->nodes_visited;
    if (node.is_leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int f = bvh.face_order()[i];
        if (stats) ++stats->triangle_tests;
        auto hit = intersect_face(ray, mesh, f);
        if (hit && (!best || closer(*hit, *best))) best = hit;
      }
      continue;
    }
    double tl = 0.0;
    double tr = 0.0;
    const bool hl = nodes[node.left].box.intersect(ray, limit, tl);
    const bool hr = nodes[node.right].box.intersect(ray, limit, tr);
    // Push the farther child first so the nearer one is popped next.
    if (hl && hr) {
      if (tl <= tr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    } else if (hl) {
      stack[top++] = node.left;
    } else if (hr) {
      stack[top++] = node.right;
    }
  }
  return best;
}

/// Reference linear scan over every face.
inline std::optional<Hit> closest_hit_linear(const TexturedMesh& mesh, const Ray& ray) {
  std::optional<Hit> best;
  for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
    auto hit = intersect_face(ray, mesh, f);
    if (hit && (!best || closer(*hit, *best))) best = hit;
  }
  return best;
}

}  // namespace meshsal
