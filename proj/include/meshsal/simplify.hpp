#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <vector>

#include "meshsal/error.hpp"
#include "meshsal/mesh.hpp"
#include "meshsal/parallel.hpp"
#include "meshsal/saliency_map.hpp"

namespace meshsal {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

/// Plane-distance quadric: the squared distance of x to a set of planes is
/// [x 1] Q [x 1]^T.
struct Quadric {
  Mat4 q = Mat4::Zero();

  static Quadric plane(const Vec3& unit_normal, const Vec3& point_on_plane, double weight = 1.0) {
    Vec4 p;
    p << unit_normal, -unit_normal.dot(point_on_plane);
    return {weight * p * p.transpose()};
  }

  Quadric& operator+=(const Quadric& o) {
    q += o.q;
    return *this;
  }
  Quadric operator+(const Quadric& o) const { return {q + o.q}; }

  double evaluate(const Vec3& x) const {
    Vec4 h;
    h << x, 1.0;
    return std::max(0.0, h.dot(q * h));
  }

  /// Minimizer of the quadric when its 3x3 block has condition number below
  /// `max_condition`.
  std::optional<Vec3> minimizer(double max_condition = 1e8) const {
    const Mat3 a = q.topLeftCorner<3, 3>();
    Eigen::SelfAdjointEigenSolver<Mat3> eig;
    eig.computeDirect(a, Eigen::EigenvaluesOnly);
    const Vec3 lambda = eig.eigenvalues();  // ascending
    if (!(lambda[0] > 0.0) || !(lambda[2] / lambda[0] < max_condition)) return std::nullopt;
    const Vec3 x = a.ldlt().solve(-q.topRightCorner<3, 1>());
    if (!x.allFinite()) return std::nullopt;
    return x;
  }
};

struct SimplifyParams {
  double lambda = 9.0;  // saliency gain
  double gamma = 1.0;   // saliency exponent
  bool allow_seam_collapse = false;
  bool strict_manifold = false;
  double boundary_weight = 1000.0;  // perpendicular constraint planes on open edges
  double max_condition = 1e8;
  double min_face_area = 1e-12;
  std::function<void(std::size_t faces)> progress;
};

struct CollapseCandidate {
  int a = -1;  // kept vertex (smaller index)
  int b = -1;  // removed vertex
  Vec3 optimal_position = Vec3::Zero();
  double base_cost = 0.0;
  double saliency_weight = 1.0;
  double weighted_cost = 0.0;
};

struct SimplifyResult {
  TexturedMesh mesh;
  std::vector<int> source_faces;  // input face index of each output face
  std::size_t collapses = 0;
  bool reached_target = true;
};

namespace detail {

class EdgeCollapser {
 public:
  EdgeCollapser(const TexturedMesh& mesh, const std::vector<double>& face_saliency, const SimplifyParams& params)
      : params_(params),
        pos_(mesh.vertices()),
        faces_(mesh.faces()),
        uv_(mesh.uv_corners()),
        saliency_(face_saliency),
        has_uv_(mesh.has_uv()) {
    const std::size_t nv = pos_.size();
    const std::size_t nf = faces_.size();
    face_alive_.assign(nf, 1);
    vertex_alive_.assign(nv, 1);
    stamp_.assign(nv, 0);
    vf_.resize(nv);
    for (std::size_t f = 0; f < nf; ++f)
      for (int v : faces_[f]) vf_[v].push_back(static_cast<int>(f));

    std::vector<Quadric> face_q(nf);
    parallel_for(nf, [&](std::size_t f) { face_q[f] = Quadric::plane(mesh.face_normal(f), mesh.corner(f, 0)); });
    quadric_.resize(nv);
    for (std::size_t v = 0; v < nv; ++v)
      for (int f : vf_[v]) quadric_[v] += face_q[f];
    // Open edges get a plane through the edge, perpendicular to its face.
    if (params_.boundary_weight > 0.0) {
      for (std::size_t f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
          const int u = faces_[f][k];
          const int w = faces_[f][(k + 1) % 3];
          if (edge_faces(u, w).size() != 1) continue;
          const Vec3 e = pos_[w] - pos_[u];
          const Vec3 n = e.cross(mesh.face_normal(f));
          if (!(n.norm() > 0.0)) continue;
          const Quadric c = Quadric::plane(n.normalized(), pos_[u], params_.boundary_weight);
          quadric_[u] += c;
          quadric_[w] += c;
        }
      }
    }
    live_faces_ = nf;
  }

  std::size_t live_faces() const { return live_faces_; }
  std::size_t collapses() const { return collapses_; }

  void run(std::size_t target) {
    for (std::size_t v = 0; v < pos_.size(); ++v)
      for (int n : neighbors(static_cast<int>(v)))
        if (static_cast<int>(v) < n) push(static_cast<int>(v), n);
    while (live_faces_ > target && !heap_.empty()) {
      const Entry e = heap_.top();
      heap_.pop();
      if (!vertex_alive_[e.a] || !vertex_alive_[e.b] || stamp_[e.a] != e.stamp_a || stamp_[e.b] != e.stamp_b) continue;
      const CollapseCandidate c = evaluate(e.a, e.b);
      if (!legal(c)) continue;
      collapse(c);
      if (params_.progress) params_.progress(live_faces_);
    }
  }

  std::vector<int> surviving_faces() const {
    std::vector<int> out;
    for (std::size_t f = 0; f < faces_.size(); ++f)
      if (face_alive_[f]) out.push_back(static_cast<int>(f));
    return out;
  }

  TexturedMesh result(const std::optional<std::string>& texture) const {
    std::vector<int> remap(pos_.size(), -1);
    std::vector<Vec3> vertices;
    for (std::size_t f = 0; f < faces_.size(); ++f)
      if (face_alive_[f])
        for (int v : faces_[f]) remap[v] = 0;
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      if (remap[v] < 0) continue;
      remap[v] = static_cast<int>(vertices.size());
      vertices.push_back(pos_[v]);
    }
    std::vector<Face> faces;
    std::vector<FaceUv> uvs;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      faces.push_back({remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]]});
      if (has_uv_) uvs.push_back(uv_[f]);
    }
    MeshBuildOptions build;
    build.min_face_area = params_.min_face_area;
    return TexturedMesh(std::move(vertices), std::move(faces), std::move(uvs), texture, build);
  }

  CollapseCandidate evaluate(int a, int b) const {
    CollapseCandidate c;
    c.a = std::min(a, b);
    c.b = std::max(a, b);
    const Quadric q = quadric_[c.a] + quadric_[c.b];
    if (auto x = q.minimizer(params_.max_condition)) {
      c.optimal_position = *x;
      c.base_cost = q.evaluate(*x);
    } else {
      const std::array<Vec3, 3> options = {pos_[c.a], pos_[c.b], 0.5 * (pos_[c.a] + pos_[c.b])};
      c.base_cost = std::numeric_limits<double>::infinity();
      for (const Vec3& x : options) {
        const double cost = q.evaluate(x);
        if (cost < c.base_cost) {
          c.base_cost = cost;
          c.optimal_position = x;
        }
      }
    }
    double s = 0.0;
    for (int f : vf_[c.a])
      if (contains(f, c.b)) s = std::max(s, saliency_[f]);
    c.saliency_weight = std::pow(1.0 + params_.lambda * s, params_.gamma);
    c.weighted_cost = c.base_cost * c.saliency_weight;
    return c;
  }

 private:
  struct Entry {
    double cost;
    int a;
    int b;
    std::uint32_t stamp_a;
    std::uint32_t stamp_b;
  };
  struct EntryOrder {
    // Min-heap on (cost, a, b).
    bool operator()(const Entry& x, const Entry& y) const {
      if (x.cost != y.cost) return x.cost > y.cost;
      if (x.a != y.a) return x.a > y.a;
      return x.b > y.b;
    }
  };

  bool contains(int f, int v) const { return faces_[f][0] == v || faces_[f][1] == v || faces_[f][2] == v; }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vf_[v])
      for (int u : faces_[f])
        if (u != v) out.push_back(u);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<int> edge_faces(int a, int b) const {
    std::vector<int> out;
    for (int f : vf_[a])
      if (contains(f, b)) out.push_back(f);
    return out;
  }

  bool on_boundary(int v) const {
    for (int n : neighbors(v))
      if (edge_faces(v, n).size() == 1) return true;
    return false;
  }

  bool is_seam(int v) const {
    if (!has_uv_) return false;
    std::optional<Vec2> first;
    for (int f : vf_[v]) {
      for (int k = 0; k < 3; ++k) {
        if (faces_[f][k] != v) continue;
        if (!first) {
          first = uv_[f][k];
        } else if (uv_[f][k] != *first) {
          return true;
        }
      }
    }
    return false;
  }

  void push(int a, int b) {
    const CollapseCandidate c = evaluate(a, b);
    heap_.push({c.weighted_cost, c.a, c.b, stamp_[c.a], stamp_[c.b]});
  }

  bool legal(const CollapseCandidate& c) const {
    const std::vector<int> shared = edge_faces(c.a, c.b);
    if (shared.empty()) return false;
    if (shared.size() > 2) {
      if (params_.strict_manifold) throw InputError("non-manifold edge encountered during simplification");
      return false;
    }
    // Link condition: common neighbours must be exactly the opposite corners.
    std::vector<int> opposite;
    for (int f : shared)
      for (int u : faces_[f])
        if (u != c.a && u != c.b) opposite.push_back(u);
    std::sort(opposite.begin(), opposite.end());
    const auto na = neighbors(c.a);
    const auto nb = neighbors(c.b);
    std::vector<int> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common != opposite) return false;
    if (shared.size() == 2 && on_boundary(c.a) && on_boundary(c.b)) return false;
    if (!params_.allow_seam_collapse && (is_seam(c.a) || is_seam(c.b))) return false;

    for (int v : {c.a, c.b}) {
      for (int f : vf_[v]) {
        if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
        std::array<Vec3, 3> before, after;
        for (int k = 0; k < 3; ++k) {
          const int u = faces_[f][k];
          before[k] = pos_[u];
          after[k] = (u == c.a || u == c.b) ? c.optimal_position : pos_[u];
        }
        const Vec3 n0 = (before[1] - before[0]).cross(before[2] - before[0]);
        const Vec3 n1 = (after[1] - after[0]).cross(after[2] - after[0]);
        if (!(0.5 * n1.norm() > params_.min_face_area)) return false;
        if (n0.dot(n1) < 0.0) return false;
      }
    }
    return true;
  }

  void collapse(const CollapseCandidate& c) {
    const int a = c.a;
    const int b = c.b;
    const std::vector<int> shared = edge_faces(a, b);
    std::optional<Vec2> uv_a;
    if (has_uv_) {
      for (int k = 0; k < 3; ++k)
        if (faces_[shared.front()][k] == a) uv_a = uv_[shared.front()][k];
    }
    for (int f : shared) {
      face_alive_[f] = 0;
      for (int u : faces_[f]) {
        auto& list = vf_[u];
        list.erase(std::remove(list.begin(), list.end(), f), list.end());
      }
    }
    live_faces_ -= shared.size();
    for (int f : vf_[b]) {
      for (int k = 0; k < 3; ++k) {
        if (faces_[f][k] != b) continue;
        faces_[f][k] = a;
        if (uv_a) uv_[f][k] = *uv_a;
      }
      vf_[a].push_back(f);
    }
    std::sort(vf_[a].begin(), vf_[a].end());
    vf_[b].clear();
    vertex_alive_[b] = 0;
    pos_[a] = c.optimal_position;
    quadric_[a] += quadric_[b];
    ++stamp_[a];
    ++collapses_;
    for (int n : neighbors(a)) push(a, n);
  }

  const SimplifyParams& params_;
  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  std::vector<FaceUv> uv_;
  std::vector<double> saliency_;
  bool has_uv_;
  std::vector<std::uint8_t> face_alive_;
  std::vector<std::uint8_t> vertex_alive_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::vector<int>> vf_;
  std::vector<Quadric> quadric_;
  std::priority_queue<Entry, std::vector<Entry>, EntryOrder> heap_;
  std::size_t live_faces_ = 0;
  std::size_t collapses_ = 0;
};

}  // namespace detail

/// Per-face saliency rescaled to [0,1]: sum-normalized, then max-normalized.
inline std::vector<double> collapse_saliency(const SaliencyMap& saliency) {
  validate_saliency(saliency);
  return saliency.sum_normalized().max_normalized().values;
}

/// Quadric-error edge-collapse decimation with saliency-weighted costs.
///
/// Edge cost is the quadric error at the optimal position multiplied by
/// (1 + lambda * s)^gamma, where s is the largest saliency of the faces on
/// the edge. Collapses that flip a face, violate the link condition, or
/// touch a UV seam (unless allowed) are skipped.
inline SimplifyResult simplify_mesh(const TexturedMesh& mesh, const std::optional<SaliencyMap>& saliency,
                                    std::size_t target_faces, const SimplifyParams& params = {}) {
  const std::size_t nf = mesh.num_faces();
  if (target_faces < 4) throw InputError("target face count must be at least 4");
  if (target_faces > nf) {
    throw InputError("target face count " + std::to_string(target_faces) + " exceeds mesh face count " +
                     std::to_string(nf));
  }
  if (params.lambda < 0.0 || params.gamma < 0.0) throw InputError("lambda and gamma must be nonnegative");
  if (params.strict_manifold && mesh.num_nonmanifold_edges() > 0) {
    throw InputError("non-manifold edge encountered during simplification");
  }
  std::vector<double> face_saliency(nf, 0.0);
  if (saliency) {
    if (saliency->size() != nf) {
      throw InputError("saliency map has " + std::to_string(saliency->size()) + " values for " + std::to_string(nf) +
                       " faces");
    }
    face_saliency = collapse_saliency(*saliency);
  }
  if (target_faces == nf) {
    std::vector<int> all(nf);
    std::iota(all.begin(), all.end(), 0);
    return {mesh, std::move(all), 0, true};
  }

  detail::EdgeCollapser collapser(mesh, face_saliency, params);
  collapser.run(target_faces);
  return {collapser.result(mesh.texture_path()), collapser.surviving_faces(), collapser.collapses(),
          collapser.live_faces() <= target_faces};
}

}  // namespace meshsal
