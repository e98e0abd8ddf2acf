#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meshsal/error.hpp"

namespace meshsal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Face = std::array<int, 3>;
using FaceUv = std::array<Vec2, 3>;

/// Raised when faces collapse to zero area or repeat a vertex.
class DegenerateFaceError : public InputError {
 public:
  explicit DegenerateFaceError(std::vector<int> faces)
      : InputError(make_message(faces)), faces_(std::move(faces)) {}

  const std::vector<int>& faces() const { return faces_; }

 private:
  static std::string make_message(const std::vector<int>& faces) {
    std::string msg = "degenerate faces:";
    const std::size_t shown = std::min<std::size_t>(faces.size(), 32);
    for (std::size_t i = 0; i < shown; ++i) msg += " " + std::to_string(faces[i]);
    if (faces.size() > shown) msg += " ... (" + std::to_string(faces.size()) + " total)";
    return msg;
  }

  std::vector<int> faces_;
};

struct MeshBuildOptions {
  double min_face_area = 1e-12;
};

/// Indexed triangle mesh with per-corner texture coordinates.
///
/// Immutable after construction. The constructor validates indices, rejects
/// degenerate faces and derives normals, centers, areas, corner vectors and
/// edge adjacency. Corner UVs are stored per face so a shared vertex may carry
/// different UVs in different faces.
class TexturedMesh {
 public:
  TexturedMesh() = default;

  TexturedMesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<FaceUv> uv_corners = {},
               std::optional<std::string> texture_path = std::nullopt, const MeshBuildOptions& options = {})
      : vertices_(std::move(vertices)),
        faces_(std::move(faces)),
        uv_corners_(std::move(uv_corners)),
        texture_path_(std::move(texture_path)) {
    validate(options);
    derive();
  }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_faces() const { return faces_.size(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const Vec3& vertex(std::size_t v) const { return vertices_[v]; }
  const Face& face(std::size_t f) const { return faces_[f]; }
  const Vec3& corner(std::size_t f, int k) const { return vertices_[faces_[f][k]]; }

  bool has_uv() const { return !uv_corners_.empty(); }
  const std::vector<FaceUv>& uv_corners() const { return uv_corners_; }
  const FaceUv& face_uv(std::size_t f) const { return uv_corners_.at(f); }
  const std::optional<std::string>& texture_path() const { return texture_path_; }

  const Vec3& face_normal(std::size_t f) const { return normals_[f]; }
  const Vec3& face_center(std::size_t f) const { return centers_[f]; }
  double face_area(std::size_t f) const { return areas_[f]; }
  const std::vector<double>& face_areas() const { return areas_; }
  const std::vector<Vec3>& face_centers() const { return centers_; }
  const std::vector<Vec3>& face_normals() const { return normals_; }

  /// Vectors from the face center to each of its three corners.
  std::array<Vec3, 3> corner_vectors(std::size_t f) const {
    const Vec3& c = centers_[f];
    return {corner(f, 0) - c, corner(f, 1) - c, corner(f, 2) - c};
  }

  /// Edge-sharing faces of f, ascending. More than three only on non-manifold edges.
  std::span<const int> adjacency(std::size_t f) const {
    return {adjacency_.data() + adjacency_offsets_[f], adjacency_.data() + adjacency_offsets_[f + 1]};
  }

  /// Faces referencing vertex v, ascending.
  std::span<const int> vertex_faces(std::size_t v) const {
    return {vertex_faces_.data() + vertex_face_offsets_[v], vertex_faces_.data() + vertex_face_offsets_[v + 1]};
  }

  /// True when v lies on an edge used by exactly one face.
  bool is_boundary_vertex(std::size_t v) const { return boundary_vertex_[v] != 0; }

  std::size_t num_nonmanifold_edges() const { return nonmanifold_edges_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::pair<Vec3, Vec3> bounds() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Vec3& p : vertices_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return {lo, hi};
  }

 private:
  void validate(const MeshBuildOptions& options) {
    const auto nv = static_cast<long long>(vertices_.size());
    if (!uv_corners_.empty() && uv_corners_.size() != faces_.size()) {
      throw InputError("uv corner count " + std::to_string(uv_corners_.size()) + " does not match face count " +
                       std::to_string(faces_.size()));
    }
    std::vector<int> degenerate;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Face& t = faces_[f];
      for (int idx : t) {
        if (idx < 0 || idx >= nv) {
          throw InputError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) + " of " +
                           std::to_string(nv));
        }
      }
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
        degenerate.push_back(static_cast<int>(f));
        continue;
      }
      const Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
      if (!(0.5 * n.norm() > options.min_face_area)) degenerate.push_back(static_cast<int>(f));
    }
    if (!degenerate.empty()) throw DegenerateFaceError(std::move(degenerate));
  }

  void derive() {
    const std::size_t nf = faces_.size();
    const std::size_t nv = vertices_.size();
    normals_.resize(nf);
    centers_.resize(nf);
    areas_.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      const Vec3& a = corner(f, 0);
      const Vec3& b = corner(f, 1);
      const Vec3& c = corner(f, 2);
      const Vec3 n = (b - a).cross(c - a);
      const double len = n.norm();
      areas_[f] = 0.5 * len;
      normals_[f] = n / len;
      centers_[f] = (a + b + c) / 3.0;
    }

    // Vertex -> faces (CSR).
    vertex_face_offsets_.assign(nv + 1, 0);
    for (const Face& t : faces_)
      for (int v : t) ++vertex_face_offsets_[v + 1];
    for (std::size_t v = 0; v < nv; ++v) vertex_face_offsets_[v + 1] += vertex_face_offsets_[v];
    vertex_faces_.resize(vertex_face_offsets_[nv]);
    {
      std::vector<std::size_t> cursor(vertex_face_offsets_.begin(), vertex_face_offsets_.end() - 1);
      for (std::size_t f = 0; f < nf; ++f)
        for (int v : faces_[f]) vertex_faces_[cursor[v]++] = static_cast<int>(f);
    }

    // Edge -> incident faces.
    std::map<std::pair<int, int>, std::vector<int>> edges;
    for (std::size_t f = 0; f < nf; ++f) {
      for (int k = 0; k < 3; ++k) {
        int a = faces_[f][k];
        int b = faces_[f][(k + 1) % 3];
        if (a > b) std::swap(a, b);
        edges[{a, b}].push_back(static_cast<int>(f));
      }
    }
    std::vector<std::vector<int>> adj(nf);
    boundary_vertex_.assign(nv, 0);
    nonmanifold_edges_ = 0;
    for (const auto& [edge, incident] : edges) {
      if (incident.size() == 1) {
        boundary_vertex_[edge.first] = 1;
        boundary_vertex_[edge.second] = 1;
      }
      if (incident.size() > 2) ++nonmanifold_edges_;
      for (int f : incident)
        for (int g : incident)
          if (f != g) adj[f].push_back(g);
    }
    if (nonmanifold_edges_ > 0) {
      warnings_.push_back(std::to_string(nonmanifold_edges_) +
                          " non-manifold edges (more than two incident faces); adjacency keeps all of them");
    }
    adjacency_offsets_.assign(nf + 1, 0);
    for (std::size_t f = 0; f < nf; ++f) {
      std::sort(adj[f].begin(), adj[f].end());
      adj[f].erase(std::unique(adj[f].begin(), adj[f].end()), adj[f].end());
      adjacency_offsets_[f + 1] = adjacency_offsets_[f] + adj[f].size();
    }
    adjacency_.reserve(adjacency_offsets_[nf]);
    for (auto& list : adj) adjacency_.insert(adjacency_.end(), list.begin(), list.end());
  }

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<FaceUv> uv_corners_;
  std::optional<std::string> texture_path_;

  std::vector<Vec3> normals_;
  std::vector<Vec3> centers_;
  std::vector<double> areas_;
  std::vector<int> adjacency_;
  std::vector<std::size_t> adjacency_offsets_;
  std::vector<int> vertex_faces_;
  std::vector<std::size_t> vertex_face_offsets_;
  std::vector<std::uint8_t> boundary_vertex_;
  std::size_t nonmanifold_edges_ = 0;
  std::vector<std::string> warnings_;
};

/// Faces at edge-adjacency depth 1..ring around a face.
struct RingNeighborhood {
  int face = -1;
  int ring = 0;
  std::vector<int> members;  // ascending, excludes `face`
};

/// BFS layers around a face: layers[d] holds faces at exact depth d (layers[0] = {face}).
inline std::vector<std::vector<int>> ring_layers(const TexturedMesh& mesh, int face, int max_depth) {
  if (face < 0 || static_cast<std::size_t>(face) >= mesh.num_faces()) {
    throw InputError("invalid face index " + std::to_string(face));
  }
  std::vector<std::vector<int>> layers{{face}};
  std::vector<int> visited{face};
  for (int d = 1; d <= max_depth; ++d) {
    std::vector<int> next;
    for (int f : layers.back()) {
      for (int g : mesh.adjacency(f)) {
        if (std::find(visited.begin(), visited.end(), g) != visited.end()) continue;
        visited.push_back(g);
        next.push_back(g);
      }
    }
    std::sort(next.begin(), next.end());
    layers.push_back(std::move(next));
  }
  return layers;
}

/// All faces within `depth` edge-adjacency steps of `face`, excluding it.
inline std::vector<int> ring_members(const TexturedMesh& mesh, int face, int depth) {
  auto layers = ring_layers(mesh, face, depth);
  std::vector<int> members;
  for (std::size_t d = 1; d < layers.size(); ++d) members.insert(members.end(), layers[d].begin(), layers[d].end());
  std::sort(members.begin(), members.end());
  return members;
}

inline RingNeighborhood ring_neighbors(const TexturedMesh& mesh, int face, int ring) {
  if (ring < 1 || ring > 3) throw InputError("ring must be in [1, 3], got " + std::to_string(ring));
  return {face, ring, ring_members(mesh, face, ring)};
}

}  // namespace meshsal
