#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "meshsal/error.hpp"
#include "meshsal/mesh.hpp"
#include "meshsal/parallel.hpp"

namespace meshsal {

// Spatial normalization ----------------------------------------------------

/// Maps original coordinates x to (x - translation) / scale.
struct SpatialTransform {
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& x) const { return (x - translation) / scale; }
  Vec3 invert(const Vec3& y) const { return y * scale + translation; }
};

struct NormalizedCenters {
  std::vector<Vec3> centers;
  SpatialTransform transform;
};

/// Centers the face centers on their centroid and scales the farthest one to
/// unit distance.
inline NormalizedCenters normalize_spatial(const TexturedMesh& mesh) {
  if (mesh.num_faces() == 0) throw InputError("mesh has no faces");
  const auto& centers = mesh.face_centers();
  Vec3 mean = Vec3::Zero();
  for (const Vec3& c : centers) mean += c;
  mean /= static_cast<double>(centers.size());
  double radius = 0.0;
  for (const Vec3& c : centers) radius = std::max(radius, (c - mean).norm());
  if (!(radius > 1e-15 * std::max(1.0, mean.norm()))) throw InputError("mesh has zero spatial extent");
  NormalizedCenters out;
  out.transform = {mean, radius};
  out.centers.reserve(centers.size());
  for (const Vec3& c : centers) out.centers.push_back(out.transform.apply(c));
  return out;
}

// Shape -------------------------------------------------------------------

struct ShapeDescriptor {
  std::array<double, 3> edge_lengths{};  // ascending
  std::array<double, 3> angles{};        // angles[i] is opposite edge_lengths[i]
  double area = 0.0;
  double irregularity = 1.0;             // circumradius / (2 * inradius)
};

inline ShapeDescriptor shape_descriptor(const TexturedMesh& mesh, int face) {
  if (face < 0 || static_cast<std::size_t>(face) >= mesh.num_faces()) {
    throw InputError("invalid face index " + std::to_string(face));
  }
  struct Corner {
    double opposite_edge;
    double angle;
  };
  std::array<Corner, 3> corners;
  for (int k = 0; k < 3; ++k) {
    const Vec3& p = mesh.corner(face, k);
    const Vec3 a = mesh.corner(face, (k + 1) % 3) - p;
    const Vec3 b = mesh.corner(face, (k + 2) % 3) - p;
    corners[k] = {(a - b).norm(), std::atan2(a.cross(b).norm(), a.dot(b))};
  }
  std::sort(corners.begin(), corners.end(), [](const Corner& x, const Corner& y) {
    return x.opposite_edge < y.opposite_edge || (x.opposite_edge == y.opposite_edge && x.angle < y.angle);
  });
  ShapeDescriptor s;
  for (int k = 0; k < 3; ++k) {
    s.edge_lengths[k] = corners[k].opposite_edge;
    s.angles[k] = corners[k].angle;
  }
  const Vec3 n = (mesh.corner(face, 1) - mesh.corner(face, 0)).cross(mesh.corner(face, 2) - mesh.corner(face, 0));
  s.area = 0.5 * n.norm();
  if (!(s.area > 0.0)) throw InputError("degenerate face " + std::to_string(face));
  const double a = s.edge_lengths[0], b = s.edge_lengths[1], c = s.edge_lengths[2];
  const double circumradius = a * b * c / (4.0 * s.area);
  const double inradius = s.area / (0.5 * (a + b + c));
  s.irregularity = std::max(1.0, circumradius / (2.0 * inradius));
  return s;
}

// Structural --------------------------------------------------------------

/// Fixed unit directions used to probe neighbourhood normals.
struct DirectionBases {
  std::vector<Vec3> vectors;

  std::size_t size() const { return vectors.size(); }

  /// K points of the spherical Fibonacci lattice.
  static DirectionBases fibonacci(int k = 64) {
    if (k < 1) throw InputError("basis count must be positive");
    DirectionBases b;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < k; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / k;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      b.vectors.push_back(Vec3(r * std::cos(phi), r * std::sin(phi), z).normalized());
    }
    return b;
  }

  static DirectionBases from(std::vector<Vec3> v) {
    for (Vec3& x : v) {
      if (!(x.norm() > 0.0)) throw InputError("basis vectors must be nonzero");
      x.normalize();
    }
    return {std::move(v)};
  }

  DirectionBases rotated(const Mat3& r) const {
    DirectionBases out;
    for (const Vec3& v : vectors) out.vectors.push_back(r * v);
    return out;
  }
};

inline constexpr int kStructuralRings = 3;

/// Row R-1 holds, for each basis v_k, the maximum cosine between v_k and the
/// normals of the face plus its faces within R rings. Shape 3 x K, row major.
inline std::vector<double> structural_descriptor(const TexturedMesh& mesh, int face, const DirectionBases& bases) {
  const auto layers = ring_layers(mesh, face, kStructuralRings);
  const std::size_t k = bases.size();
  std::vector<double> out(kStructuralRings * k);
  std::vector<double> running(k);
  for (std::size_t j = 0; j < k; ++j) running[j] = mesh.face_normal(face).dot(bases.vectors[j]);
  for (int r = 1; r <= kStructuralRings; ++r) {
    for (int g : layers[r])
      for (std::size_t j = 0; j < k; ++j) running[j] = std::max(running[j], mesh.face_normal(g).dot(bases.vectors[j]));
    for (std::size_t j = 0; j < k; ++j) out[(r - 1) * k + j] = std::clamp(running[j], -1.0, 1.0);
  }
  return out;
}

// Curvature ---------------------------------------------------------------

struct CurvatureField {
  std::vector<double> vertex_deficit;    // integrated curvature (angle deficit), rad
  std::vector<double> vertex_area;       // one third of incident face areas
  std::vector<double> vertex_curvature;  // deficit / area, 1/m^2
  std::vector<double> face_curvature;    // mean of the face's vertex curvatures

  double total_deficit() const {
    double s = 0.0;
    for (double d : vertex_deficit) s += d;
    return s;
  }
};

/// Discrete Gaussian curvature by angle deficit with barycentric vertex areas.
/// Boundary vertices use pi instead of 2 pi.
inline CurvatureField gaussian_curvature(const TexturedMesh& mesh) {
  const std::size_t nv = mesh.num_vertices();
  const std::size_t nf = mesh.num_faces();
  std::vector<std::array<double, 3>> corner_angle(nf);
  parallel_for(nf, [&](std::size_t f) {
    for (int k = 0; k < 3; ++k) {
      const Vec3& p = mesh.corner(f, k);
      const Vec3 a = mesh.corner(f, (k + 1) % 3) - p;
      const Vec3 b = mesh.corner(f, (k + 2) % 3) - p;
      corner_angle[f][k] = std::atan2(a.cross(b).norm(), a.dot(b));
    }
  });
  CurvatureField out;
  out.vertex_deficit.assign(nv, 0.0);
  out.vertex_area.assign(nv, 0.0);
  out.vertex_curvature.assign(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    const auto incident = mesh.vertex_faces(v);
    if (incident.empty()) continue;
    double angle_sum = 0.0;
    double area = 0.0;
    for (int f : incident) {
      for (int k = 0; k < 3; ++k)
        if (mesh.face(f)[k] == static_cast<int>(v)) angle_sum += corner_angle[f][k];
      area += mesh.face_area(f) / 3.0;
    }
    const double full = mesh.is_boundary_vertex(v) ? std::numbers::pi : 2.0 * std::numbers::pi;
    out.vertex_deficit[v] = full - angle_sum;
    out.vertex_area[v] = area;
    out.vertex_curvature[v] = out.vertex_deficit[v] / area;
  }
  out.face_curvature.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const Face& t = mesh.face(f);
    out.face_curvature[f] =
        (out.vertex_curvature[t[0]] + out.vertex_curvature[t[1]] + out.vertex_curvature[t[2]]) / 3.0;
  }
  return out;
}

// Feature table -----------------------------------------------------------

struct FaceFeatures {
  Vec3 center = Vec3::Zero();  // normalized coordinates
  std::array<Vec3, 3> corner_vectors{};  // in normalized units
  ShapeDescriptor shape;
  std::vector<double> structural;  // 3 x K
  double gaussian_curvature = 0.0;
};

struct FaceFeatureTable {
  std::vector<FaceFeatures> faces;
  SpatialTransform transform;
  std::size_t bases = 0;
};

inline FaceFeatureTable compute_geometric_features(const TexturedMesh& mesh, const DirectionBases& bases) {
  const NormalizedCenters normalized = normalize_spatial(mesh);
  const CurvatureField curvature = gaussian_curvature(mesh);
  FaceFeatureTable table;
  table.transform = normalized.transform;
  table.bases = bases.size();
  table.faces.resize(mesh.num_faces());
  parallel_for(mesh.num_faces(), [&](std::size_t f) {
    FaceFeatures& row = table.faces[f];
    const int face = static_cast<int>(f);
    row.center = normalized.centers[f];
    row.corner_vectors = mesh.corner_vectors(f);
    for (Vec3& v : row.corner_vectors) v /= normalized.transform.scale;
    row.shape = shape_descriptor(mesh, face);
    row.structural = structural_descriptor(mesh, face, bases);
    row.gaussian_curvature = curvature.face_curvature[f];
  });
  return table;
}

}  // namespace meshsal
