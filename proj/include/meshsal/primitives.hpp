#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "meshsal/mesh.hpp"

// Procedural meshes used by the CLI demos and the test suites.

namespace meshsal::primitives {

/// Axis-aligned cube, 12 outward-facing triangles, no UVs.
inline TexturedMesh cube(double size = 1.0, const Vec3& center = Vec3::Zero()) {
  const double h = 0.5 * size;
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.push_back(center + Vec3((i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h));
  }
  std::vector<Face> f = {{0, 2, 3}, {0, 3, 1},   // -z
                         {4, 5, 7}, {4, 7, 6},   // +z
                         {0, 1, 5}, {0, 5, 4},   // -y
                         {2, 6, 7}, {2, 7, 3},   // +y
                         {0, 4, 6}, {0, 6, 2},   // -x
                         {1, 3, 7}, {1, 7, 5}};  // +x
  return TexturedMesh(std::move(v), std::move(f));
}

/// Regular icosahedron inscribed in a sphere of the given radius.
inline TexturedMesh icosahedron(double radius = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p = p.normalized() * radius;
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return TexturedMesh(std::move(v), std::move(f));
}

/// Icosahedron subdivided `level` times with vertices projected to the sphere
/// (20 * 4^level faces).
inline TexturedMesh icosphere(int level, double radius = 1.0, const Vec3& center = Vec3::Zero()) {
  TexturedMesh base = icosahedron(1.0);
  std::vector<Vec3> v = base.vertices();
  std::vector<Face> faces = base.faces();
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((0.5 * (v[a] + v[b])).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& t : faces) {
      const int ab = mid(t[0], t[1]);
      const int bc = mid(t[1], t[2]);
      const int ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  for (Vec3& p : v) p = center + radius * p;
  return TexturedMesh(std::move(v), std::move(faces));
}

/// Planar nx-by-ny grid of cells in the z=0 plane, two triangles per cell,
/// normals +z. UVs span the unit square.
inline TexturedMesh grid(int nx, int ny, double spacing = 1.0) {
  std::vector<Vec3> v;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) v.emplace_back(i * spacing, j * spacing, 0.0);
  std::vector<Face> f;
  std::vector<FaceUv> uv;
  auto uv_of = [&](int i, int j) { return Vec2(static_cast<double>(i) / nx, static_cast<double>(j) / ny); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      uv.push_back({uv_of(i, j), uv_of(i + 1, j), uv_of(i + 1, j + 1)});
      f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      uv.push_back({uv_of(i, j), uv_of(i + 1, j + 1), uv_of(i, j + 1)});
    }
  }
  return TexturedMesh(std::move(v), std::move(f), std::move(uv));
}

/// Grid with random vertex heights in [0, amplitude]; 2*nx*ny faces.
inline TexturedMesh terrain(int nx, int ny, double spacing, double amplitude, std::uint64_t seed) {
  TexturedMesh flat = grid(nx, ny, spacing);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> height(0.0, amplitude);
  std::vector<Vec3> v = flat.vertices();
  for (Vec3& p : v) p.z() = height(rng);
  return TexturedMesh(std::move(v), flat.faces(), flat.uv_corners());
}

}  // namespace meshsal::primitives
