#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "meshsal/error.hpp"
#include "meshsal/mesh.hpp"
#include "meshsal/parallel.hpp"
#include "meshsal/texture.hpp"

namespace meshsal {

/// Square window [x_min, y_min, x_max, y_max] in UV coordinates rescaled to (-1, 1).
struct UvBounds {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
};

/// Raised for faces whose UV triangle has (near) zero area.
class DegenerateUvError : public InputError {
 public:
  explicit DegenerateUvError(std::vector<int> faces)
      : InputError(message(faces)), faces_(std::move(faces)) {}
  const std::vector<int>& faces() const { return faces_; }

 private:
  static std::string message(const std::vector<int>& faces) {
    std::string m = "degenerate UV triangles at faces:";
    for (std::size_t i = 0; i < std::min<std::size_t>(faces.size(), 32); ++i) m += " " + std::to_string(faces[i]);
    return m;
  }
  std::vector<int> faces_;
};

inline constexpr double kMinUvArea = 1e-14;

inline double uv_area(const FaceUv& uv) {
  const Vec2 a = uv[1] - uv[0];
  const Vec2 b = uv[2] - uv[0];
  return 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
}

/// Maps the UV triangle to (-1, 1) scale and grows the shorter side of its
/// bounding box symmetrically so the window is square and centered on the
/// triangle. Windows may extend past the chart; sampling clamps there.
inline UvBounds expand_bounds(const FaceUv& uv) {
  if (!(uv_area(uv) > kMinUvArea)) throw InputError("degenerate UV triangle");
  UvBounds b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Vec2& t : uv) {
    const double x = 2.0 * t.x() - 1.0;
    const double y = 2.0 * t.y() - 1.0;
    b.x_min = std::min(b.x_min, x);
    b.x_max = std::max(b.x_max, x);
    b.y_min = std::min(b.y_min, y);
    b.y_max = std::max(b.y_max, y);
  }
  const double w = b.width();
  const double h = b.height();
  if (w > h) {
    const double c = 0.5 * (b.y_min + b.y_max);
    b.y_min = c - 0.5 * w;
    b.y_max = c + 0.5 * w;
  } else if (h > w) {
    const double c = 0.5 * (b.x_min + b.x_max);
    b.x_min = c - 0.5 * h;
    b.x_max = c + 0.5 * h;
  }
  return b;
}

/// Per-face texture patch over the square window.
struct FacePatch {
  int face = -1;
  int grid_size = 0;
  UvBounds uv_bounds;
  std::vector<Color> grid;        // row-major, row i spans y from y_min upward
  std::vector<bool> inside_mask;  // grid point inside the UV triangle
  Color mean_color = Color::Zero();
  double color_variance = 0.0;

  const Color& at(int row, int col) const { return grid[static_cast<std::size_t>(row) * grid_size + col]; }

  /// Feature width of one face: 3 channels per grid point plus mean and variance.
  static std::size_t channels(int grid_size) { return 3 * static_cast<std::size_t>(grid_size) * grid_size + 4; }
};

/// Grid point (row i, col j) sits at the center of cell (i, j) of the window.
inline Vec2 patch_point(const UvBounds& b, int grid_size, int row, int col) {
  const double step_x = b.width() / grid_size;
  const double step_y = b.height() / grid_size;
  return {b.x_min + (col + 0.5) * step_x, b.y_min + (row + 0.5) * step_y};
}

/// Point-in-triangle in the (-1, 1) UV plane, inclusive within eps. The test
/// does not depend on corner order.
inline bool inside_uv_triangle(const FaceUv& uv, const Vec2& p, double eps = 1e-12) {
  std::array<Vec2, 3> c;
  for (int k = 0; k < 3; ++k) c[k] = 2.0 * uv[k] - Vec2::Ones();
  std::sort(c.begin(), c.end(), [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  auto edge = [](const Vec2& a, const Vec2& b, const Vec2& q) {
    return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
  };
  double e0 = edge(c[0], c[1], p);
  double e1 = edge(c[1], c[2], p);
  double e2 = edge(c[2], c[0], p);
  if (edge(c[0], c[1], c[2]) < 0.0) {
    e0 = -e0;
    e1 = -e1;
    e2 = -e2;
  }
  return e0 >= -eps && e1 >= -eps && e2 >= -eps;
}

/// Samples a G x G grid over the window with bilinear interpolation.
inline FacePatch sample_patch(const TextureImage& tex, const UvBounds& bounds, int grid_size) {
  if (grid_size < 2) throw InputError("patch grid size must be at least 2");
  FacePatch p;
  p.grid_size = grid_size;
  p.uv_bounds = bounds;
  p.grid.resize(static_cast<std::size_t>(grid_size) * grid_size);
  p.inside_mask.assign(p.grid.size(), false);
  for (int i = 0; i < grid_size; ++i) {
    for (int j = 0; j < grid_size; ++j) {
      const Vec2 q = patch_point(bounds, grid_size, i, j);
      p.grid[static_cast<std::size_t>(i) * grid_size + j] = sample_uv(tex, 0.5 * (q + Vec2::Ones()));
    }
  }
  return p;
}

/// Mean and variance over inside samples. Variance is the mean over channels
/// of the per-channel population variance.
inline void summarize_patch(FacePatch& p) {
  Color sum = Color::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    if (!p.inside_mask[i]) continue;
    sum += p.grid[i];
    ++n;
  }
  if (n == 0) return;
  p.mean_color = sum / static_cast<double>(n);
  Color var = Color::Zero();
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    if (!p.inside_mask[i]) continue;
    var += (p.grid[i] - p.mean_color).cwiseAbs2();
  }
  p.color_variance = (var / static_cast<double>(n)).mean();
}

/// Texture-aligned patch for one face. When no grid point falls inside a
/// sliver UV triangle, the triangle's UV centroid stands in as the single
/// inside sample.
inline FacePatch face_patch(const TexturedMesh& mesh, const TextureImage& tex, int face, int grid_size) {
  const FaceUv& uv = mesh.face_uv(face);
  FacePatch p = sample_patch(tex, expand_bounds(uv), grid_size);
  p.face = face;
  bool any = false;
  for (int i = 0; i < grid_size; ++i) {
    for (int j = 0; j < grid_size; ++j) {
      const bool in = inside_uv_triangle(uv, patch_point(p.uv_bounds, grid_size, i, j));
      p.inside_mask[static_cast<std::size_t>(i) * grid_size + j] = in;
      any = any || in;
    }
  }
  if (any) {
    summarize_patch(p);
  } else {
    p.mean_color = sample_uv(tex, (uv[0] + uv[1] + uv[2]) / 3.0);
    p.color_variance = 0.0;
  }
  return p;
}

inline std::vector<FacePatch> face_texture_features(const TexturedMesh& mesh, const TextureImage& tex, int grid_size = 8) {
  if (!mesh.has_uv()) throw InputError("mesh has no texture coordinates");
  if (grid_size < 2) throw InputError("patch grid size must be at least 2");
  std::vector<int> degenerate;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    if (!(uv_area(mesh.face_uv(f)) > kMinUvArea)) degenerate.push_back(static_cast<int>(f));
  }
  if (!degenerate.empty()) throw DegenerateUvError(std::move(degenerate));
  std::vector<FacePatch> out(mesh.num_faces());
  parallel_for(mesh.num_faces(), [&](std::size_t f) { out[f] = face_patch(mesh, tex, static_cast<int>(f), grid_size); });
  return out;
}

}  // namespace meshsal
