#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "meshsal/error.hpp"
#include "meshsal/mesh.hpp"

namespace meshsal {

struct ObjLoadOptions {
  /// Wrap texture coordinates outside [0,1] modulo 1 instead of rejecting them.
  bool uv_wrap = false;
  double min_face_area = 1e-12;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Resolves a 1-based (or negative, relative) OBJ index against `count` records.
inline std::optional<int> resolve_obj_index(long long idx, std::size_t count) {
  long long zero_based = idx > 0 ? idx - 1 : static_cast<long long>(count) + idx;
  if (idx == 0 || zero_based < 0 || zero_based >= static_cast<long long>(count)) return std::nullopt;
  return static_cast<int>(zero_based);
}

inline std::optional<std::string> read_material_texture(const std::filesystem::path& mtl_path) {
  std::ifstream in(mtl_path);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = split_ws(line);
    if (tokens.size() >= 2 && tokens[0] == "map_Kd") {
      // Options such as -s/-o may precede the filename; it is always last.
      std::filesystem::path tex(std::string(tokens.back()));
      if (tex.is_relative()) tex = mtl_path.parent_path() / tex;
      return tex.lexically_normal().string();
    }
  }
  return std::nullopt;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads a Wavefront OBJ file. Polygons are fan-triangulated; `vn` records and
/// normal indices are ignored (normals come from the winding). A referenced
/// material library is parsed only for its diffuse texture filename.
inline TexturedMesh load_mesh(const std::string& path, const ObjLoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file: " + path);

  std::vector<Vec3> vertices;
  std::vector<Vec2> texcoords;
  std::vector<Face> faces;
  std::vector<FaceUv> uvs;
  std::optional<bool> faces_have_uv;
  std::optional<std::string> mtllib;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    const std::string_view kind = tokens[0];
    auto fail = [&](const std::string& what) { throw ParseError(path, line_no, what); };

    if (kind == "v") {
      if (tokens.size() < 4) fail("vertex record needs 3 coordinates");
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        auto value = detail::parse_double(tokens[k + 1]);
        if (!value || !std::isfinite(*value)) fail("malformed vertex coordinate '" + std::string(tokens[k + 1]) + "'");
        p[k] = *value;
      }
      vertices.push_back(p);
    } else if (kind == "vt") {
      if (tokens.size() < 3) fail("texture record needs 2 coordinates");
      Vec2 t;
      for (int k = 0; k < 2; ++k) {
        auto value = detail::parse_double(tokens[k + 1]);
        if (!value || !std::isfinite(*value)) fail("malformed texture coordinate '" + std::string(tokens[k + 1]) + "'");
        double c = *value;
        if (c < 0.0 || c > 1.0) {
          if (!options.uv_wrap) fail("texture coordinate outside [0,1] (enable uv_wrap to wrap)");
          c -= std::floor(c);
        }
        t[k] = c;
      }
      texcoords.push_back(t);
    } else if (kind == "f") {
      if (tokens.size() < 4) fail("face record needs at least 3 corners");
      std::vector<int> vidx;
      std::vector<int> tidx;
      bool corner_uv = false;
      for (std::size_t c = 1; c < tokens.size(); ++c) {
        const std::string_view tok = tokens[c];
        const std::size_t s1 = tok.find('/');
        const std::string_view vpart = tok.substr(0, s1);
        std::string_view tpart;
        if (s1 != std::string_view::npos) {
          const std::size_t s2 = tok.find('/', s1 + 1);
          tpart = tok.substr(s1 + 1, s2 == std::string_view::npos ? std::string_view::npos : s2 - s1 - 1);
        }
        auto v = detail::parse_int(vpart);
        if (!v) fail("malformed face index '" + std::string(tok) + "'");
        auto vr = detail::resolve_obj_index(*v, vertices.size());
        if (!vr) fail("vertex index " + std::to_string(*v) + " out of range");
        vidx.push_back(*vr);
        const bool has_t = !tpart.empty();
        if (c == 1) corner_uv = has_t;
        if (has_t != corner_uv) fail("face mixes corners with and without texture indices");
        if (has_t) {
          auto t = detail::parse_int(tpart);
          if (!t) fail("malformed texture index '" + std::string(tok) + "'");
          auto tr = detail::resolve_obj_index(*t, texcoords.size());
          if (!tr) fail("texture index " + std::to_string(*t) + " out of range");
          tidx.push_back(*tr);
        }
      }
      if (faces_have_uv && *faces_have_uv != corner_uv) fail("faces mix records with and without texture indices");
      faces_have_uv = corner_uv;
      for (std::size_t k = 1; k + 1 < vidx.size(); ++k) {
        faces.push_back({vidx[0], vidx[k], vidx[k + 1]});
        if (corner_uv) uvs.push_back({texcoords[tidx[0]], texcoords[tidx[k]], texcoords[tidx[k + 1]]});
      }
    } else if (kind == "mtllib") {
      if (tokens.size() >= 2 && !mtllib) mtllib = std::string(tokens[1]);
    }
  }

  std::optional<std::string> texture;
  if (mtllib) {
    const auto mtl_path = std::filesystem::path(path).parent_path() / *mtllib;
    texture = detail::read_material_texture(mtl_path);
  }
  MeshBuildOptions build;
  build.min_face_area = options.min_face_area;
  return TexturedMesh(std::move(vertices), std::move(faces), std::move(uvs), std::move(texture), build);
}

/// Writes a mesh as OBJ with shortest round-trip numeric formatting, so that
/// load_mesh(save_mesh(m)) reproduces positions, faces and UVs bit-exactly.
/// When the mesh carries a texture path a companion .mtl is written next to it.
inline void save_mesh(const std::string& path, const TexturedMesh& mesh) {
  std::ostringstream out;
  const std::filesystem::path obj_path(path);
  std::optional<std::string> mtl_name;
  if (mesh.texture_path()) {
    mtl_name = obj_path.stem().string() + ".mtl";
    std::filesystem::path tex(*mesh.texture_path());
    std::filesystem::path base = obj_path.parent_path().empty() ? std::filesystem::path(".") : obj_path.parent_path();
    std::filesystem::path rel = std::filesystem::proximate(tex, base);
    std::ofstream mtl(base / *mtl_name);
    if (!mtl) throw InputError("cannot write material file next to " + path);
    mtl << "newmtl textured\nmap_Kd " << rel.generic_string() << "\n";
    out << "mtllib " << *mtl_name << "\n";
  }
  for (const Vec3& p : mesh.vertices()) {
    out << "v " << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' '
        << detail::format_double(p.z()) << '\n';
  }
  std::vector<std::array<int, 3>> tex_index;
  if (mesh.has_uv()) {
    std::map<std::pair<double, double>, int> seen;
    tex_index.resize(mesh.num_faces());
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
      for (int k = 0; k < 3; ++k) {
        const Vec2& t = mesh.face_uv(f)[k];
        auto [it, inserted] = seen.try_emplace({t.x(), t.y()}, static_cast<int>(seen.size()));
        if (inserted) out << "vt " << detail::format_double(t.x()) << ' ' << detail::format_double(t.y()) << '\n';
        tex_index[f][k] = it->second;
      }
    }
    out << "usemtl textured\n";
  }
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    out << 'f';
    for (int k = 0; k < 3; ++k) {
      out << ' ' << mesh.face(f)[k] + 1;
      if (mesh.has_uv()) out << '/' << tex_index[f][k] + 1;
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InputError("cannot write mesh file: " + path);
  file << out.str();
  if (!file) throw InputError("failed writing mesh file: " + path);
}

using Rgb8 = std::array<std::uint8_t, 3>;

/// Binary little-endian PLY with float positions and per-vertex RGB.
inline void write_colored_ply(const std::string& path, const TexturedMesh& mesh, std::span<const Rgb8> colors) {
  if (colors.size() != mesh.num_vertices()) throw InvariantError("vertex color count does not match mesh");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write ply file: " + path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.num_vertices() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.num_faces() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  auto put_le32 = [&](std::uint32_t bits) {
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
  };
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    for (int k = 0; k < 3; ++k) put_le32(std::bit_cast<std::uint32_t>(static_cast<float>(mesh.vertex(v)[k])));
    out.write(reinterpret_cast<const char*>(colors[v].data()), 3);
  }
  for (const Face& f : mesh.faces()) {
    out.put(3);
    for (int idx : f) put_le32(static_cast<std::uint32_t>(idx));
  }
  if (!out) throw InputError("failed writing ply file: " + path);
}

}  // namespace meshsal
