#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <numbers>
#include <queue>
#include <random>
#include <set>

#include "meshsal/obj_io.hpp"
#include "meshsal/primitives.hpp"
#include "support.hpp"

using namespace meshsal;
using testsupport::TempDir;

namespace {

// All-pairs BFS distances over faces, computed from raw edge sharing.
std::vector<std::vector<int>> face_distances(const TexturedMesh& mesh) {
  const std::size_t nf = mesh.num_faces();
  std::vector<std::vector<int>> nbr(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t g = 0; g < nf; ++g) {
      if (f == g) continue;
      int shared = 0;
      for (int a : mesh.face(f))
        for (int b : mesh.face(g)) shared += a == b;
      if (shared >= 2) nbr[f].push_back(static_cast<int>(g));
    }
  }
  std::vector<std::vector<int>> dist(nf, std::vector<int>(nf, -1));
  for (std::size_t s = 0; s < nf; ++s) {
    std::queue<int> q;
    q.push(static_cast<int>(s));
    dist[s][s] = 0;
    while (!q.empty()) {
      const int f = q.front();
      q.pop();
      for (int g : nbr[f]) {
        if (dist[s][g] >= 0) continue;
        dist[s][g] = dist[s][f] + 1;
        q.push(g);
      }
    }
  }
  return dist;
}

std::vector<int> members_within(const std::vector<int>& dist_row, int depth) {
  std::vector<int> out;
  for (std::size_t g = 0; g < dist_row.size(); ++g)
    if (dist_row[g] >= 1 && dist_row[g] <= depth) out.push_back(static_cast<int>(g));
  return out;
}

TexturedMesh single_triangle() {
  return TexturedMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
}

}  // namespace

TEST(TexturedMesh, SingleTriangleDerivedGeometry) {
  const TexturedMesh m = single_triangle();
  EXPECT_NEAR((m.face_center(0) - Vec3(1.0 / 3.0, 1.0 / 3.0, 0.0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((m.face_normal(0) - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(m.face_area(0), 0.5);
  EXPECT_TRUE(m.adjacency(0).empty());
}

TEST(TexturedMesh, InvariantsOnPrimitives) {
  for (const TexturedMesh& m : {primitives::cube(), primitives::icosphere(2, 1.7), primitives::terrain(12, 9, 0.3, 0.5, 4)}) {
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
      EXPECT_NEAR(m.face_normal(f).norm(), 1.0, 1e-9);
      EXPECT_GT(m.face_area(f), 1e-12);
      Vec3 sum = Vec3::Zero();
      for (const Vec3& c : m.corner_vectors(f)) sum += c;
      EXPECT_LT(sum.norm(), 1e-9);
      const auto adj = m.adjacency(f);
      EXPECT_LE(adj.size(), 3u);
      for (int g : adj) {
        const auto back = m.adjacency(g);
        EXPECT_TRUE(std::find(back.begin(), back.end(), static_cast<int>(f)) != back.end());
      }
    }
  }
}

TEST(TexturedMesh, ClosedMeshDivergenceIdentity) {
  for (const TexturedMesh& m : {primitives::cube(2.0, Vec3(1, 2, 3)), primitives::icosphere(3, 0.8)}) {
    Vec3 sum = Vec3::Zero();
    for (std::size_t f = 0; f < m.num_faces(); ++f) sum += m.face_area(f) * m.face_normal(f);
    EXPECT_LT(sum.norm(), 1e-6);
  }
}

TEST(TexturedMesh, CubeNormalsPointOutward) {
  const TexturedMesh m = primitives::cube();
  for (std::size_t f = 0; f < m.num_faces(); ++f) EXPECT_GT(m.face_normal(f).dot(m.face_center(f)), 0.0);
}

TEST(TexturedMesh, RejectsDegenerateFaces) {
  try {
    TexturedMesh({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}}, {{0, 1, 3}, {0, 1, 2}, {1, 1, 3}});
    FAIL() << "expected DegenerateFaceError";
  } catch (const DegenerateFaceError& e) {
    EXPECT_EQ(e.faces(), (std::vector<int>{1, 2}));
  }
}

TEST(TexturedMesh, RejectsOutOfRangeIndex) {
  EXPECT_THROW(TexturedMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 3}}), InputError);
}

TEST(TexturedMesh, NonManifoldEdgeKeepsAllIncidentFacesAndWarns) {
  // Three triangles sharing edge (0,1).
  const TexturedMesh m({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}}, {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}});
  EXPECT_EQ(m.num_nonmanifold_edges(), 1u);
  EXPECT_FALSE(m.warnings().empty());
  for (int f = 0; f < 3; ++f) EXPECT_EQ(m.adjacency(f).size(), 2u);
}

TEST(RingNeighbors, PlanarGridInteriorFaceHasThreeEdgeNeighbours) {
  const TexturedMesh g = primitives::grid(6, 6);
  const int interior = 2 * (3 * 6 + 3);  // lower triangle of cell (3,3)
  EXPECT_EQ(ring_neighbors(g, interior, 1).members.size(), 3u);
}

TEST(RingNeighbors, IsolatedTriangleHasNoMembers) {
  EXPECT_TRUE(ring_neighbors(single_triangle(), 0, 3).members.empty());
}

TEST(RingNeighbors, IcosahedronRingTwoHasNineMembers) {
  const TexturedMesh ico = primitives::icosahedron();
  const auto dist = face_distances(ico);
  for (int f = 0; f < 20; ++f) {
    const auto layers = ring_layers(ico, f, 2);
    EXPECT_EQ(layers[1].size(), 3u);
    EXPECT_EQ(layers[2].size(), 6u);
    const auto r2 = ring_neighbors(ico, f, 2);
    EXPECT_EQ(r2.members.size(), 9u);
    EXPECT_EQ(r2.members, members_within(dist[f], 2));
  }
}

TEST(RingNeighbors, MatchesBruteForceBfs) {
  for (const TexturedMesh& m : {primitives::icosphere(2), primitives::grid(9, 7), primitives::cube()}) {
    const auto dist = face_distances(m);
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
      std::vector<int> previous;
      for (int r = 1; r <= 3; ++r) {
        const auto n = ring_neighbors(m, static_cast<int>(f), r);
        EXPECT_EQ(n.members, members_within(dist[f], r)) << "face " << f << " ring " << r;
        EXPECT_TRUE(std::includes(n.members.begin(), n.members.end(), previous.begin(), previous.end()));
        EXPECT_TRUE(std::is_sorted(n.members.begin(), n.members.end()));
        previous = n.members;
      }
    }
  }
}

TEST(RingNeighbors, MatchesBruteForceBfsOnLargeMesh) {
  // ~10k faces; oracle BFS over edge adjacency rebuilt from shared vertices.
  const TexturedMesh m = primitives::terrain(71, 70, 1.0, 0.4, 11);
  ASSERT_GT(m.num_faces(), 9900u);
  std::vector<std::vector<int>> nbr(m.num_faces());
  for (std::size_t f = 0; f < m.num_faces(); ++f) {
    std::set<int> candidates;
    for (int v : m.face(f))
      for (int g : m.vertex_faces(v)) candidates.insert(g);
    for (int g : candidates) {
      if (g == static_cast<int>(f)) continue;
      int shared = 0;
      for (int a : m.face(f))
        for (int b : m.face(g)) shared += a == b;
      if (shared == 2) nbr[f].push_back(g);
    }
  }
  for (std::size_t f = 0; f < m.num_faces(); f += 7) {
    std::map<int, int> depth{{static_cast<int>(f), 0}};
    std::queue<int> q;
    q.push(static_cast<int>(f));
    while (!q.empty()) {
      const int x = q.front();
      q.pop();
      if (depth[x] == 3) continue;
      for (int g : nbr[x])
        if (depth.emplace(g, depth[x] + 1).second) q.push(g);
    }
    for (int r = 1; r <= 3; ++r) {
      std::vector<int> expected;
      for (auto [g, d] : depth)
        if (d >= 1 && d <= r) expected.push_back(g);
      ASSERT_EQ(ring_neighbors(m, static_cast<int>(f), r).members, expected);
    }
  }
}

TEST(RingNeighbors, RejectsInvalidArguments) {
  const TexturedMesh m = primitives::cube();
  EXPECT_THROW(ring_neighbors(m, 0, 0), InputError);
  EXPECT_THROW(ring_neighbors(m, 0, 4), InputError);
  EXPECT_THROW(ring_neighbors(m, 12, 1), InputError);
  EXPECT_THROW(ring_neighbors(m, -1, 1), InputError);
  EXPECT_TRUE(ring_members(m, 0, 0).empty());
}

TEST(ObjIo, LoadsCubeWithoutUv) {
  TempDir dir;
  testsupport::write_file(dir.file("cube.obj"),
                          "# cube\n"
                          "v -0.5 -0.5 -0.5\nv 0.5 -0.5 -0.5\nv -0.5 0.5 -0.5\nv 0.5 0.5 -0.5\n"
                          "v -0.5 -0.5 0.5\nv 0.5 -0.5 0.5\nv -0.5 0.5 0.5\nv 0.5 0.5 0.5\n"
                          "vn 0 0 1\n"
                          "f 1 3 4\nf 1 4 2\nf 5 6 8\nf 5 8 7\nf 1 2 6\nf 1 6 5\n"
                          "f 3 7 8\nf 3 8 4\nf 1 5 7\nf 1 7 3\nf 2//1 4//1 8//1\nf 2 8 6\n");
  const TexturedMesh m = load_mesh(dir.file("cube.obj"));
  EXPECT_EQ(m.num_faces(), 12u);
  EXPECT_EQ(m.num_vertices(), 8u);
  EXPECT_FALSE(m.has_uv());
  EXPECT_FALSE(m.texture_path().has_value());
}

TEST(ObjIo, OutOfRangeTextureIndexReportsLine) {
  TempDir dir;
  testsupport::write_file(dir.file("bad.obj"),
                          "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/99\n");
  try {
    load_mesh(dir.file("bad.obj"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_NE(std::string(e.what()).find("bad.obj:7"), std::string::npos);
  }
}

TEST(ObjIo, MalformedRecordsReportLine) {
  TempDir dir;
  const std::vector<std::pair<std::string, std::size_t>> cases = {
      {"v 0 0 0\nv 1 0 x\n", 2},
      {"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n", 4},
      {"v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2 3\n", 5},
      {"v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 1.5 0\n", 4},
  };
  for (const auto& [text, line] : cases) {
    testsupport::write_file(dir.file("m.obj"), text);
    try {
      load_mesh(dir.file("m.obj"));
      ADD_FAILURE() << "expected ParseError for:\n" << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
    }
  }
}

TEST(ObjIo, UvWrapOption) {
  TempDir dir;
  testsupport::write_file(dir.file("w.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 1.25 -0.25\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
  EXPECT_THROW(load_mesh(dir.file("w.obj")), ParseError);
  ObjLoadOptions opts;
  opts.uv_wrap = true;
  const TexturedMesh m = load_mesh(dir.file("w.obj"), opts);
  EXPECT_DOUBLE_EQ(m.face_uv(0)[0].x(), 0.25);
  EXPECT_DOUBLE_EQ(m.face_uv(0)[0].y(), 0.75);
}

TEST(ObjIo, PerCornerUvsPreservedAndPolygonsFanTriangulated) {
  TempDir dir;
  testsupport::write_file(dir.file("q.obj"),
                          "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                          "vt 0.1 0.1\nvt 0.9 0.1\nvt 0.9 0.9\nvt 0.1 0.9\nvt 0.5 0.5\n"
                          "f 1/1 2/2 3/3 4/4\nf -4/5 -2/4 -3/3\n");
  const TexturedMesh m = load_mesh(dir.file("q.obj"));
  ASSERT_EQ(m.num_faces(), 3u);
  EXPECT_EQ(m.face(1), (Face{0, 2, 3}));
  EXPECT_EQ(m.face_uv(1)[1], Vec2(0.9, 0.9));
  // Vertex 0 carries a different UV in face 2 than in faces 0 and 1.
  EXPECT_EQ(m.face(2)[0], 0);
  EXPECT_EQ(m.face_uv(2)[0], Vec2(0.5, 0.5));
  EXPECT_EQ(m.face_uv(0)[0], Vec2(0.1, 0.1));
}

TEST(ObjIo, ReadsMaterialTexture) {
  TempDir dir;
  testsupport::write_file(dir.file("t.mtl"), "newmtl a\nKd 1 1 1\nmap_Kd -bm 1 tex/albedo.png\n");
  testsupport::write_file(dir.file("t.obj"), "mtllib t.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
  const TexturedMesh m = load_mesh(dir.file("t.obj"));
  ASSERT_TRUE(m.texture_path().has_value());
  EXPECT_EQ(std::filesystem::path(*m.texture_path()), dir.path() / "tex/albedo.png");
}

TEST(ObjIo, RoundTripIsBitExact) {
  TempDir dir;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TexturedMesh t = primitives::terrain(7, 5, 0.1 + u(rng), 1.0 / 3.0, 9);
  std::vector<Vec3> v = t.vertices();
  for (Vec3& p : v) p += Vec3(u(rng), u(rng), u(rng)) * 1e-3;
  std::vector<FaceUv> uv = t.uv_corners();
  for (auto& tri : uv)
    for (Vec2& c : tri) c = (c * 0.9 + Vec2::Constant(0.05 + 1e-3 * u(rng))).eval();
  const TexturedMesh m(v, t.faces(), uv, (dir.path() / "albedo.png").string());
  save_mesh(dir.file("out.obj"), m);
  const TexturedMesh back = load_mesh(dir.file("out.obj"));
  ASSERT_EQ(back.num_vertices(), m.num_vertices());
  ASSERT_EQ(back.num_faces(), m.num_faces());
  for (std::size_t i = 0; i < m.num_vertices(); ++i) EXPECT_EQ(back.vertex(i), m.vertex(i));
  for (std::size_t f = 0; f < m.num_faces(); ++f) {
    EXPECT_EQ(back.face(f), m.face(f));
    for (int k = 0; k < 3; ++k) EXPECT_EQ(back.face_uv(f)[k], m.face_uv(f)[k]);
  }
  ASSERT_TRUE(back.texture_path().has_value());
  EXPECT_EQ(std::filesystem::weakly_canonical(*back.texture_path()), std::filesystem::weakly_canonical(dir.path() / "albedo.png"));
  // Saving the reloaded mesh again yields identical bytes.
  const std::string first = testsupport::read_file(dir.file("out.obj"));
  save_mesh(dir.file("out.obj"), back);
  EXPECT_EQ(testsupport::read_file(dir.file("out.obj")), first);
}

TEST(ObjIo, ColoredPlyLayout) {
  TempDir dir;
  const TexturedMesh m = single_triangle();
  const std::vector<Rgb8> colors = {Rgb8{255, 0, 0}, Rgb8{0, 255, 0}, Rgb8{0, 0, 255}};
  write_colored_ply(dir.file("t.ply"), m, colors);
  const std::string bytes = testsupport::read_file(dir.file("t.ply"));
  const std::string end = "end_header\n";
  const auto pos = bytes.find(end);
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NE(bytes.find("element vertex 3"), std::string::npos);
  EXPECT_NE(bytes.find("element face 1"), std::string::npos);
  const std::size_t body = pos + end.size();
  EXPECT_EQ(bytes.size() - body, 3 * (12 + 3) + (1 + 12));
  float x1;
  std::memcpy(&x1, bytes.data() + body + 15, 4);
  EXPECT_EQ(x1, 1.0f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[body + 15 + 12 + 1]), 255);
  EXPECT_EQ(static_cast<unsigned char>(bytes[body + 45]), 3);
}
