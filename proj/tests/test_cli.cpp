#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "meshsal/meshsal.hpp"
#include "support.hpp"

using namespace meshsal;
using testsupport::read_file;
using testsupport::TempDir;
using testsupport::write_file;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const TempDir& dir, const std::string& args) {
  const std::string out = dir.file("stdout.txt");
  const std::string err = dir.file("stderr.txt");
  const std::string cmd = std::string("\"") + MESHSAL_CLI_PATH + "\" " + args + " >\"" + out + "\" 2>\"" + err + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

void write_map(const std::string& path, const std::vector<double>& values) {
  SaliencyMap m;
  m.values = values;
  save_saliency(path, m);
}

// Icosphere turned so that `face` looks straight at the default eye at t = 0.
TexturedMesh sphere_facing_eye(int face) {
  const TexturedMesh s = primitives::icosphere(3);
  const Mat3 r = Eigen::Quaterniond::FromTwoVectors(s.face_center(face).normalized(), Vec3(0, 0, -1)).toRotationMatrix();
  std::vector<Vec3> v = s.vertices();
  for (Vec3& p : v) p = r * p;
  return TexturedMesh(std::move(v), s.faces());
}

std::string scenario_file(const TempDir& dir, const std::string& name, const std::vector<int>& faces) {
  std::string body = "face,duration_ms,saccade_ms\n";
  for (int f : faces) body += std::to_string(f) + ",400,60\n";
  write_file(dir.file(name), body);
  return dir.file(name);
}

std::vector<std::string> output_files(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

// Everything except the out_dir line, which names the directory itself.
std::string sidecar_without_out_dir(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("out_dir=", 0) != 0) out += line + "\n";
  return out;
}

void expect_same_outputs(const fs::path& a, const fs::path& b) {
  const auto names = output_files(a);
  ASSERT_EQ(names, output_files(b));
  for (const std::string& n : names) {
    const std::string x = read_file((a / n).string());
    const std::string y = read_file((b / n).string());
    if (n.size() > 7 && n.substr(n.size() - 7) == ".config") {
      EXPECT_EQ(sidecar_without_out_dir(x), sidecar_without_out_dir(y)) << n;
    } else {
      EXPECT_EQ(x, y) << n;
    }
  }
}

}  // namespace

TEST(Cli, MetricsOfIdenticalMaps) {
  TempDir dir;
  write_map(dir.file("m.csv"), {0.1, 0.4, 0.2, 0.3});
  const auto r = run(dir, "metrics --pred " + dir.file("m.csv") + " --truth " + dir.file("m.csv") + " --out-dir " +
                              dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "cc=1.000000000,sim=1.000000000,kld=0,se=0\n");
  EXPECT_EQ(read_file(dir.file("o/metrics.txt")), r.out);
  EXPECT_TRUE(fs::exists(dir.file("o/metrics.config")));
}

TEST(Cli, MetricsUniformAgainstDelta) {
  TempDir dir;
  std::vector<double> delta(100, 0.0);
  delta[37] = 1.0;
  write_map(dir.file("u.csv"), std::vector<double>(100, 0.01));
  write_map(dir.file("d.csv"), delta);
  const auto r = run(dir, "metrics --pred " + dir.file("u.csv") + " --truth " + dir.file("d.csv") + " --out-dir " +
                              dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("sim=0.010000000"), std::string::npos) << r.out;
}

TEST(Cli, MetricsLengthMismatchExitsTwo) {
  TempDir dir;
  write_map(dir.file("a.csv"), {1, 2, 3});
  write_map(dir.file("b.csv"), {1, 2});
  const auto r = run(dir, "metrics --pred " + dir.file("a.csv") + " --truth " + dir.file("b.csv") + " --out-dir " +
                              dir.file("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("differ in length"), std::string::npos) << r.err;
}

TEST(Cli, EmptyGazeLogReportsNoSamples) {
  TempDir dir;
  save_mesh(dir.file("cube.obj"), primitives::cube());
  for (const std::string content : {std::string(), std::string("t_ms,ox,oy,oz,dx,dy,dz,hx,hy,hz,hdx,hdy,hdz\n")}) {
    write_file(dir.file("empty.csv"), content);
    const auto r = run(dir, "saliency --mesh " + dir.file("cube.obj") + " --logs " + dir.file("empty.csv") +
                                " --out-dir " + dir.file("o"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("no samples"), std::string::npos) << r.err;
  }
}

TEST(Cli, MalformedLogNamesFileAndLine) {
  TempDir dir;
  save_mesh(dir.file("cube.obj"), primitives::cube());
  write_file(dir.file("bad.csv"), "t_ms,ox,oy,oz,dx,dy,dz,hx,hy,hz,hdx,hdy,hdz\n0,0,0,-3,0,0,1,0,0,-3,0,0,1\n"
                                  "8,0,0,-3,zero,0,1,0,0,-3,0,0,1\n");
  const auto r = run(dir, "saliency --mesh " + dir.file("cube.obj") + " --logs " + dir.file("bad.csv") +
                              " --out-dir " + dir.file("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(dir.file("bad.csv") + ":3:"), std::string::npos) << r.err;
}

TEST(Cli, SyntheticLogOnFaceGivesArgmax) {
  TempDir dir;
  save_mesh(dir.file("s.obj"), sphere_facing_eye(42));
  const std::string scen = scenario_file(dir, "scen.csv", {42});
  auto r = run(dir, "synth-gaze --mesh " + dir.file("s.obj") + " --scenario " + scen + " --out-dir " + dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run(dir, "saliency --mesh " + dir.file("s.obj") + " --logs " + dir.file("o/gaze.csv") + " --out-dir " +
                   dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_saliency(dir.file("o/saliency.csv")).argmax(), 42);
  EXPECT_NE(r.out.find("argmax face 42"), std::string::npos);
  const std::string report = read_file(dir.file("o/fixations.csv"));
  EXPECT_EQ(report.rfind("face,w0,w1,w2,start_ms,end_ms,duration_ms\n42,", 0), 0u) << report;
}

TEST(Cli, TwoLogsAddUp) {
  TempDir dir;
  const TexturedMesh mesh = sphere_facing_eye(100);
  save_mesh(dir.file("s.obj"), mesh);
  const std::vector<int> first{100}, second{mesh.adjacency(100)[0]};
  for (int i : {0, 1}) {
    const std::string scen = scenario_file(dir, "scen" + std::to_string(i) + ".csv", i ? second : first);
    const auto r = run(dir, "synth-gaze --mesh " + dir.file("s.obj") + " --scenario " + scen + " --out-dir " +
                                dir.file("g" + std::to_string(i)));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  auto saliency = [&](const std::string& logs, const std::string& out) {
    const auto r = run(dir, "saliency --normalize false --mesh " + dir.file("s.obj") + " --logs " + logs +
                                " --out-dir " + dir.file(out));
    EXPECT_EQ(r.code, 0) << r.err;
    return load_saliency(dir.file(out + "/saliency.csv"));
  };
  const SaliencyMap a = saliency(dir.file("g0/gaze.csv"), "a");
  const SaliencyMap b = saliency(dir.file("g1/gaze.csv"), "b");
  const SaliencyMap ab = saliency(dir.file("g0/gaze.csv") + " " + dir.file("g1/gaze.csv"), "ab");
  ASSERT_EQ(ab.size(), mesh.num_faces());
  for (std::size_t f = 0; f < ab.size(); ++f) {
    EXPECT_NEAR(ab.values[f], a.values[f] + b.values[f], 1e-8 * (ab.values[f] + 1e-12)) << f;
  }
  // The default run normalizes the pooled sum.
  const auto r = run(dir, "saliency --mesh " + dir.file("s.obj") + " --logs " + dir.file("g0/gaze.csv") + " " +
                              dir.file("g1/gaze.csv") + " --out-dir " + dir.file("n"));
  ASSERT_EQ(r.code, 0) << r.err;
  const SaliencyMap n = load_saliency(dir.file("n/saliency.csv"));
  const double total = ab.total();
  for (std::size_t f = 0; f < n.size(); ++f) EXPECT_NEAR(n.values[f], ab.values[f] / total, 1e-8 * n.values[f] + 1e-15);
}

TEST(Cli, HeatmapOfZeroMapIsBlue) {
  TempDir dir;
  const TexturedMesh mesh = primitives::icosphere(1);
  save_mesh(dir.file("s.obj"), mesh);
  write_map(dir.file("z.csv"), std::vector<double>(mesh.num_faces(), 0.0));
  const auto r = run(dir, "heatmap --mesh " + dir.file("s.obj") + " --saliency " + dir.file("z.csv") + " --out-dir " +
                              dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string ply = read_file(dir.file("o/heatmap.ply"));
  const std::string end = "end_header\n";
  const std::size_t body = ply.find(end) + end.size();
  ASSERT_NE(body, std::string::npos);
  ASSERT_GE(ply.size(), body + mesh.num_vertices() * 15);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const std::size_t at = body + v * 15 + 12;
    EXPECT_EQ(static_cast<unsigned char>(ply[at]), 0);
    EXPECT_EQ(static_cast<unsigned char>(ply[at + 1]), 0);
    EXPECT_EQ(static_cast<unsigned char>(ply[at + 2]), 255);
  }
}

TEST(Cli, HeatmapColorStops) {
  TempDir dir;
  // Two disjoint triangles: all of one triangle's vertices see one value.
  const TexturedMesh mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(2, 1, 0),
                           Vec3(4, 0, 0), Vec3(5, 0, 0), Vec3(4, 1, 0)},
                          {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}});
  save_mesh(dir.file("t.obj"), mesh);
  write_map(dir.file("m.csv"), {0.0, 1.0, 2.0});  // max-normalized to 0, 0.5, 1
  const auto r = run(dir, "heatmap --mesh " + dir.file("t.obj") + " --saliency " + dir.file("m.csv") + " --out-dir " +
                              dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string ply = read_file(dir.file("o/heatmap.ply"));
  const std::size_t body = ply.find("end_header\n") + 11;
  const std::array<std::array<int, 3>, 3> expected{{{0, 0, 255}, {0, 255, 0}, {255, 0, 0}}};
  for (int v = 0; v < 9; ++v)
    for (int k = 0; k < 3; ++k) EXPECT_EQ(static_cast<unsigned char>(ply[body + v * 15 + 12 + k]), expected[v / 3][k]);
}

TEST(Cli, SimplifyCubeToTwelveFacesIsByteIdentical) {
  TempDir dir;
  save_mesh(dir.file("cube.obj"), primitives::cube());
  const auto r = run(dir, "simplify --mesh " + dir.file("cube.obj") + " --target-faces 12 --out-dir " + dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir.file("o/simplified.obj")), read_file(dir.file("cube.obj")));
}

TEST(Cli, SimplifyRejectsBadTargets) {
  TempDir dir;
  save_mesh(dir.file("cube.obj"), primitives::cube());
  EXPECT_EQ(run(dir, "simplify --mesh " + dir.file("cube.obj") + " --target-faces 13 --out-dir " + dir.file("o")).code, 2);
  EXPECT_EQ(run(dir, "simplify --mesh " + dir.file("cube.obj") + " --target-faces 3 --out-dir " + dir.file("o")).code, 2);
  EXPECT_EQ(run(dir, "simplify --mesh " + dir.file("cube.obj") + " --target-faces ten --out-dir " + dir.file("o")).code, 2);
  EXPECT_EQ(run(dir, "simplify --mesh " + dir.file("cube.obj") + " --out-dir " + dir.file("o")).code, 2);
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(run(dir, "").code, 2);
  EXPECT_EQ(run(dir, "frobnicate").code, 2);
  EXPECT_EQ(run(dir, "metrics --no-such-flag 1").code, 2);
  EXPECT_EQ(run(dir, "--help").code, 0);
}

TEST(Cli, ConfigFileRejectsUnknownKeys) {
  TempDir dir;
  write_map(dir.file("m.csv"), {1, 2});
  write_file(dir.file("c.cfg"), "# comment\npred=" + dir.file("m.csv") + "\ntruth=" + dir.file("m.csv") +
                                    "\nlamda=3\n");
  const auto r = run(dir, "metrics --config " + dir.file("c.cfg") + " --out-dir " + dir.file("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(dir.file("c.cfg") + ":4: unknown key 'lamda'"), std::string::npos) << r.err;
}

TEST(Cli, FlagsOverrideConfig) {
  TempDir dir;
  write_map(dir.file("a.csv"), {1, 2, 3});
  write_map(dir.file("b.csv"), {3, 2, 1});
  write_file(dir.file("c.cfg"), "pred=" + dir.file("a.csv") + "\ntruth=" + dir.file("b.csv") + "\n");
  auto r = run(dir, "metrics --config " + dir.file("c.cfg") + " --out-dir " + dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("cc=-1.000000000", 0), 0u) << r.out;
  r = run(dir, "metrics --config " + dir.file("c.cfg") + " --truth " + dir.file("a.csv") + " --out-dir " + dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("cc=1.000000000", 0), 0u) << r.out;
  EXPECT_NE(read_file(dir.file("o/metrics.config")).find("truth=" + dir.file("a.csv")), std::string::npos);
}

TEST(Cli, SidecarReproducesRun) {
  TempDir dir;
  save_mesh(dir.file("s.obj"), primitives::icosphere(3));
  auto r = run(dir, "synth-gaze --mesh " + dir.file("s.obj") + " --dwells 3 --noise-deg 0.2 --seed 11 --out-dir " +
                        dir.file("a"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string sidecar = read_file(dir.file("a/synth-gaze.config"));
  EXPECT_NE(sidecar.find("seed=11\n"), std::string::npos);
  EXPECT_EQ(sidecar.find("threads"), std::string::npos);
  r = run(dir, "synth-gaze --config " + dir.file("a/synth-gaze.config") + " --out-dir " + dir.file("b"));
  ASSERT_EQ(r.code, 0) << r.err;
  expect_same_outputs(dir.file("a"), dir.file("b"));
  // A different seed changes the draw.
  r = run(dir, "synth-gaze --config " + dir.file("a/synth-gaze.config") + " --seed 12 --out-dir " + dir.file("c"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(read_file(dir.file("a/gaze.csv")), read_file(dir.file("c/gaze.csv")));
}

TEST(Cli, ConfigForAnotherCommandIsRejected) {
  TempDir dir;
  write_file(dir.file("c.cfg"), "command=simplify\n");
  EXPECT_EQ(run(dir, "metrics --config " + dir.file("c.cfg")).code, 2);
}

TEST(Cli, FeaturesTableLayout) {
  TempDir dir;
  const TexturedMesh grid = primitives::terrain(4, 4, 1.0, 0.4, 3);
  std::vector<std::uint8_t> px(16 * 16 * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>((i * 37) % 251);
  save_ppm(dir.file("tex.ppm"), detail::from_rgb8(16, 16, px.data()));
  save_mesh(dir.file("t.obj"), TexturedMesh(grid.vertices(), grid.faces(), grid.uv_corners(), dir.file("tex.ppm")));
  auto r = run(dir, "features --mesh " + dir.file("t.obj") + " --bases 5 --grid 3 --export-grid --out-dir " +
                        dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(read_file(dir.file("o/features.csv")));
  std::string line;
  std::getline(in, line);
  const std::size_t columns = csv::split(line).size();
  EXPECT_EQ(columns, 1 + 3 + 9 + 8 + 3 * 5 + 1 + 4 + 27u);
  EXPECT_EQ(line.rfind("face,cx,cy,cz,c0x", 0), 0u);
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(csv::split(line).size(), columns);
    ++rows;
  }
  EXPECT_EQ(rows, 32);
  r = run(dir, "features --mesh " + dir.file("t.obj") + " --texture " + dir.file("missing.png") + " --out-dir " +
                   dir.file("o"));
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, AnalyzeMapEqualToCurvature) {
  TempDir dir;
  const TexturedMesh grid = primitives::terrain(16, 16, 0.1, 0.2, 5);
  std::vector<std::uint8_t> px(32 * 32 * 3);
  std::mt19937 rng(1);
  for (auto& p : px) p = static_cast<std::uint8_t>(rng() % 256);
  save_ppm(dir.file("tex.ppm"), detail::from_rgb8(32, 32, px.data()));
  const TexturedMesh mesh(grid.vertices(), grid.faces(), grid.uv_corners(), dir.file("tex.ppm"));
  save_mesh(dir.file("t.obj"), mesh);
  auto curvature = gaussian_curvature(load_mesh(dir.file("t.obj"))).face_curvature;
  const double lo = *std::min_element(curvature.begin(), curvature.end());
  for (double& c : curvature) c -= lo;
  write_map(dir.file("k.csv"), curvature);
  const auto r = run(dir, "analyze --mesh " + dir.file("t.obj") + " --saliency " + dir.file("k.csv") +
                              " --seed 3 --out-dir " + dir.file("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string record = read_file(dir.file("o/analysis.txt"));
  const double concordance = std::stod(record.substr(record.find('=') + 1));
  EXPECT_GE(concordance, 0.99) << record;
  EXPECT_TRUE(fs::exists(dir.file("o/baseline_saliency.csv")));
}

TEST(Cli, EveryCommandIsDeterministicAcrossRunsAndThreads) {
  TempDir dir;
  const TexturedMesh grid = primitives::terrain(12, 12, 0.2, 0.3, 2);
  std::vector<std::uint8_t> px(24 * 24 * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>((i * 71) % 256);
  save_ppm(dir.file("tex.ppm"), detail::from_rgb8(24, 24, px.data()));
  save_mesh(dir.file("t.obj"), TexturedMesh(grid.vertices(), grid.faces(), grid.uv_corners(), dir.file("tex.ppm")));
  save_mesh(dir.file("s.obj"), primitives::icosphere(3));
  ASSERT_EQ(run(dir, "synth-gaze --mesh " + dir.file("s.obj") +
                         " --dwells 4 --min-separation 0.3 --noise-deg 0.1 --seed 4 --out-dir " + dir.file("g"))
                .code,
            0);
  ASSERT_EQ(run(dir, "saliency --mesh " + dir.file("s.obj") + " --logs " + dir.file("g/gaze.csv") + " --out-dir " +
                         dir.file("m"))
                .code,
            0);
  std::vector<double> tmap;
  for (std::size_t f = 0; f < grid.num_faces(); ++f) tmap.push_back(std::fmod(f * 0.37, 1.0));
  write_map(dir.file("tmap.csv"), tmap);

  const std::vector<std::string> commands = {
      "synth-gaze --mesh " + dir.file("s.obj") + " --dwells 4 --noise-deg 0.3 --seed 9",
      "saliency --mesh " + dir.file("s.obj") + " --logs " + dir.file("g/gaze.csv"),
      "metrics --pred " + dir.file("m/saliency.csv") + " --truth " + dir.file("m/saliency.csv"),
      "features --mesh " + dir.file("t.obj") + " --bases 16",
      "analyze --mesh " + dir.file("t.obj") + " --saliency " + dir.file("tmap.csv") + " --repeats 5 --seed 8",
      "simplify --mesh " + dir.file("s.obj") + " --saliency " + dir.file("m/saliency.csv") + " --target-faces 400",
      "heatmap --mesh " + dir.file("s.obj") + " --saliency " + dir.file("m/saliency.csv"),
  };
  int i = 0;
  for (const std::string& cmd : commands) {
    const std::string a = dir.file("run" + std::to_string(i) + "a");
    const std::string b = dir.file("run" + std::to_string(i) + "b");
    const std::string c = dir.file("run" + std::to_string(i) + "c");
    ASSERT_EQ(run(dir, cmd + " --threads 1 --out-dir " + a).code, 0) << cmd;
    ASSERT_EQ(run(dir, cmd + " --threads 1 --out-dir " + b).code, 0) << cmd;
    ASSERT_EQ(run(dir, cmd + " --threads 8 --out-dir " + c).code, 0) << cmd;
    expect_same_outputs(a, b);
    expect_same_outputs(a, c);
    ++i;
  }
}
