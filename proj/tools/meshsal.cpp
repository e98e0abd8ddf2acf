#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "meshsal/meshsal.hpp"

namespace fs = std::filesystem;
using namespace meshsal;

namespace {

struct Param {
  std::string key;
  std::string fallback;
  std::string help;
  enum Kind { Value, Flag, List } kind = Value;
};

// Effective parameters for one run: defaults, then the config file, then flags.
class RunConfig {
 public:
  RunConfig(std::string command, std::vector<Param> params) : command_(std::move(command)), params_(std::move(params)) {
    for (const Param& p : params_) values_[p.key] = p.fallback;
  }

  const std::string& command() const { return command_; }
  const std::vector<Param>& params() const { return params_; }

  bool known(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_.at(key) = std::move(value); }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(path, line_no, "expected key=value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key == "command") {
        if (value != command_) throw ParseError(path, line_no, "config is for '" + value + "', not '" + command_ + "'");
        continue;
      }
      if (!known(key)) throw ParseError(path, line_no, "unknown key '" + key + "' for " + command_);
      set(key, value);
    }
  }

  std::string sidecar() const {
    std::string out = "command=" + command_ + "\n";
    for (const Param& p : params_) out += p.key + "=" + values_.at(p.key) + "\n";
    return out;
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  std::string required(const std::string& key) const {
    const std::string& v = str(key);
    if (v.empty()) throw InputError("missing required parameter '" + key + "'");
    return v;
  }

  double number(const std::string& key) const {
    auto v = detail::parse_double(str(key));
    if (!v || !std::isfinite(*v)) throw InputError("parameter '" + key + "' is not a number: '" + str(key) + "'");
    return *v;
  }

  long long integer(const std::string& key) const {
    auto v = detail::parse_int(str(key));
    if (!v) throw InputError("parameter '" + key + "' is not an integer: '" + str(key) + "'");
    return *v;
  }

  std::uint64_t seed() const {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(str("seed"), &used);
      if (used == str("seed").size() && str("seed").front() != '-') return v;
    } catch (const std::exception&) {
    }
    throw InputError("parameter 'seed' is not an unsigned 64-bit integer: '" + str("seed") + "'");
  }

  bool boolean(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InputError("parameter '" + key + "' must be true or false: '" + v + "'");
  }

  Vec3 vec3(const std::string& key) const {
    const auto parts = csv::split(str(key));
    if (parts.size() != 3) throw InputError("parameter '" + key + "' needs three comma-separated numbers");
    Vec3 out;
    for (int k = 0; k < 3; ++k) {
      auto v = detail::parse_double(parts[k]);
      if (!v || !std::isfinite(*v)) throw InputError("parameter '" + key + "' has a malformed component");
      out[k] = *v;
    }
    return out;
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    if (str(key).empty()) return out;
    for (auto& s : csv::split(str(key)))
      if (!s.empty()) out.push_back(s);
    return out;
  }

  fs::path out_path(const std::string& name) const { return fs::path(str("out_dir")) / name; }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::string command_;
  std::vector<Param> params_;
  std::map<std::string, std::string> values_;
};

std::vector<Param> with_common(std::vector<Param> params) {
  params.push_back({"out_dir", ".", "Directory for output files"});
  params.push_back({"seed", "0", "Seed for all random draws"});
  return params;
}

std::vector<Param> schedule_params() {
  return {
      {"axis", "0,1,0", "Turntable rotation axis (x,y,z)"},
      {"speed_deg_s", "15", "Turntable angular speed in degrees per second"},
      {"direction", "-1", "Rotation sign: -1 clockwise seen from +axis, 1 counter-clockwise"},
      {"t0_ms", "0", "Time at which the model frame equals the world frame"},
      {"pivot", "0,0,0", "Point on the rotation axis"},
  };
}

RotationSchedule schedule_from(const RunConfig& c) {
  RotationSchedule s;
  s.axis = c.vec3("axis");
  s.angular_speed_deg_s = c.number("speed_deg_s");
  s.sign = c.number("direction");
  s.t0_ms = c.number("t0_ms");
  s.pivot = c.vec3("pivot");
  validate_schedule(s);
  return s;
}

TexturedMesh load_input_mesh(const RunConfig& c) {
  TexturedMesh mesh = load_mesh(c.required("mesh"));
  for (const std::string& w : mesh.warnings()) std::cerr << "warning: " << c.str("mesh") << ": " << w << "\n";
  return mesh;
}

SaliencyMap load_map_for(const std::string& path, const TexturedMesh& mesh) {
  SaliencyMap map = load_saliency(path);
  if (map.size() != mesh.num_faces()) {
    throw InputError(path + ": saliency map has " + std::to_string(map.size()) + " values for " +
                     std::to_string(mesh.num_faces()) + " faces");
  }
  return map;
}

std::optional<TextureImage> texture_for(const RunConfig& c, const TexturedMesh& mesh) {
  if (!c.str("texture").empty()) return load_texture(c.str("texture"));
  if (mesh.texture_path()) return load_texture(*mesh.texture_path());
  return std::nullopt;
}

// Subcommands ----------------------------------------------------------------

void run_saliency(const RunConfig& c) {
  const TexturedMesh mesh = load_input_mesh(c);
  const Bvh bvh = build_bvh(mesh);
  const RotationSchedule schedule = schedule_from(c);
  IvtParams ivt;
  ivt.velocity_threshold_deg_s = c.number("velocity_threshold");
  ivt.min_fixation_duration_ms = c.number("min_fixation_ms");
  ivt.merge_angle_deg = c.number("merge_angle_deg");
  ivt.merge_gap_ms = c.number("merge_gap_ms");
  ivt.gap_factor = c.number("gap_factor");
  KernelParams kernel;
  kernel.sigma_angle_deg = c.number("sigma_deg");
  kernel.truncate_sigmas = c.number("truncate_sigmas");
  kernel.normalize = c.boolean("normalize");

  const auto logs = c.list("logs");
  if (logs.empty()) throw InputError("missing required parameter 'logs'");
  std::vector<Fixation> pooled;
  for (const std::string& path : logs) {
    const auto log = load_gaze_log(path);
    const auto hits = intersect_log(log, mesh, bvh, schedule);
    const auto fixations = classify_fixations(hits, mesh, ivt);
    std::cout << path << ": " << log.size() << " samples, " << fixations.size() << " fixations\n";
    pooled.insert(pooled.end(), fixations.begin(), fixations.end());
  }
  if (pooled.empty()) throw InputError("no fixations detected in the gaze logs");
  const SaliencyMap map = smooth_fixations(pooled, mesh, kernel);
  save_saliency(c.out_path("saliency.csv").string(), map);
  csv::write_file(c.out_path("fixations.csv").string(), format_fixation_report(pooled));
  std::cout << "saliency argmax face " << map.argmax() << "\n";
}

void run_metrics(const RunConfig& c) {
  const SaliencyMap pred = load_saliency(c.required("pred"));
  const SaliencyMap truth = load_saliency(c.required("truth"));
  const MetricReport r = compare_maps(pred, truth);
  const std::string record = format_metric_record(r);
  csv::write_file(c.out_path("metrics.txt").string(), record + "\n");
  std::cout << record << "\n";
  if (c.boolean("pretty")) std::cout << format_metric_pretty(r);
}

void run_features(const RunConfig& c) {
  const TexturedMesh mesh = load_input_mesh(c);
  const int k = static_cast<int>(c.integer("bases"));
  const int grid = static_cast<int>(c.integer("grid"));
  const bool export_grid = c.boolean("export_grid");
  const FaceFeatureTable table = compute_geometric_features(mesh, DirectionBases::fibonacci(k));
  const auto texture = texture_for(c, mesh);
  std::vector<FacePatch> patches;
  if (texture) patches = face_texture_features(mesh, *texture, grid);

  std::string out = "face,cx,cy,cz";
  for (int v = 0; v < 3; ++v)
    for (char axis : {'x', 'y', 'z'}) out += csv::format(",c%d%c", v, axis);
  out += ",e0,e1,e2,a0,a1,a2,area,irregularity";
  for (int r = 1; r <= kStructuralRings; ++r)
    for (int b = 0; b < k; ++b) out += csv::format(",s%d_%d", r, b);
  out += ",curvature";
  if (texture) {
    out += ",mean_r,mean_g,mean_b,color_variance";
    if (export_grid)
      for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
          for (char ch : {'r', 'g', 'b'}) out += csv::format(",g%d_%d_%c", i, j, ch);
  }
  out += "\n";
  for (std::size_t f = 0; f < table.faces.size(); ++f) {
    const FaceFeatures& row = table.faces[f];
    out += std::to_string(f);
    auto put = [&](double v) { out += "," + csv::g9(v); };
    for (int a = 0; a < 3; ++a) put(row.center[a]);
    for (const Vec3& v : row.corner_vectors)
      for (int a = 0; a < 3; ++a) put(v[a]);
    for (double e : row.shape.edge_lengths) put(e);
    for (double a : row.shape.angles) put(a);
    put(row.shape.area);
    put(row.shape.irregularity);
    for (double s : row.structural) put(s);
    put(row.gaussian_curvature);
    if (texture) {
      const FacePatch& p = patches[f];
      for (int ch = 0; ch < 3; ++ch) put(p.mean_color[ch]);
      put(p.color_variance);
      if (export_grid)
        for (const Color& g : p.grid)
          for (int ch = 0; ch < 3; ++ch) put(g[ch]);
    }
    out += "\n";
  }
  csv::write_file(c.out_path("features.csv").string(), out);
  std::cout << table.faces.size() << " faces, " << (texture ? "with" : "without") << " texture columns\n";
}

void run_analyze(const RunConfig& c) {
  const TexturedMesh mesh = load_input_mesh(c);
  const SaliencyMap map = load_map_for(c.required("saliency"), mesh);
  const auto texture = texture_for(c, mesh);
  if (!texture) throw InputError("analysis needs a texture (pass texture=... or a mesh with a material)");
  const auto curvature = gaussian_curvature(mesh).face_curvature;
  const auto patches = face_texture_features(mesh, *texture, static_cast<int>(c.integer("grid")));
  std::vector<double> variance;
  for (const FacePatch& p : patches) variance.push_back(p.color_variance);

  AnalysisParams params;
  params.repeats = static_cast<int>(c.integer("repeats"));
  params.samples_per_repeat = static_cast<int>(c.integer("samples"));
  params.salient_quantile = c.number("salient_quantile");
  params.seed = c.seed();
  const AnalysisReport r = sampling_analysis(map, curvature, variance, mesh.face_areas(), params);
  const std::string record = format_analysis_record(r);
  csv::write_file(c.out_path("analysis.txt").string(), record + "\n");
  save_saliency(c.out_path("baseline_saliency.csv").string(), baseline_predict(curvature, variance));
  std::cout << record << "\n" << format_analysis_pretty(r);
}

void run_simplify(const RunConfig& c) {
  const TexturedMesh mesh = load_input_mesh(c);
  std::optional<SaliencyMap> map;
  if (!c.str("saliency").empty()) map = load_map_for(c.str("saliency"), mesh);
  const long long target = c.integer("target_faces");
  if (target < 0) throw InputError("target_faces must be positive");
  SimplifyParams params;
  params.lambda = c.number("lambda");
  params.gamma = c.number("gamma");
  params.allow_seam_collapse = c.boolean("allow_seam_collapse");
  const SimplifyResult r = simplify_mesh(mesh, map, static_cast<std::size_t>(target), params);
  save_mesh(c.out_path("simplified.obj").string(), r.mesh);
  std::string faces = "face,source_face\n";
  for (std::size_t f = 0; f < r.source_faces.size(); ++f) faces += csv::format("%zu,%d\n", f, r.source_faces[f]);
  csv::write_file(c.out_path("simplified_faces.csv").string(), faces);
  std::cout << mesh.num_faces() << " -> " << r.mesh.num_faces() << " faces (" << r.collapses << " collapses)\n";
  if (!r.reached_target) std::cerr << "warning: stopped above target, no legal collapse remains\n";
}

void run_synth(const RunConfig& c) {
  const TexturedMesh mesh = load_input_mesh(c);
  const RotationSchedule schedule = schedule_from(c);
  Scenario scenario;
  scenario.eye = c.vec3("eye");
  scenario.noise_deg = c.number("noise_deg");
  scenario.rate_hz = c.number("rate_hz");
  scenario.start_ms = c.number("start_ms");
  scenario.seed = c.seed();
  if (!c.str("scenario").empty()) {
    scenario.dwells = load_scenario_dwells(c.str("scenario"));
  } else {
    RandomScenarioParams rp;
    rp.dwells = static_cast<int>(c.integer("dwells"));
    rp.min_dwell_ms = c.number("min_dwell_ms");
    rp.max_dwell_ms = c.number("max_dwell_ms");
    rp.saccade_ms = c.number("saccade_ms");
    rp.min_separation = c.number("min_separation");
    rp.min_facing_cos = c.number("min_facing_cos");
    if (rp.dwells < 1) throw InputError("dwells must be at least 1");
    if (!(rp.min_dwell_ms > 0.0 && rp.max_dwell_ms >= rp.min_dwell_ms)) throw InputError("invalid dwell range");
    scenario = random_scenario(mesh, build_bvh(mesh), schedule, scenario, rp, c.seed());
  }
  const SyntheticLog log = synth_gaze(scenario, mesh, schedule);
  save_gaze_log(c.out_path("gaze.csv").string(), log.samples);
  csv::write_file(c.out_path("truth.csv").string(), format_scripted_truth(log.truth));
  std::cout << log.samples.size() << " samples, " << log.truth.size() << " scripted dwells\n";
}

Rgb8 colormap(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
  if (v <= 0.5) {
    const double t = v / 0.5;
    return {0, byte(t), byte(1.0 - t)};
  }
  const double t = (v - 0.5) / 0.5;
  return {byte(t), byte(1.0 - t), 0};
}

void run_heatmap(const RunConfig& c) {
  const TexturedMesh mesh = load_input_mesh(c);
  const SaliencyMap map = load_map_for(c.required("saliency"), mesh).max_normalized();
  std::vector<double> sum(mesh.num_vertices(), 0.0);
  std::vector<int> count(mesh.num_vertices(), 0);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f)
    for (int v : mesh.face(f)) {
      sum[v] += map.values[f];
      ++count[v];
    }
  std::vector<Rgb8> colors(mesh.num_vertices());
  for (std::size_t v = 0; v < colors.size(); ++v) colors[v] = colormap(count[v] ? sum[v] / count[v] : 0.0);
  write_colored_ply(c.out_path("heatmap.ply").string(), mesh, colors);
  std::cout << "wrote " << c.out_path("heatmap.ply").string() << "\n";
}

struct Command {
  std::string name;
  std::string description;
  std::vector<Param> params;
  void (*run)(const RunConfig&);
};

std::vector<Command> commands() {
  std::vector<Param> saliency = {
      {"mesh", "", "Input OBJ mesh"},
      {"logs", "", "Gaze log files", Param::List},
  };
  for (const Param& p : schedule_params()) saliency.push_back(p);
  saliency.insert(saliency.end(), {
                                      {"velocity_threshold", "30", "I-VT velocity threshold, deg/s"},
                                      {"min_fixation_ms", "100", "Shortest kept fixation"},
                                      {"merge_angle_deg", "0.5", "Merge fixations closer than this angle"},
                                      {"merge_gap_ms", "75", "Merge fixations separated by less than this gap"},
                                      {"gap_factor", "3", "Split on sample gaps above this multiple of the median"},
                                      {"sigma_deg", "1", "Kernel width as visual angle"},
                                      {"truncate_sigmas", "3", "Kernel cut-off in sigmas"},
                                      {"normalize", "true", "Scale the map to sum 1"},
                                  });

  std::vector<Param> synth = {
      {"mesh", "", "Input OBJ mesh"},
      {"scenario", "", "Dwell script (face,duration_ms,saccade_ms[,w0,w1,w2]); random dwells when empty"},
      {"dwells", "3", "Number of random dwells"},
      {"min_dwell_ms", "250", "Shortest random dwell"},
      {"max_dwell_ms", "600", "Longest random dwell"},
      {"saccade_ms", "50", "Saccade duration between random dwells"},
      {"min_separation", "0", "Minimum distance between random targets"},
      {"min_facing_cos", "0.3", "Minimum cosine between a random target's normal and the view ray"},
      {"eye", "0,0,-3", "Viewer position in world coordinates"},
      {"noise_deg", "0", "Angular gaze noise, degrees per axis"},
      {"rate_hz", "120", "Sampling rate"},
      {"start_ms", "0", "First sample time"},
  };
  for (const Param& p : schedule_params()) synth.push_back(p);

  return {
      {"saliency", "Build a per-face saliency map from gaze logs", with_common(saliency), run_saliency},
      {"metrics", "Compare a predicted saliency map to a reference",
       with_common({{"pred", "", "Predicted map"},
                    {"truth", "", "Reference map"},
                    {"pretty", "false", "Also print a readable table", Param::Flag}}),
       run_metrics},
      {"features", "Export per-face geometric and texture features",
       with_common({{"mesh", "", "Input OBJ mesh"},
                    {"texture", "", "Texture image; defaults to the mesh material"},
                    {"bases", "64", "Number of direction bases"},
                    {"grid", "8", "Texture patch grid size"},
                    {"export_grid", "false", "Append flattened patch grids", Param::Flag}}),
       run_features},
      {"analyze", "Concordance of saliency with curvature and texture variance",
       with_common({{"mesh", "", "Input OBJ mesh"},
                    {"saliency", "", "Saliency map"},
                    {"texture", "", "Texture image; defaults to the mesh material"},
                    {"repeats", "100", "Repeats of the sampling procedure"},
                    {"samples", "1000", "Face pairs per repeat"},
                    {"salient_quantile", "0.2", "Fraction of faces counted as salient"},
                    {"grid", "8", "Texture patch grid size"}}),
       run_analyze},
      {"simplify", "Saliency-guided quadric simplification",
       with_common({{"mesh", "", "Input OBJ mesh"},
                    {"saliency", "", "Saliency map (optional)"},
                    {"target_faces", "", "Face budget"},
                    {"lambda", "9", "Saliency gain"},
                    {"gamma", "1", "Saliency exponent"},
                    {"allow_seam_collapse", "false", "Permit collapses on UV seams", Param::Flag}}),
       run_simplify},
      {"synth-gaze", "Generate a synthetic gaze log for a rotating mesh", with_common(synth), run_synth},
      {"heatmap", "Write a vertex-colored PLY of a saliency map",
       with_common({{"mesh", "", "Input OBJ mesh"}, {"saliency", "", "Saliency map"}}), run_heatmap},
  };
}

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh saliency toolkit: gaze to saliency, features, metrics and simplification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "meshsal 1.0");

  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  const auto table = commands();
  struct Bound {
    CLI::App* sub;
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, std::vector<std::string>> lists;
    std::map<std::string, bool> flags;
  };
  std::vector<Bound> bound(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    Bound& b = bound[i];
    b.sub = app.add_subcommand(table[i].name, table[i].description);
    b.sub->add_option("--config", b.config, "key=value file; flags override its entries");
    b.sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    for (const Param& p : table[i].params) {
      const std::string help = p.help + (p.fallback.empty() ? "" : " (default " + p.fallback + ")");
      switch (p.kind) {
        case Param::Value:
          b.sub->add_option(flag_name(p.key), b.values[p.key], help);
          break;
        case Param::List:
          b.sub->add_option(flag_name(p.key), b.lists[p.key], help);
          break;
        case Param::Flag:
          b.sub->add_flag(flag_name(p.key), b.flags[p.key], help);
          break;
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (std::size_t i = 0; i < table.size(); ++i) {
    Bound& b = bound[i];
    if (!b.sub->parsed()) continue;
    try {
      set_thread_count(threads);
      RunConfig config(table[i].name, table[i].params);
      if (!b.config.empty()) config.load_file(b.config);
      for (const Param& p : table[i].params) {
        const std::string flag = flag_name(p.key);
        if (b.sub->count(flag) == 0) continue;
        switch (p.kind) {
          case Param::Value:
            config.set(p.key, b.values[p.key]);
            break;
          case Param::List: {
            std::string joined;
            for (const auto& s : b.lists[p.key]) joined += (joined.empty() ? "" : ",") + s;
            config.set(p.key, joined);
            break;
          }
          case Param::Flag:
            config.set(p.key, b.flags[p.key] ? "true" : "false");
            break;
        }
      }
      config.seed();  // validate early
      fs::create_directories(config.str("out_dir"));
      table[i].run(config);
      csv::write_file(config.out_path(config.command() + ".config").string(), config.sidecar());
      return 0;
    } catch (const InvariantError& e) {
      std::cerr << "internal error: " << e.what() << "\n";
      return 3;
    } catch (const InputError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const fs::filesystem_error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "internal error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
