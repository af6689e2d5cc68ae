#include "panoref/config.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "panoref/errors.hpp"

namespace panoref {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

// Strict view of one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  Section section(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    return Section(has(key) ? j_.at(key) : empty, where(key));
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError("unknown config key " + where(item.key()));
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

const char* selection_name(ClusterSelection s) { return s == ClusterSelection::Leaf ? "leaf" : "eom"; }

const char* mst_name(MstAlgorithm m) {
  switch (m) {
    case MstAlgorithm::Dense: return "dense";
    case MstAlgorithm::KdTree: return "kdtree";
    default: return "auto";
  }
}

const char* corruption_name(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::BoundaryBandFlip: return "boundary_band_flip";
    case CorruptionKind::VoidDropout: return "void_dropout";
    default: return "uniform_flip";
  }
}

ordered params_json(const Config& c) {
  const auto& p = c.pipeline;
  ordered j;
  j["seed"] = c.seed;
  j["scene_window"] = c.scene_window;
  j["projection"] = {{"z_min", p.min_depth}};
  j["ground"] = {{"zone_edges", p.ground.zone_edges},
                 {"sectors", p.ground.sectors},
                 {"ransac_iterations", p.ground.ransac_iterations},
                 {"inlier_distance", p.ground.inlier_distance},
                 {"max_tilt_deg", p.ground.max_tilt_deg},
                 {"seed_band", p.ground.seed_band},
                 {"lowest_point_count", p.ground.lowest_point_count},
                 {"min_seed_points", p.ground.min_seed_points}};
  ordered cluster{{"min_cluster_size", p.cluster.min_cluster_size}};
  cluster["min_samples"] = p.cluster.min_samples ? ordered(*p.cluster.min_samples) : ordered(nullptr);
  cluster["selection"] = selection_name(p.cluster.selection);
  cluster["mst"] = mst_name(p.cluster.mst);
  cluster["noise_k"] = p.noise_k;
  j["cluster"] = cluster;
  j["refine"] = {{"tau", p.refine.tau},
                 {"tau_void", p.refine.tau_void},
                 {"instance_radius", p.instance_fallback_radius}};
  j["ablate"] = {{"min_cluster_sizes", c.ablate_sizes}};
  const auto& s = c.synth.standard;
  ordered synth;
  synth["world_spec"] = c.synth.world_spec ? ordered(c.synth.world_spec->string()) : ordered(nullptr);
  synth["standard"] = {{"scans", s.scans},
                       {"scan_spacing", s.scan_spacing},
                       {"sensor_height", s.sensor_height},
                       {"rings", s.lidar.rings},
                       {"azimuth_steps", s.lidar.azimuth_steps},
                       {"max_range", s.lidar.max_range},
                       {"image_width", s.image_width},
                       {"image_height", s.image_height},
                       {"rig", s.rig == RigLayout::Full ? "full" : "gapped"},
                       {"ground_noise_sigma", s.ground_noise_sigma},
                       {"cars", s.cars},
                       {"pedestrians", s.pedestrians},
                       {"construction_vehicles", s.construction_vehicles},
                       {"buildings", s.buildings},
                       {"trees", s.trees}};
  synth["corruption"] = {{"kind", corruption_name(c.synth.corruption.kind)},
                         {"probability", c.synth.corruption.probability},
                         {"band_width", c.synth.corruption.band_width},
                         {"things_only", c.synth.corrupt_things_only}};
  synth["write_primal"] = c.synth.write_primal;
  j["synth"] = synth;
  return j;
}

}  // namespace

fs::path Config::labels(const std::string& dir) const {
  const fs::path p(dir);
  return p.is_absolute() ? p : dataset_root / p;
}

void Config::validate() const {
  pipeline.validate();
  if (scene_window < 1) throw ConfigError("scene_window must be >= 1");
  if (scene_window > 65535) throw ConfigError("scene_window must be <= 65535");
  if (ablate_sizes.empty()) throw ConfigError("ablate.min_cluster_sizes is empty");
  for (auto s : ablate_sizes)
    if (s < 2) throw ConfigError("ablate.min_cluster_sizes entries must be >= 2");
  const auto& p = synth.corruption;
  if (!(p.probability >= 0.0 && p.probability <= 1.0))
    throw ConfigError("synth.corruption.probability must be in [0, 1]");
  if (!(p.band_width >= 0.0)) throw ConfigError("synth.corruption.band_width must be >= 0");
  const auto& s = synth.standard;
  if (s.scans < 1 || s.lidar.rings < 1 || s.lidar.azimuth_steps < 1 || s.image_width < 2 || s.image_height < 2)
    throw ConfigError("synth.standard sizes must be positive");
  if (s.cars < 0 || s.pedestrians < 0 || s.construction_vehicles < 0 || s.buildings < 0 || s.trees < 0)
    throw ConfigError("synth.standard object counts must be >= 0");
  for (const auto* d : {&gt_dir, &primal_dir, &refined_dir, &eval_dir})
    if (d->empty()) throw ConfigError("label directory names must be non-empty");
}

Config parse_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Config c;
  Section root(doc, "");
  int version = kConfigVersion;
  root.read("version", version);
  if (version != kConfigVersion) throw ConfigError("unsupported config version " + std::to_string(version));

  std::string path = ".";
  root.read("dataset_root", path);
  c.dataset_root = resolve(base_dir, path);
  path = "out";
  root.read("output_dir", path);
  c.output_dir = resolve(base_dir, path);
  {
    Section labels = root.section("labels");
    labels.read("gt", c.gt_dir);
    labels.read("primal", c.primal_dir);
    labels.read("refined", c.refined_dir);
    c.eval_dir = c.refined_dir;
    labels.read("eval", c.eval_dir);
    labels.finish();
  }
  root.read("seed", c.seed);
  root.read("workers", c.workers);
  root.read("scene_window", c.scene_window);

  auto& p = c.pipeline;
  {
    Section s = root.section("projection");
    s.read("z_min", p.min_depth);
    s.finish();
  }
  {
    Section s = root.section("ground");
    s.read("zone_edges", p.ground.zone_edges);
    s.read("sectors", p.ground.sectors);
    s.read("ransac_iterations", p.ground.ransac_iterations);
    s.read("inlier_distance", p.ground.inlier_distance);
    s.read("max_tilt_deg", p.ground.max_tilt_deg);
    s.read("seed_band", p.ground.seed_band);
    s.read("lowest_point_count", p.ground.lowest_point_count);
    s.read("min_seed_points", p.ground.min_seed_points);
    s.finish();
  }
  {
    Section s = root.section("cluster");
    s.read("min_cluster_size", p.cluster.min_cluster_size);
    if (s.has("min_samples")) {
      std::size_t ms = 0;
      s.read("min_samples", ms);
      p.cluster.min_samples = ms;
    } else {
      s.read("min_samples", p.cluster.min_cluster_size);  // marks the key as known
    }
    std::string sel = selection_name(p.cluster.selection);
    s.read("selection", sel);
    if (sel == "eom") p.cluster.selection = ClusterSelection::ExcessOfMass;
    else if (sel == "leaf") p.cluster.selection = ClusterSelection::Leaf;
    else throw ConfigError("cluster.selection must be eom or leaf");
    std::string mst = mst_name(p.cluster.mst);
    s.read("mst", mst);
    if (mst == "auto") p.cluster.mst = MstAlgorithm::Auto;
    else if (mst == "dense") p.cluster.mst = MstAlgorithm::Dense;
    else if (mst == "kdtree") p.cluster.mst = MstAlgorithm::KdTree;
    else throw ConfigError("cluster.mst must be auto, dense or kdtree");
    s.read("noise_k", p.noise_k);
    s.finish();
  }
  {
    Section s = root.section("refine");
    s.read("tau", p.refine.tau);
    s.read("tau_void", p.refine.tau_void);
    s.read("instance_radius", p.instance_fallback_radius);
    s.finish();
  }
  {
    Section s = root.section("ablate");
    s.read("min_cluster_sizes", c.ablate_sizes);
    s.finish();
  }
  {
    Section s = root.section("synth");
    if (s.has("world_spec")) {
      std::string spec;
      s.read("world_spec", spec);
      c.synth.world_spec = resolve(base_dir, spec);
    } else {
      s.read("world_spec", path);
    }
    {
      Section w = s.section("standard");
      auto& o = c.synth.standard;
      w.read("scans", o.scans);
      w.read("scan_spacing", o.scan_spacing);
      w.read("sensor_height", o.sensor_height);
      w.read("rings", o.lidar.rings);
      w.read("azimuth_steps", o.lidar.azimuth_steps);
      w.read("max_range", o.lidar.max_range);
      w.read("image_width", o.image_width);
      w.read("image_height", o.image_height);
      std::string rig = o.rig == RigLayout::Full ? "full" : "gapped";
      w.read("rig", rig);
      if (rig == "full") o.rig = RigLayout::Full;
      else if (rig == "gapped") o.rig = RigLayout::Gapped;
      else throw ConfigError("synth.standard.rig must be full or gapped");
      w.read("ground_noise_sigma", o.ground_noise_sigma);
      w.read("cars", o.cars);
      w.read("pedestrians", o.pedestrians);
      w.read("construction_vehicles", o.construction_vehicles);
      w.read("buildings", o.buildings);
      w.read("trees", o.trees);
      w.finish();
    }
    {
      Section k = s.section("corruption");
      auto& m = c.synth.corruption;
      std::string kind = corruption_name(m.kind);
      k.read("kind", kind);
      if (kind == "uniform_flip") m.kind = CorruptionKind::UniformFlip;
      else if (kind == "boundary_band_flip") m.kind = CorruptionKind::BoundaryBandFlip;
      else if (kind == "void_dropout") m.kind = CorruptionKind::VoidDropout;
      else throw ConfigError("synth.corruption.kind must be uniform_flip, boundary_band_flip or void_dropout");
      k.read("probability", m.probability);
      k.read("band_width", m.band_width);
      k.read("things_only", c.synth.corrupt_things_only);
      k.finish();
    }
    s.read("write_primal", c.synth.write_primal);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

Config read_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

std::string format_config(const Config& cfg) {
  ordered j;
  j["version"] = kConfigVersion;
  j["dataset_root"] = cfg.dataset_root.string();
  j["output_dir"] = cfg.output_dir.string();
  j["labels"] = {{"gt", cfg.gt_dir}, {"primal", cfg.primal_dir}, {"refined", cfg.refined_dir}, {"eval", cfg.eval_dir}};
  j["workers"] = cfg.workers;
  const ordered params = params_json(cfg);
  for (const auto& item : params.items()) j[item.key()] = item.value();
  return j.dump(2) + "\n";
}

std::string config_hash(const Config& cfg) {
  const std::string canonical = params_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace panoref
