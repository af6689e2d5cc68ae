#include "panoref/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include <Eigen/Geometry>
#include <json.hpp>

#include "panoref/errors.hpp"
#include "panoref/kdtree.hpp"
#include "panoref/parallel.hpp"
#include "panoref/random.hpp"

namespace panoref {

namespace {

constexpr double kEps = 1e-9;
constexpr double kDeg = std::numbers::pi / 180.0;

ClassTable make_table(const std::vector<ClassInfo>& classes) {
  try {
    return ClassTable(classes);
  } catch (const InvariantViolation& e) {
    throw ConfigError(std::string("world spec classes: ") + e.what());
  }
}

double footprint_radius(const ObjectSpec& o) {
  return o.shape == ShapeKind::Box ? 0.5 * std::hypot(o.length, o.width) : o.radius;
}

// Origin and direction expressed in the object's yawed frame, with the
// footprint center at the origin.
void to_local(const ObjectSpec& o, const Eigen::Vector3d& p, const Eigen::Vector3d& d,
              Eigen::Vector3d& lp, Eigen::Vector3d& ld) {
  const double c = std::cos(o.yaw), s = std::sin(o.yaw);
  const double px = p.x() - o.x, py = p.y() - o.y;
  lp = {c * px + s * py, -s * px + c * py, p.z()};
  ld = {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

std::optional<double> hit_box(const ObjectSpec& o, const Eigen::Vector3d& p, const Eigen::Vector3d& d) {
  Eigen::Vector3d lp, ld;
  to_local(o, p, d, lp, ld);
  const double lo[3] = {-0.5 * o.length, -0.5 * o.width, o.base_z};
  const double hi[3] = {0.5 * o.length, 0.5 * o.width, o.base_z + o.height};
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(ld[a]) < 1e-15) {
      if (lp[a] < lo[a] || lp[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (lo[a] - lp[a]) / ld[a];
    double t1 = (hi[a] - lp[a]) / ld[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= kEps) return std::nullopt;  // miss, or origin inside
  return t_near;
}

std::optional<double> hit_cylinder(const ObjectSpec& o, const Eigen::Vector3d& p, const Eigen::Vector3d& d) {
  const double px = p.x() - o.x, py = p.y() - o.y;
  const double z0 = o.base_z, z1 = o.base_z + o.height;
  std::optional<double> best;
  auto consider = [&](double t) {
    if (t > kEps && (!best || t < *best)) best = t;
  };
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-15) {
    const double b = 2.0 * (px * d.x() + py * d.y());
    const double c = px * px + py * py - o.radius * o.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double t = (-b - std::sqrt(disc)) / (2.0 * a);
      const double z = p.z() + t * d.z();
      if (z >= z0 && z <= z1) consider(t);
    }
  }
  if (std::abs(d.z()) > 1e-15) {
    for (double zc : {z0, z1}) {
      const double t = (zc - p.z()) / d.z();
      const double x = px + t * d.x(), y = py + t * d.y();
      if (x * x + y * y <= o.radius * o.radius) consider(t);
    }
  }
  // Origin inside the solid: no hit.
  if (px * px + py * py < o.radius * o.radius && p.z() > z0 && p.z() < z1) return std::nullopt;
  return best;
}

bool sphere_reject(const ObjectSpec& o, const Eigen::Vector3d& p, const Eigen::Vector3d& d, double max_t) {
  const Eigen::Vector3d center(o.x, o.y, o.base_z + 0.5 * o.height);
  const double r = std::hypot(footprint_radius(o), 0.5 * o.height) + 1e-6;
  const Eigen::Vector3d oc = center - p;
  const double t = oc.dot(d);
  if (t < -r || t - r > max_t) return true;
  return (oc - t * d).squaredNorm() > r * r;
}

void validate_spec(const WorldSpec& spec, const ClassTable& table) {
  if (spec.trajectory.empty()) throw ConfigError("world spec has no trajectory");
  if (spec.lidar.rings < 1 || spec.lidar.azimuth_steps < 1)
    throw ConfigError("world spec needs at least one ring and one azimuth step");
  if (!(spec.lidar.max_range > spec.lidar.min_range) || spec.lidar.min_range < 0.0)
    throw ConfigError("world spec lidar range is empty");
  if (spec.lidar.rings > 255) throw ConfigError("at most 255 lidar rings");
  if (spec.ground_class == kVoid || !table.contains(spec.ground_class) || table.is_thing(spec.ground_class))
    throw ConfigError("ground class must be a stuff class of the table");
  if (!(spec.ground_extent > 0.0)) throw ConfigError("ground extent must be positive");
  if (!(spec.ground_noise_sigma >= 0.0)) throw ConfigError("ground noise must be non-negative");
  if (spec.ground_waves < 1) throw ConfigError("ground_waves must be >= 1");

  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    const std::string tag = "object " + std::to_string(i);
    if (o.semantic == kVoid || !table.contains(o.semantic)) throw ConfigError(tag + ": unknown class");
    if (table.is_thing(o.semantic)) {
      if (o.instance == kNoInstance || o.instance.value > kMaxInstanceId)
        throw ConfigError(tag + ": thing objects need an instance id in [1, 999]");
    } else if (o.instance != kNoInstance) {
      throw ConfigError(tag + ": stuff objects carry instance 0");
    }
    if (!(o.height > 0.0)) throw ConfigError(tag + ": height must be positive");
    if (o.shape == ShapeKind::Box && !(o.length > 0.0 && o.width > 0.0))
      throw ConfigError(tag + ": box extent must be positive");
    if (o.shape == ShapeKind::Cylinder && !(o.radius > 0.0))
      throw ConfigError(tag + ": radius must be positive");
  }
  // Objects may not share space: bounding circles of vertically overlapping
  // objects must be disjoint up to 1 cm.
  for (std::size_t i = 0; i < spec.objects.size(); ++i)
    for (std::size_t j = i + 1; j < spec.objects.size(); ++j) {
      const auto& a = spec.objects[i];
      const auto& b = spec.objects[j];
      const bool z_overlap = a.base_z < b.base_z + b.height && b.base_z < a.base_z + a.height;
      const double gap = std::hypot(a.x - b.x, a.y - b.y) - footprint_radius(a) - footprint_radius(b);
      if (z_overlap && gap < -0.01)
        throw ConfigError("objects " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
    }
  for (const auto& pose : spec.trajectory)
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const auto& o = spec.objects[i];
      Eigen::Vector3d lp, ld;
      to_local(o, pose.translation(), Eigen::Vector3d::UnitZ(), lp, ld);
      const bool inside = o.shape == ShapeKind::Box
                              ? std::abs(lp.x()) <= 0.5 * o.length && std::abs(lp.y()) <= 0.5 * o.width
                              : lp.head<2>().norm() <= o.radius;
      if (inside && lp.z() >= o.base_z && lp.z() <= o.base_z + o.height)
        throw ConfigError("sensor pose inside object " + std::to_string(i));
    }
}

}  // namespace

World::World(WorldSpec spec, std::uint64_t seed) : spec_(std::move(spec)), table_(make_table(spec_.classes)) {
  validate_spec(spec_, table_);
  if (spec_.ground_noise_sigma > 0.0) {
    RandomStream rng(seed, 0x6772);
    const int k = spec_.ground_waves;
    amplitude_ = spec_.ground_noise_sigma * std::sqrt(2.0 / k);
    for (int i = 0; i < k; ++i) {
      const double wavelength = 3.0 + 9.0 * rng.uniform();
      const double heading = 2.0 * std::numbers::pi * rng.uniform();
      const double wavenumber = 2.0 * std::numbers::pi / wavelength;
      waves_.push_back({wavenumber * std::cos(heading), wavenumber * std::sin(heading),
                        2.0 * std::numbers::pi * rng.uniform()});
      slope_bound_ += amplitude_ * wavenumber;
    }
  }
}

double World::ground_height(double x, double y) const {
  double h = 0.0;
  for (const auto& w : waves_) h += amplitude_ * std::sin(w.kx * x + w.ky * y + w.phase);
  return h;
}

std::optional<double> World::hit_ground(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double max_t) const {
  const double bound = amplitude_ * static_cast<double>(waves_.size());
  auto inside = [&](double t) {
    const Eigen::Vector3d p = o + t * d;
    return std::abs(p.x()) <= spec_.ground_extent && std::abs(p.y()) <= spec_.ground_extent;
  };
  if (waves_.empty()) {
    if (d.z() >= 0.0 || o.z() <= 0.0) return std::nullopt;
    const double t = -o.z() / d.z();
    if (t > max_t || !inside(t)) return std::nullopt;
    return t;
  }
  if (d.z() >= 0.0 && o.z() > bound) return std::nullopt;
  auto gap = [&](double t) {
    const Eigen::Vector3d p = o + t * d;
    return p.z() - ground_height(p.x(), p.y());
  };
  if (gap(0.0) <= 0.0) return std::nullopt;
  double t = (o.z() > bound && d.z() < 0.0) ? (o.z() - bound) / -d.z() : 0.0;
  const double t_end = d.z() < 0.0 ? std::min(max_t, (o.z() + bound) / -d.z()) : max_t;
  const double rate = std::max(-d.z(), 0.0) + slope_bound_ * std::hypot(d.x(), d.y());
  if (rate <= 0.0) return std::nullopt;
  for (int it = 0; it < 4000 && t <= t_end; ++it) {
    const double g = gap(t);
    if (g < 1e-7) {
      if (t > max_t || !inside(t)) return std::nullopt;
      return t;
    }
    t += g / rate;
  }
  return std::nullopt;
}

std::optional<SurfaceHit> World::raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                         double max_t) const {
  std::optional<SurfaceHit> best;
  for (std::size_t i = 0; i < spec_.objects.size(); ++i) {
    const auto& o = spec_.objects[i];
    const double limit = best ? best->t : max_t;
    if (sphere_reject(o, origin, dir, limit)) continue;
    const auto t = o.shape == ShapeKind::Box ? hit_box(o, origin, dir) : hit_cylinder(o, origin, dir);
    if (t && *t <= limit) {
      const InstanceId inst = table_.is_thing(o.semantic) ? o.instance : kNoInstance;
      best = SurfaceHit{*t, o.semantic, inst, static_cast<std::int32_t>(i)};
    }
  }
  if (const auto t = hit_ground(origin, dir, best ? best->t : max_t))
    if (!best || *t < best->t) best = SurfaceHit{*t, spec_.ground_class, kNoInstance, kGroundSurface};
  return best;
}

double World::surface_distance(const Eigen::Vector3d& p, std::int32_t surface) const {
  if (surface == kGroundSurface) return std::abs(p.z() - ground_height(p.x(), p.y()));
  const auto& o = spec_.objects.at(static_cast<std::size_t>(surface));
  Eigen::Vector3d lp, ld;
  to_local(o, p, Eigen::Vector3d::UnitZ(), lp, ld);
  const double zc = o.base_z + 0.5 * o.height;
  if (o.shape == ShapeKind::Box) {
    const Eigen::Vector3d q(std::abs(lp.x()) - 0.5 * o.length, std::abs(lp.y()) - 0.5 * o.width,
                            std::abs(lp.z() - zc) - 0.5 * o.height);
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return std::abs(outside + inside);
  }
  const double dr = lp.head<2>().norm() - o.radius;
  const double dz = std::abs(lp.z() - zc) - 0.5 * o.height;
  const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
  return std::abs(outside + std::min(std::max(dr, dz), 0.0));
}

SyntheticDataset generate_world(const WorldSpec& spec, std::uint64_t seed, std::size_t workers) {
  const World world(spec, seed);
  const auto& lidar = spec.lidar;
  const std::size_t scans = spec.trajectory.size();

  SyntheticDataset out{world.classes(), {}, spec.trajectory, spec.cameras, {}, {}, {}};
  out.scans.resize(scans);
  out.gt_labels.resize(scans);
  out.surfaces.resize(scans);
  out.label_images.assign(scans, std::vector<LabelImage>(spec.cameras.size()));

  // Ray directions in the sensor frame, ring-major.
  std::vector<Eigen::Vector3d> rays;
  std::vector<std::uint8_t> ray_ring;
  for (int r = 0; r < lidar.rings; ++r) {
    const double frac = lidar.rings == 1 ? 0.5 : static_cast<double>(r) / (lidar.rings - 1);
    const double el = (lidar.fov_down_deg + frac * (lidar.fov_up_deg - lidar.fov_down_deg)) * kDeg;
    for (int a = 0; a < lidar.azimuth_steps; ++a) {
      const double az = 2.0 * std::numbers::pi * a / lidar.azimuth_steps - std::numbers::pi;
      rays.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      ray_ring.push_back(static_cast<std::uint8_t>(r));
    }
  }

  const std::size_t cams = spec.cameras.size();
  parallel_for(scans * (1 + cams), workers, [&](std::size_t job) {
    const std::size_t s = job / (1 + cams);
    const std::size_t slot = job % (1 + cams);
    const RigidTransform& pose = spec.trajectory[s];
    if (slot == 0) {
      const RandomStream rng(seed, 0x1000 + s);
      PointCloud cloud;
      char id[32];
      std::snprintf(id, sizeof(id), "scan_%04zu", s);
      cloud.scan_id = id;
      cloud.timestamp_us = static_cast<std::int64_t>(s) * 500000;
      PanopticLabels gt;
      std::vector<std::int32_t> surface;
      for (std::size_t k = 0; k < rays.size(); ++k) {
        const Eigen::Vector3d dir = pose.rotation() * rays[k];
        const auto hit = world.raycast(pose.translation(), dir, lidar.max_range);
        if (!hit || hit->t < lidar.min_range) continue;
        cloud.points.push_back(Point3::from_eigen(hit->t * rays[k]));
        cloud.intensity.push_back(static_cast<float>(rng.uniform_at(k)));
        cloud.ring.push_back(ray_ring[k]);
        gt.push_back(hit->semantic, hit->instance);
        surface.push_back(hit->surface);
      }
      if (cloud.points.empty()) throw ConfigError("scan " + std::to_string(s) + " hit nothing");
      out.scans[s] = std::move(cloud);
      out.gt_labels[s] = std::move(gt);
      out.surfaces[s] = std::move(surface);
      return;
    }
    const CameraModel& cam = spec.cameras[slot - 1];
    const RigidTransform cam_to_world = compose(pose, inverse(cam.extrinsic()));
    LabelImage image(cam.width(), cam.height());
    const double max_t = 1.5 * lidar.max_range;
    for (int v = 0; v < cam.height(); ++v)
      for (int u = 0; u < cam.width(); ++u) {
        const Eigen::Vector3d ray_cam((u + 0.5 - cam.cx()) / cam.fx(), (v + 0.5 - cam.cy()) / cam.fy(), 1.0);
        const Eigen::Vector3d dir = (cam_to_world.rotation() * ray_cam).normalized();
        if (const auto hit = world.raycast(cam_to_world.translation(), dir, max_t)) {
          image.semantic[image.index(u, v)] = hit->semantic;
          image.instance[image.index(u, v)] = hit->instance;
        }
      }
    out.label_images[s][slot - 1] = std::move(image);
  });
  return out;
}

// ------------------------------------------------------------------ JSON spec

namespace {

using nlohmann::json;

SemanticId class_by_name(const ClassTable& table, const std::string& name) {
  const auto id = table.find(name);
  if (!id) throw ConfigError("world spec: unknown class '" + name + "'");
  return *id;
}

RigidTransform pose_from_json(const json& j) {
  if (j.is_array()) {
    if (j.size() != 12) throw ConfigError("world spec: pose arrays need 12 values");
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    for (int row = 0; row < 3; ++row) {
      for (int c = 0; c < 3; ++c) r(row, c) = j[row * 4 + c].get<double>();
      t(row) = j[row * 4 + 3].get<double>();
    }
    auto pose = RigidTransform::orthonormalized(r, t, 1e-3);
    if (!pose) throw ConfigError("world spec: pose rotation is not orthonormal");
    return *pose;
  }
  return RigidTransform::from_yaw_translation(
      j.value("yaw", 0.0), {j.at("x").get<double>(), j.at("y").get<double>(), j.value("z", 0.0)});
}

nlohmann::ordered_json rows_json(const RigidTransform& t) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (double v : t.to_rows()) a.push_back(v);
  return a;
}

}  // namespace

WorldSpec parse_world_spec(std::string_view text) {
  try {
    const json doc = json::parse(text);
    WorldSpec spec;
    if (doc.contains("standard")) {
      const json& s = doc.at("standard");
      StandardWorldOptions opt;
      opt.scans = s.value("scans", opt.scans);
      opt.scan_spacing = s.value("scan_spacing", opt.scan_spacing);
      opt.lidar.rings = s.value("rings", opt.lidar.rings);
      opt.lidar.azimuth_steps = s.value("azimuth_steps", opt.lidar.azimuth_steps);
      opt.image_width = s.value("image_width", opt.image_width);
      opt.image_height = s.value("image_height", opt.image_height);
      opt.ground_noise_sigma = s.value("ground_noise_sigma", opt.ground_noise_sigma);
      const std::string rig = s.value("rig", std::string("full"));
      if (rig != "full" && rig != "gapped") throw ConfigError("world spec: rig must be full or gapped");
      opt.rig = rig == "full" ? RigLayout::Full : RigLayout::Gapped;
      return standard_world(s.value("seed", std::uint64_t{0}), opt);
    }

    for (const auto& c : doc.at("classes"))
      spec.classes.push_back({c.at("name").get<std::string>(), c.at("thing").get<bool>(), c.value("rare", false)});
    const ClassTable table = make_table(spec.classes);

    const json& ground = doc.at("ground");
    spec.ground_class = class_by_name(table, ground.at("class").get<std::string>());
    spec.ground_extent = ground.value("extent", spec.ground_extent);
    spec.ground_noise_sigma = ground.value("noise_sigma", 0.0);
    spec.ground_waves = ground.value("waves", spec.ground_waves);

    for (const auto& o : doc.value("objects", json::array())) {
      ObjectSpec obj;
      const std::string shape = o.at("shape").get<std::string>();
      if (shape != "box" && shape != "cylinder") throw ConfigError("world spec: unknown shape " + shape);
      obj.shape = shape == "box" ? ShapeKind::Box : ShapeKind::Cylinder;
      obj.semantic = class_by_name(table, o.at("class").get<std::string>());
      obj.instance = InstanceId{o.value<std::uint16_t>("instance", 0)};
      obj.x = o.at("x").get<double>();
      obj.y = o.at("y").get<double>();
      obj.base_z = o.value("base_z", 0.0);
      obj.height = o.at("height").get<double>();
      if (obj.shape == ShapeKind::Box) {
        obj.length = o.at("length").get<double>();
        obj.width = o.at("width").get<double>();
      } else {
        obj.radius = o.at("radius").get<double>();
      }
      obj.yaw = o.value("yaw", 0.0);
      spec.objects.push_back(obj);
    }
    for (const auto& p : doc.at("trajectory")) spec.trajectory.push_back(pose_from_json(p));
    if (doc.contains("lidar")) {
      const json& l = doc.at("lidar");
      spec.lidar.rings = l.value("rings", spec.lidar.rings);
      spec.lidar.azimuth_steps = l.value("azimuth_steps", spec.lidar.azimuth_steps);
      spec.lidar.fov_up_deg = l.value("fov_up_deg", spec.lidar.fov_up_deg);
      spec.lidar.fov_down_deg = l.value("fov_down_deg", spec.lidar.fov_down_deg);
      spec.lidar.min_range = l.value("min_range", spec.lidar.min_range);
      spec.lidar.max_range = l.value("max_range", spec.lidar.max_range);
    }
    for (const auto& c : doc.value("cameras", json::array())) {
      try {
        spec.cameras.emplace_back(c.at("fx").get<double>(), c.at("fy").get<double>(), c.at("cx").get<double>(),
                                  c.at("cy").get<double>(), c.at("width").get<int>(), c.at("height").get<int>(),
                                  pose_from_json(c.at("extrinsic")));
      } catch (const InvariantViolation& e) {
        throw ConfigError(std::string("world spec camera: ") + e.what());
      }
    }
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("world spec: ") + e.what());
  }
}

std::string format_world_spec(const WorldSpec& spec) {
  nlohmann::ordered_json doc;
  doc["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : spec.classes) doc["classes"].push_back({{"name", c.name}, {"thing", c.thing}, {"rare", c.rare}});
  const ClassTable table = make_table(spec.classes);
  doc["ground"] = {{"class", table.name(spec.ground_class)},
                   {"extent", spec.ground_extent},
                   {"noise_sigma", spec.ground_noise_sigma},
                   {"waves", spec.ground_waves}};
  doc["objects"] = nlohmann::ordered_json::array();
  for (const auto& o : spec.objects) {
    nlohmann::ordered_json j{{"shape", o.shape == ShapeKind::Box ? "box" : "cylinder"},
                             {"class", table.name(o.semantic)},
                             {"instance", o.instance.value},
                             {"x", o.x},
                             {"y", o.y},
                             {"base_z", o.base_z},
                             {"height", o.height},
                             {"yaw", o.yaw}};
    if (o.shape == ShapeKind::Box) {
      j["length"] = o.length;
      j["width"] = o.width;
    } else {
      j["radius"] = o.radius;
    }
    doc["objects"].push_back(j);
  }
  doc["trajectory"] = nlohmann::ordered_json::array();
  for (const auto& p : spec.trajectory) doc["trajectory"].push_back(rows_json(p));
  doc["lidar"] = {{"rings", spec.lidar.rings},
                  {"azimuth_steps", spec.lidar.azimuth_steps},
                  {"fov_up_deg", spec.lidar.fov_up_deg},
                  {"fov_down_deg", spec.lidar.fov_down_deg},
                  {"min_range", spec.lidar.min_range},
                  {"max_range", spec.lidar.max_range}};
  doc["cameras"] = nlohmann::ordered_json::array();
  for (const auto& c : spec.cameras)
    doc["cameras"].push_back({{"width", c.width()},
                              {"height", c.height()},
                              {"fx", c.fx()},
                              {"fy", c.fy()},
                              {"cx", c.cx()},
                              {"cy", c.cy()},
                              {"extrinsic", rows_json(c.extrinsic())}});
  return doc.dump(2) + "\n";
}

// -------------------------------------------------------------- standard suite

std::vector<ClassInfo> standard_classes() {
  return {{"driveable_surface", false, false}, {"manmade", false, false},
          {"vegetation", false, false},        {"car", true, false},
          {"pedestrian", true, false},         {"construction_vehicle", true, true}};
}

std::vector<CameraModel> standard_rig(RigLayout layout, int width, int height) {
  const int count = layout == RigLayout::Full ? 6 : 4;
  const double hfov = (layout == RigLayout::Full ? 75.0 : 60.0) * kDeg;
  const double f = 0.5 * width / std::tan(0.5 * hfov);
  std::vector<CameraModel> rig;
  for (int k = 0; k < count; ++k) {
    const double yaw = 2.0 * std::numbers::pi * k / count;
    const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
    const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
    const Eigen::Vector3d down(0.0, 0.0, -1.0);
    Eigen::Matrix3d r;
    r.row(0) = right;
    r.row(1) = down;
    r.row(2) = forward;
    const Eigen::Vector3d center = 0.3 * forward + Eigen::Vector3d(0.0, 0.0, -0.2);
    rig.emplace_back(f, f, 0.5 * width, 0.5 * height, width, height, RigidTransform(r, -(r * center)));
  }
  return rig;
}

WorldSpec standard_world(std::uint64_t seed, const StandardWorldOptions& opt) {
  WorldSpec spec;
  spec.classes = standard_classes();
  const ClassTable table(spec.classes);
  spec.ground_class = *table.find("driveable_surface");
  spec.ground_extent = 90.0;
  spec.ground_noise_sigma = opt.ground_noise_sigma;
  spec.lidar = opt.lidar;
  spec.cameras = standard_rig(opt.rig, opt.image_width, opt.image_height);
  for (int s = 0; s < opt.scans; ++s)
    spec.trajectory.push_back(RigidTransform::translation(s * opt.scan_spacing, 0.0, opt.sensor_height));

  RandomStream rng(seed, 0x5EED);
  const double travel = (opt.scans - 1) * opt.scan_spacing;
  std::uint16_t next_instance = 1;
  auto place = [&](ObjectSpec obj, double y_min, double y_max, double gap) {
    for (int attempt = 0; attempt < 500; ++attempt) {
      obj.x = -35.0 + (70.0 + travel) * rng.uniform();
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      obj.y = side * (y_min + (y_max - y_min) * rng.uniform());
      if (std::abs(obj.y) - footprint_radius(obj) < 3.0) continue;  // keep the driving corridor free
      bool clear = true;
      for (const auto& other : spec.objects)
        if (std::hypot(obj.x - other.x, obj.y - other.y) < footprint_radius(obj) + footprint_radius(other) + gap) {
          clear = false;
          break;
        }
      if (!clear) continue;
      if (table.is_thing(obj.semantic)) obj.instance = InstanceId{next_instance++};
      spec.objects.push_back(obj);
      return;
    }
  };

  const SemanticId manmade = *table.find("manmade"), vegetation = *table.find("vegetation");
  const SemanticId car = *table.find("car"), pedestrian = *table.find("pedestrian");
  const SemanticId construction = *table.find("construction_vehicle");
  for (int i = 0; i < opt.buildings; ++i) {
    ObjectSpec o{ShapeKind::Box, manmade, kNoInstance};
    o.length = 8.0 + 6.0 * rng.uniform();
    o.width = 6.0 + 4.0 * rng.uniform();
    o.height = 5.0 + 4.0 * rng.uniform();
    o.yaw = std::numbers::pi * rng.uniform();
    place(o, 24.0, 40.0, 3.0);
  }
  for (int i = 0; i < opt.construction_vehicles; ++i) {
    ObjectSpec o{ShapeKind::Box, construction, kNoInstance};
    o.length = 7.0;
    o.width = 3.0;
    o.height = 3.0;
    o.base_z = 0.4;
    o.yaw = std::numbers::pi * rng.uniform();
    place(o, 6.0, 22.0, 2.0);
  }
  for (int i = 0; i < opt.cars; ++i) {
    ObjectSpec o{ShapeKind::Box, car, kNoInstance};
    o.length = 4.5;
    o.width = 1.9;
    o.height = 1.5;
    o.base_z = 0.3;
    o.yaw = std::numbers::pi * rng.uniform();
    place(o, 4.0, 22.0, 2.0);
  }
  for (int i = 0; i < opt.pedestrians; ++i) {
    ObjectSpec o{ShapeKind::Cylinder, pedestrian, kNoInstance};
    o.radius = 0.35;
    o.height = 1.5;
    o.base_z = 0.3;
    place(o, 4.0, 15.0, 2.0);
  }
  for (int i = 0; i < opt.trees; ++i) {
    ObjectSpec o{ShapeKind::Cylinder, vegetation, kNoInstance};
    o.radius = 0.4 + 0.3 * rng.uniform();
    o.height = 3.0 + 3.0 * rng.uniform();
    place(o, 6.0, 30.0, 2.0);
  }
  return spec;
}

// ------------------------------------------------------------------ corruption

CorruptionResult corrupt_labels(const PanopticLabels& labels, const CorruptionModel& model, std::uint64_t seed,
                                const ClassTable& table, std::span<const Point3> points,
                                std::span<const std::uint8_t> eligible) {
  const std::size_t n = labels.size();
  if (!eligible.empty() && eligible.size() != n) throw LengthMismatch("eligibility mask length");
  if (!(model.probability >= 0.0 && model.probability <= 1.0))
    throw ConfigError("corruption probability must be in [0, 1]");
  const RandomStream rng(seed, 0xC0);
  CorruptionResult out{labels, {}};

  auto relabel = [&](std::size_t i, SemanticId s, InstanceId inst) {
    out.labels.semantic[i] = s;
    out.labels.instance[i] = table.is_thing(s) ? inst : kNoInstance;
    out.corrupted.push_back(static_cast<std::uint32_t>(i));
  };
  auto candidate = [&](std::size_t i) {
    return labels.semantic[i] != kVoid && (eligible.empty() || eligible[i]);
  };

  switch (model.kind) {
    case CorruptionKind::UniformFlip: {
      const std::size_t classes = table.size();
      if (classes < 2) return out;
      for (std::size_t i = 0; i < n; ++i) {
        if (!candidate(i) || !(rng.uniform_at(2 * i) < model.probability)) continue;
        auto pick = static_cast<std::uint16_t>(1 + rng.at(2 * i + 1) % (classes - 1));
        if (pick >= labels.semantic[i].value) ++pick;
        const SemanticId next{pick};
        const InstanceId inst = table.is_thing(labels.semantic[i]) ? labels.instance[i] : kNoInstance;
        relabel(i, next, inst);
      }
      break;
    }
    case CorruptionKind::VoidDropout:
      for (std::size_t i = 0; i < n; ++i)
        if (candidate(i) && rng.uniform_at(2 * i) < model.probability) relabel(i, kVoid, kNoInstance);
      break;
    case CorruptionKind::BoundaryBandFlip: {
      if (points.size() != n) throw ConfigError("boundary-band corruption needs the labeled points");
      if (n == 0) break;
      const KdTree tree(points);
      for (std::size_t i = 0; i < n; ++i) {
        if (!candidate(i) || !(rng.uniform_at(2 * i) < model.probability)) continue;
        for (const auto& nb : tree.radius_search(points[i], model.band_width)) {
          const SemanticId s = labels.semantic[nb.index];
          if (s == kVoid || s == labels.semantic[i]) continue;
          relabel(i, s, labels.instance[nb.index]);
          break;
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace panoref
