#include "panoref/projection.hpp"

#include <cmath>
#include <string>

#include "panoref/errors.hpp"

namespace panoref {

std::optional<PixelHit> project_point(const CameraModel& camera, const Point3& p, double min_depth) {
  const Eigen::Vector3d pc = camera.extrinsic().apply(p.to_eigen());
  if (!(pc.z() > min_depth)) return std::nullopt;
  const double u = camera.fx() * pc.x() / pc.z() + camera.cx();
  const double v = camera.fy() * pc.y() / pc.z() + camera.cy();
  if (!(u >= 0.0 && u < camera.width() && v >= 0.0 && v < camera.height())) return std::nullopt;
  return PixelHit{static_cast<int>(std::floor(u)), static_cast<int>(std::floor(v)), pc.z()};
}

namespace {

struct Choice {
  std::size_t camera;
  PixelHit hit;
};

std::optional<Choice> choose(std::span<const CameraModel> cameras, const Point3& p, double min_depth) {
  std::optional<Choice> best;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto hit = project_point(cameras[c], p, min_depth);
    if (hit && (!best || hit->depth < best->hit.depth)) best = Choice{c, *hit};
  }
  return best;
}

}  // namespace

std::optional<std::size_t> select_camera(std::span<const CameraModel> cameras, const Point3& p,
                                         double min_depth) {
  if (const auto c = choose(cameras, p, min_depth)) return c->camera;
  return std::nullopt;
}

PanopticLabels label_points(const PointCloud& cloud, std::span<const CameraModel> cameras,
                            std::span<const LabelImage> images, double min_depth) {
  if (cameras.empty() || cameras.size() != images.size())
    throw ConfigError("label_points needs one label image per camera (" +
                      std::to_string(cameras.size()) + " cameras, " +
                      std::to_string(images.size()) + " images)");
  for (std::size_t c = 0; c < cameras.size(); ++c)
    if (images[c].width != cameras[c].width() || images[c].height != cameras[c].height())
      throw ConfigError("label image " + std::to_string(c) + " does not match its camera size");

  PanopticLabels labels(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto choice = choose(cameras, cloud.points[i], min_depth);
    if (!choice) continue;
    const LabelImage& image = images[choice->camera];
    const std::size_t px = image.index(choice->hit.u, choice->hit.v);
    labels.semantic[i] = image.semantic[px];
    labels.instance[i] = image.instance[px];
  }
  return labels;
}

}  // namespace panoref
