#include "sumvln/geometry.hpp"

#include <cmath>
#include <limits>

#include "sumvln/error.hpp"

namespace sumvln {

namespace {

bool valid_depth(double d) { return std::isfinite(d) && d > 0.0; }

}  // namespace

void Intrinsics::validate() const {
  if (!(focal_x > 0.0) || !(focal_y > 0.0)) {
    throw Error(ErrorCode::InvalidIntrinsics, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidIntrinsics, "image size must be positive");
  }
  if (!(center_x >= 0.0 && center_x < width) || !(center_y >= 0.0 && center_y < height)) {
    throw Error(ErrorCode::InvalidIntrinsics, "principal point outside the image");
  }
}

Intrinsics Intrinsics::from_hfov(int width, int height, double hfov_rad) {
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.focal_x = (width / 2.0) / std::tan(hfov_rad / 2.0);
  k.focal_y = k.focal_x;
  k.center_x = width / 2.0;
  k.center_y = height / 2.0;
  k.validate();
  return k;
}

Eigen::Matrix3d CameraPose::world_from_camera() const {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const Eigen::Vector3d forward(cp * cy, cp * sy, -sp);
  const Eigen::Vector3d right(sy, -cy, 0.0);
  const Eigen::Vector3d down(-sp * cy, -sp * sy, -cp);  // forward x right
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return r;
}

Eigen::Vector3d backproject_to_camera(double u, double v, double depth, const Intrinsics& k) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "depth must be > 0");
  }
  return {(u - k.center_x) * depth / k.focal_x, (v - k.center_y) * depth / k.focal_y, depth};
}

Eigen::Vector3d backproject_pixel(double u, double v, double depth, const Intrinsics& k,
                                  const CameraPose& pose) {
  if (!(u >= 0.0 && u < k.width && v >= 0.0 && v < k.height)) {
    throw Error(ErrorCode::PixelOutOfBounds, "pixel outside the image");
  }
  return pose.position + pose.world_from_camera() * backproject_to_camera(u, v, depth, k);
}

Projection project_point(const Eigen::Vector3d& p, const Intrinsics& k, const CameraPose& pose) {
  const Eigen::Vector3d cam = pose.world_from_camera().transpose() * (p - pose.position);
  if (!(cam.z() > 0.0)) {
    throw Error(ErrorCode::BehindCamera, "point is not in front of the camera");
  }
  return {k.focal_x * cam.x() / cam.z() + k.center_x, k.focal_y * cam.y() / cam.z() + k.center_y, cam.z()};
}

std::size_t count_valid_samples(const Frame& frame, int pixel_stride) {
  std::size_t n = 0;
  const int w = frame.image.width;
  for (int y = 0; y < frame.image.height; y += pixel_stride) {
    for (int x = 0; x < w; x += pixel_stride) {
      if (valid_depth(frame.depth[std::size_t(y) * std::size_t(w) + std::size_t(x)])) ++n;
    }
  }
  return n;
}

PointCloud fuse_frames(std::span<const Frame> frames, int pixel_stride) {
  if (pixel_stride < 1) {
    throw Error(ErrorCode::InvalidConfig, "pixel_stride must be >= 1");
  }
  PointCloud cloud;
  for (const Frame& f : frames) {
    if (f.depth.empty() || f.depth.size() != f.image.pixels.size()) {
      throw Error(ErrorCode::MissingDepth, "frame " + std::to_string(f.step_index) + " has no depth map");
    }
    if (!f.pose) {
      throw Error(ErrorCode::MissingPose, "frame " + std::to_string(f.step_index) + " has no pose");
    }
  }
  for (const Frame& f : frames) {
    const Eigen::Matrix3d rot = f.pose->world_from_camera();
    const int w = f.image.width;
    for (int y = 0; y < f.image.height; y += pixel_stride) {
      for (int x = 0; x < w; x += pixel_stride) {
        const std::size_t idx = std::size_t(y) * std::size_t(w) + std::size_t(x);
        const double d = f.depth[idx];
        if (!valid_depth(d)) continue;
        const Eigen::Vector3d cam = backproject_to_camera(x, y, d, f.intrinsics);
        cloud.push_back(f.pose->position + rot * cam, f.image.pixels[idx]);
      }
    }
  }
  return cloud;
}

Image render_pointcloud(const PointCloud& cloud, const Intrinsics& k, const CameraPose& pose,
                        Rgb background) {
  k.validate();
  Image img(k.width, k.height, background);
  std::vector<double> zbuf(img.pixels.size(), std::numeric_limits<double>::infinity());
  const Eigen::Matrix3d cam_from_world = pose.world_from_camera().transpose();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Eigen::Vector3d cam = cam_from_world * (cloud.points[i] - pose.position);
    if (!(cam.z() > 0.0)) continue;
    const double u = k.focal_x * cam.x() / cam.z() + k.center_x;
    const double v = k.focal_y * cam.y() / cam.z() + k.center_y;
    const double px = std::floor(u + 0.5);
    const double py = std::floor(v + 0.5);
    if (!(px >= 0.0 && px < k.width && py >= 0.0 && py < k.height)) continue;
    const std::size_t idx = std::size_t(py) * std::size_t(k.width) + std::size_t(px);
    if (cam.z() < zbuf[idx]) {
      zbuf[idx] = cam.z();
      img.pixels[idx] = cloud.colors[i];
    }
  }
  return img;
}

}  // namespace sumvln
