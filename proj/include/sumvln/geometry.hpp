#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sumvln {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Pinhole intrinsics. Pixel (i, j) has its center at u = i, v = j.
struct Intrinsics {
  double focal_x = 320.0;
  double focal_y = 320.0;
  double center_x = 320.0;
  double center_y = 180.0;
  int width = 640;
  int height = 360;

  /// Throws InvalidIntrinsics when any invariant fails.
  void validate() const;

  /// Square-pixel camera with the principal point at (width/2, height/2) and
  /// the given horizontal field of view.
  static Intrinsics from_hfov(int width, int height, double hfov_rad);

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Camera pose in a Z-up world.
///
/// Camera frame: +Z forward, +X right, +Y down. At yaw = 0 and pitch = 0 the
/// camera looks along world +X. Positive yaw turns left (counter-clockwise
/// seen from above), positive pitch tilts the view downwards.
struct CameraPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double pitch = 0.0;

  /// Columns are the camera X, Y, Z axes expressed in world coordinates.
  Eigen::Matrix3d world_from_camera() const;

  friend bool operator==(const CameraPose& a, const CameraPose& b) {
    return a.position == b.position && a.yaw == b.yaw && a.pitch == b.pitch;
  }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Rgb> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void reserve(std::size_t n) {
    points.reserve(n);
    colors.reserve(n);
  }
  void push_back(const Eigen::Vector3d& p, Rgb c) {
    points.push_back(p);
    colors.push_back(c);
  }
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major

  Image() = default;
  Image(int w, int h, Rgb fill = {}) : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill) {}

  Rgb& at(int x, int y) { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  const Rgb& at(int x, int y) const { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// One posed RGB-D observation. A depth value of 0 (or any non-finite or
/// negative value) means "no depth" for that pixel.
struct Frame {
  int step_index = 0;
  Image image;
  std::vector<double> depth;  // row-major, same size as image when present
  std::optional<CameraPose> pose;
  Intrinsics intrinsics;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// World point at depth along the ray of pixel (u, v). Throws NonPositiveDepth
/// or PixelOutOfBounds (requires 0 <= u < width, 0 <= v < height).
Eigen::Vector3d backproject_pixel(double u, double v, double depth, const Intrinsics& k,
                                  const CameraPose& pose);

/// Camera-frame point for a pixel ray at the given depth. Any (u, v) is
/// accepted; only the depth is checked.
Eigen::Vector3d backproject_to_camera(double u, double v, double depth, const Intrinsics& k);

Projection project_point(const Eigen::Vector3d& p, const Intrinsics& k, const CameraPose& pose);

PointCloud fuse_frames(std::span<const Frame> frames, int pixel_stride);

/// Number of points fuse_frames would emit for one frame.
std::size_t count_valid_samples(const Frame& frame, int pixel_stride);

/// 1-pixel z-buffered splatting. The nearest camera-frame depth wins a pixel;
/// on an exact depth tie the point with the lower index wins. Points behind
/// the camera or outside the image are skipped.
Image render_pointcloud(const PointCloud& cloud, const Intrinsics& k, const CameraPose& pose,
                        Rgb background);

}  // namespace sumvln
