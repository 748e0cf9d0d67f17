#include <cmath>
#include <numbers>

#include "sumvln/error.hpp"
#include "sumvln/log.hpp"
#include "sumvln/sum.hpp"

namespace sumvln {

namespace {

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

std::string_view to_string(MemorySelection s) {
  switch (s) {
    case MemorySelection::frontal: return "frontal";
    case MemorySelection::oblique: return "oblique";
    case MemorySelection::hybrid: return "hybrid";
    case MemorySelection::none: return "none";
  }
  return "none";
}

MemorySelection memory_selection_from_string(std::string_view s) {
  for (auto sel : {MemorySelection::frontal, MemorySelection::oblique, MemorySelection::hybrid, MemorySelection::none}) {
    if (to_string(sel) == s) return sel;
  }
  throw Error(ErrorCode::BadArgs, "unknown memory selection '" + std::string(s) + "'");
}

std::string_view to_string(Perspective p) { return p == Perspective::frontal ? "frontal" : "oblique"; }

void MemoryRenderConfig::validate() const {
  if (!(frontal_pitch_deg >= 0.0 && frontal_pitch_deg <= 5.0)) {
    throw Error(ErrorCode::InvalidConfig, "frontal pitch must lie in [0, 5] degrees");
  }
  if (!(oblique_pitch_deg >= 40.0 && oblique_pitch_deg <= 50.0)) {
    throw Error(ErrorCode::InvalidConfig, "oblique pitch must lie in [40, 50] degrees");
  }
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw Error(ErrorCode::InvalidConfig, "hfov must lie in (0, 180)");
}

Intrinsics memory_intrinsics(double hfov_deg) {
  return Intrinsics::from_hfov(kMemoryWidth, kMemoryHeight, deg2rad(hfov_deg));
}

CameraPose oblique_camera_pose(const Eigen::Vector3d& centroid, const MemoryRenderConfig& cfg) {
  const double pitch = deg2rad(cfg.oblique_pitch_deg);
  const Eigen::Vector2d heading(std::cos(cfg.start.heading), std::sin(cfg.start.heading));
  const Eigen::Vector2d to_centroid = centroid.head<2>() - cfg.start.position();
  const double standoff = std::max(to_centroid.dot(heading), cfg.min_oblique_standoff);
  const Eigen::Vector2d xy = centroid.head<2>() - standoff * heading;
  return {{xy.x(), xy.y(), centroid.z() + standoff * std::tan(pitch)}, cfg.start.heading, pitch};
}

SpatialMemory render_memory(const Reconstruction& r, const MemoryRenderConfig& cfg) {
  cfg.validate();
  SpatialMemory m;
  m.intrinsics = memory_intrinsics(cfg.hfov_deg);
  m.frontal_pitch_deg = cfg.frontal_pitch_deg;
  m.oblique_pitch_deg = cfg.oblique_pitch_deg;
  m.created_at = cfg.created_at.value_or(utc_timestamp_now());
  m.reconstruction_digest = sha256_hex(write_glb(r));

  m.frontal_camera = {{cfg.start.x, cfg.start.y, cfg.camera_height}, cfg.start.heading, deg2rad(cfg.frontal_pitch_deg)};

  Eigen::Vector3d centroid(cfg.start.x + cfg.min_oblique_standoff * std::cos(cfg.start.heading),
                           cfg.start.y + cfg.min_oblique_standoff * std::sin(cfg.start.heading), 0.0);
  if (!r.cloud.empty()) {
    centroid.setZero();
    for (const auto& p : r.cloud.points) centroid += p;
    centroid /= double(r.cloud.size());
  }
  m.oblique_camera = oblique_camera_pose(centroid, cfg);

  if (r.cloud.empty()) {
    log_warn("empty reconstruction; memory images are background only");
  }
  m.frontal = render_pointcloud(r.cloud, m.intrinsics, m.frontal_camera, kMemoryBackground);
  m.oblique = render_pointcloud(r.cloud, m.intrinsics, m.oblique_camera, kMemoryBackground);
  return m;
}

}  // namespace sumvln
