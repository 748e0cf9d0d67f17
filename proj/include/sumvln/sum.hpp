#pragma once

// Spatial understanding memory: frame sampling, reconstruction, GLB
// interchange and the frontal/oblique memory renders.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sumvln/codec.hpp"
#include "sumvln/geometry.hpp"
#include "sumvln/simulator.hpp"

namespace sumvln {

// ---------------------------------------------------------------------------
// Sampling

/// Indices round(i * (n - 1) / (q - 1)), i = 0..q-1, with halves rounded up;
/// all of 0..n-1 when n <= q. Throws EmptyInput (n == 0) or QTooSmall (q < 2).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t q);

std::vector<Frame> sample_frames(std::span<const Frame> frames, std::size_t q);

// ---------------------------------------------------------------------------
// Reconstruction

enum class ReconstructionBackend { posed_depth, external };

std::string_view to_string(ReconstructionBackend b);
ReconstructionBackend reconstruction_backend_from_string(std::string_view s);

struct ReconstructorConfig {
  ReconstructionBackend backend = ReconstructionBackend::posed_depth;
  int pixel_stride = 4;
  std::optional<std::string> external_endpoint;
  nlohmann::json hyper_params = nlohmann::json::object();  // forwarded verbatim to the service

  /// Throws InvalidConfig when the endpoint presence does not match the backend.
  void validate() const;
};

struct Reconstruction {
  PointCloud cloud;
  std::vector<CameraPose> frame_poses;
  Intrinsics intrinsics;
  std::vector<int> source_frame_ids;
  bool empty = false;  // set when the scene produced no points
};

Reconstruction reconstruct(std::span<const Frame> sampled, const ReconstructorConfig& cfg);

/// Body of a POST /reconstruct request for the given frames.
nlohmann::json reconstruction_request(std::span<const Frame> frames, const nlohmann::json& params);

// ---------------------------------------------------------------------------
// GLB (binary glTF 2.0) with a single point primitive.
//
// The world is Z-up while glTF is Y-up; positions are written as (x, z, -y)
// and converted back on read, which is exact in float32.

inline constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
inline constexpr std::uint32_t kGlbJsonChunk = 0x4E4F534A;
inline constexpr std::uint32_t kGlbBinChunk = 0x004E4942;

Bytes write_glb(const Reconstruction& r);
Reconstruction read_glb(std::span<const std::uint8_t> data);

// ---------------------------------------------------------------------------
// Memory rendering

enum class MemorySelection { frontal, oblique, hybrid, none };

std::string_view to_string(MemorySelection s);
MemorySelection memory_selection_from_string(std::string_view s);

enum class Perspective { frontal, oblique };
std::string_view to_string(Perspective p);

inline constexpr int kMemoryWidth = 640;
inline constexpr int kMemoryHeight = 360;
inline constexpr Rgb kMemoryBackground{0, 0, 0};

struct MemoryRenderConfig {
  double frontal_pitch_deg = 0.0;   // allowed [0, 5]
  double oblique_pitch_deg = 45.0;  // allowed [40, 50]
  Pose2D start;                     // episode start pose; fixes position and yaw
  double camera_height = 0.38;
  double hfov_deg = 90.0;
  double min_oblique_standoff = 2.0;  // m, horizontal
  std::optional<std::string> created_at;  // defaults to the current time

  void validate() const;
};

struct SpatialMemory {
  Image frontal;
  Image oblique;
  double frontal_pitch_deg = 0.0;
  double oblique_pitch_deg = 45.0;
  CameraPose frontal_camera;
  CameraPose oblique_camera;
  Intrinsics intrinsics;
  std::string reconstruction_digest;  // hex SHA-256 of the GLB bytes
  std::string scene_key;
  std::string created_at;
};

/// Intrinsics shared by both memory renders (640x360).
Intrinsics memory_intrinsics(double hfov_deg = 90.0);

/// Oblique viewpoint: yaw of the start pose, pitched down, placed behind the
/// cloud centroid so the optical axis passes through it.
CameraPose oblique_camera_pose(const Eigen::Vector3d& centroid, const MemoryRenderConfig& cfg);

SpatialMemory render_memory(const Reconstruction& r, const MemoryRenderConfig& cfg);

}  // namespace sumvln
