#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sumvln/geometry.hpp"

namespace sumvln {

enum class SceneClass { farm, greenhouse, forest, mountain, garden, village };

inline constexpr std::array<SceneClass, 6> kAllSceneClasses = {
    SceneClass::farm, SceneClass::greenhouse, SceneClass::forest,
    SceneClass::mountain, SceneClass::garden, SceneClass::village};

std::string_view to_string(SceneClass c);
/// Throws BadArgs naming the offending token.
SceneClass scene_class_from_string(std::string_view s);

enum class ActionType { FORWARD, LEFT_ROTATE, RIGHT_ROTATE, STOP };

inline constexpr std::array<ActionType, 4> kAllActions = {
    ActionType::FORWARD, ActionType::LEFT_ROTATE, ActionType::RIGHT_ROTATE, ActionType::STOP};

std::string_view to_string(ActionType a);
/// Exact, case-sensitive match against the canonical names.
std::optional<ActionType> action_from_string(std::string_view s);

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, (-pi, pi]

  Eigen::Vector2d position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Cylinder {
  std::string kind;  // human-readable landmark noun, e.g. "apple tree"
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.1;
  double height = 1.0;
  Rgb color;
};

struct Bounds {
  double min_x = -12.0;
  double min_y = -12.0;
  double max_x = 12.0;
  double max_y = 12.0;

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
};

/// Height table sampled on a regular grid, bilinearly interpolated. An empty
/// table is flat ground at z = 0.
struct Terrain {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> heights;  // ny rows of nx samples

  bool flat() const { return heights.empty(); }
  double height_at(double x, double y) const;
  double min_height() const;
  double max_height() const;
};

struct World {
  std::uint64_t seed = 0;
  SceneClass scene_class = SceneClass::farm;
  std::vector<Cylinder> obstacles;
  Rgb ground_color{110, 90, 60};
  Bounds bounds;
  Terrain terrain;

  /// "<class>-<seed>", the scene identifier used by memory keys and files.
  std::string scene_id() const;
};

/// Color reserved for the person standing at every episode's destination.
inline constexpr Rgb kWorkerColor{230, 30, 200};
inline constexpr Rgb kSkyColor{150, 200, 240};

struct DynamicsConfig {
  double forward_step = 0.5;           // m
  double rotate_step = 0.5235987755982988;  // rad (30 deg)
  double camera_height = 0.38;         // m
};

class RobotState {
 public:
  RobotState() = default;
  explicit RobotState(const Pose2D& start) : pose_(start), base_heading_(wrap_angle(start.heading)) {
    pose_.heading = base_heading_;
  }

  const Pose2D& pose() const { return pose_; }
  bool collided() const { return collided_; }
  bool stopped() const { return stopped_; }

 private:
  friend RobotState step(const World&, const RobotState&, ActionType, const DynamicsConfig&);

  Pose2D pose_;
  // Heading is base + turns * rotate_step so that opposite rotations cancel
  // exactly.
  double base_heading_ = 0.0;
  long turns_ = 0;
  bool collided_ = false;
  bool stopped_ = false;
};

struct Episode {
  std::string id;  // "<scene_id>:<index>"
  SceneClass scene_class = SceneClass::farm;
  std::string instruction;
  Pose2D start;
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
  std::vector<ActionType> label_actions;
  std::vector<Eigen::Vector2d> subtask_waypoints;

  int subtask_count() const { return static_cast<int>(subtask_waypoints.size()); }
  /// Prefix of the id before the last ':' (the whole id when there is none).
  std::string scene_id() const;
};

struct GenerationConfig {
  int episodes = 10;
  DynamicsConfig dynamics;
  double waypoint_radius = 1.0;   // oracle controller radius used for labels
  double success_radius = 3.0;
  double min_start_distance = 4.5;  // start-to-target distance floor
  int max_label_steps = 45;
  int max_retries = 2000;
};

struct GeneratedScene {
  World world;
  std::vector<Episode> episodes;
};

/// Deterministic in (seed, scene_class, cfg). When an episode cannot be
/// produced within cfg.max_retries the worker is moved and generation starts
/// over; UnreachableTarget is thrown once a few relocations have failed.
GeneratedScene generate_world(std::uint64_t seed, SceneClass scene_class, const GenerationConfig& cfg = {});

/// Obstacle layout and terrain only; generate_world may later move the worker.
World generate_world_layout(std::uint64_t seed, SceneClass scene_class);

/// Throws SteppedAfterStop if state.stopped().
RobotState step(const World& world, const RobotState& state, ActionType action, const DynamicsConfig& cfg);

/// Camera pose of the robot's front-facing camera (pitch 0).
CameraPose robot_camera_pose(const Pose2D& pose, double camera_height);

Frame render_frame(const World& world, const Pose2D& pose, const Intrinsics& k, double camera_height = 0.38,
                   int step_index = 0);

/// Pose sequence visited by replaying actions from the start (start included).
/// Replay stops after STOP.
std::vector<Pose2D> replay(const World& world, const Pose2D& start, std::span<const ActionType> actions,
                           const DynamicsConfig& cfg);

// JSON formats: one episode per line; world files carry seed, class and the
// obstacle list, terrain is regenerated from (seed, class).
nlohmann::json episode_to_json(const Episode& e);
Episode episode_from_json(const nlohmann::json& j);
nlohmann::json world_to_json(const World& w);
World world_from_json(const nlohmann::json& j);

std::string episodes_to_jsonl(std::span<const Episode> episodes);
std::vector<Episode> episodes_from_jsonl(std::string_view text);

}  // namespace sumvln
