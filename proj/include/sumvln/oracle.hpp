#pragma once

#include <Eigen/Core>
#include <span>

#include "sumvln/simulator.hpp"

namespace sumvln {

struct OracleParams {
  double waypoint_radius = 1.0;       // m
  double bearing_tolerance = 0.2617993877991494;  // rad (15 deg)
};

struct OracleDecision {
  ActionType action = ActionType::STOP;
  std::size_t cursor = 0;        // waypoint index after the decision
  double distance = 0.0;         // to the waypoint at `cursor`
  double bearing_error = 0.0;    // rad, positive means the goal is to the left
};

/// Waypoint-following controller: advance the cursor while the current
/// waypoint is within the radius (STOP once the last one is reached), rotate
/// towards the waypoint when the bearing error exceeds the tolerance, and
/// otherwise drive forward. `heading_noise` is added to the measured bearing
/// error.
OracleDecision oracle_decide(const Pose2D& pose, std::span<const Eigen::Vector2d> waypoints, std::size_t cursor,
                             const OracleParams& params, double heading_noise = 0.0);

}  // namespace sumvln
