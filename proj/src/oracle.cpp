#include "sumvln/oracle.hpp"

#include <cmath>

namespace sumvln {

OracleDecision oracle_decide(const Pose2D& pose, std::span<const Eigen::Vector2d> waypoints, std::size_t cursor,
                             const OracleParams& params, double heading_noise) {
  OracleDecision out;
  out.cursor = cursor;
  if (waypoints.empty()) {
    return out;
  }
  const Eigen::Vector2d here = pose.position();
  while (true) {
    const Eigen::Vector2d delta = waypoints[out.cursor] - here;
    out.distance = delta.norm();
    out.bearing_error = wrap_angle(std::atan2(delta.y(), delta.x()) - pose.heading + heading_noise);
    if (out.distance > params.waypoint_radius) break;
    if (out.cursor + 1 == waypoints.size()) {
      out.action = ActionType::STOP;
      return out;
    }
    ++out.cursor;
  }
  if (std::abs(out.bearing_error) > params.bearing_tolerance) {
    out.action = out.bearing_error > 0.0 ? ActionType::LEFT_ROTATE : ActionType::RIGHT_ROTATE;
  } else {
    out.action = ActionType::FORWARD;
  }
  return out;
}

}  // namespace sumvln
