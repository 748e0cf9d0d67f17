#pragma once

#include <nlohmann/json.hpp>

#include "sumvln/geometry.hpp"
#include "sumvln/simulator.hpp"

namespace sumvln::detail {

inline nlohmann::json camera_json(const CameraPose& p) {
  return {{"position", {p.position.x(), p.position.y(), p.position.z()}}, {"yaw", p.yaw}, {"pitch", p.pitch}};
}

inline CameraPose camera_from(const nlohmann::json& j) {
  const auto& pos = j.at("position");
  return {{pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>()}, j.at("yaw").get<double>(),
          j.at("pitch").get<double>()};
}

inline nlohmann::json intrinsics_json(const Intrinsics& k) {
  return {{"focal_x", k.focal_x},   {"focal_y", k.focal_y}, {"center_x", k.center_x},
          {"center_y", k.center_y}, {"width", k.width},     {"height", k.height}};
}

inline Intrinsics intrinsics_from(const nlohmann::json& j) {
  return {j.at("focal_x").get<double>(), j.at("focal_y").get<double>(), j.at("center_x").get<double>(),
          j.at("center_y").get<double>(), j.at("width").get<int>(),     j.at("height").get<int>()};
}

inline nlohmann::json pose2d_json(const Pose2D& p) { return nlohmann::json::array({p.x, p.y, p.heading}); }

inline Pose2D pose2d_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace sumvln::detail
