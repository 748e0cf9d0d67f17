#include "sumvln/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <variant>

#include "sumvln/codec.hpp"
#include "sumvln/error.hpp"
#include "sumvln/oracle.hpp"
#include "sumvln/rng.hpp"

namespace sumvln {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxViewDistance = 60.0;
constexpr double kCylinderBase = -1.0;  // cylinders are sunk below the terrain

}  // namespace

std::string_view to_string(SceneClass c) {
  switch (c) {
    case SceneClass::farm: return "farm";
    case SceneClass::greenhouse: return "greenhouse";
    case SceneClass::forest: return "forest";
    case SceneClass::mountain: return "mountain";
    case SceneClass::garden: return "garden";
    case SceneClass::village: return "village";
  }
  return "farm";
}

SceneClass scene_class_from_string(std::string_view s) {
  for (SceneClass c : kAllSceneClasses) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::BadArgs, "unknown scene class '" + std::string(s) + "'");
}

std::string_view to_string(ActionType a) {
  switch (a) {
    case ActionType::FORWARD: return "FORWARD";
    case ActionType::LEFT_ROTATE: return "LEFT_ROTATE";
    case ActionType::RIGHT_ROTATE: return "RIGHT_ROTATE";
    case ActionType::STOP: return "STOP";
  }
  return "STOP";
}

std::optional<ActionType> action_from_string(std::string_view s) {
  for (ActionType a : kAllActions) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double Terrain::height_at(double x, double y) const {
  if (flat()) return 0.0;
  const double fx = std::clamp((x - origin_x) / cell, 0.0, double(nx - 1));
  const double fy = std::clamp((y - origin_y) / cell, 0.0, double(ny - 1));
  const int ix = std::min(int(fx), nx - 2);
  const int iy = std::min(int(fy), ny - 2);
  const double tx = fx - ix, ty = fy - iy;
  auto h = [&](int i, int j) { return heights[std::size_t(j) * std::size_t(nx) + std::size_t(i)]; };
  return (1 - ty) * ((1 - tx) * h(ix, iy) + tx * h(ix + 1, iy)) + ty * ((1 - tx) * h(ix, iy + 1) + tx * h(ix + 1, iy + 1));
}

double Terrain::min_height() const {
  return flat() ? 0.0 : *std::min_element(heights.begin(), heights.end());
}

double Terrain::max_height() const {
  return flat() ? 0.0 : *std::max_element(heights.begin(), heights.end());
}

std::string World::scene_id() const { return std::string(to_string(scene_class)) + "-" + std::to_string(seed); }

std::string Episode::scene_id() const {
  const auto pos = id.rfind(':');
  return pos == std::string::npos ? id : id.substr(0, pos);
}

// ---------------------------------------------------------------------------
// Layout

namespace {

struct ObstacleKind {
  const char* name;
  Rgb color;
  double r_lo, r_hi;
  double h_lo, h_hi;
  int count;
};

struct Recipe {
  Rgb ground;
  const char* worker;
  // Crop rows run along x at these y offsets; empty for scattered scenes.
  std::vector<double> row_ys;
  ObstacleKind row_kind;
  double row_spacing;
  std::vector<ObstacleKind> scattered;
};

Recipe recipe_for(SceneClass c) {
  switch (c) {
    case SceneClass::farm:
      return {{120, 95, 60}, "farmer", {-8.0, -4.5, 4.5, 8.0},
              {"cabbage row", {60, 150, 60}, 0.2, 0.25, 0.3, 0.4, 0}, 0.8,
              {{"red barn", {170, 40, 35}, 1.5, 1.8, 3.0, 3.8, 1},
               {"haystack", {215, 190, 90}, 0.5, 0.7, 0.8, 1.2, 3},
               {"scarecrow", {160, 120, 70}, 0.15, 0.2, 1.6, 1.8, 2}}};
    case SceneClass::greenhouse:
      return {{95, 80, 65}, "gardener", {-7.5, -2.5, 2.5, 7.5},
              {"tomato bed", {40, 130, 50}, 0.25, 0.3, 1.0, 1.3, 0}, 0.9,
              {{"support pillar", {225, 225, 225}, 0.12, 0.15, 3.0, 3.0, 8},
               {"water tank", {60, 90, 160}, 0.5, 0.6, 1.2, 1.5, 2}}};
    case SceneClass::forest:
      return {{70, 95, 50}, "forester", {}, {}, 0.0,
              {{"pine tree", {95, 65, 40}, 0.25, 0.45, 5.0, 8.0, 26},
               {"boulder", {120, 120, 115}, 0.4, 0.7, 0.6, 1.0, 5}}};
    case SceneClass::mountain:
      return {{125, 115, 95}, "hiker", {}, {}, 0.0,
              {{"rock", {140, 135, 130}, 0.3, 0.9, 0.4, 1.4, 16},
               {"shrub", {80, 120, 60}, 0.3, 0.5, 0.5, 0.9, 8}}};
    case SceneClass::garden:
      return {{90, 140, 70}, "gardener", {}, {}, 0.0,
              {{"rose bush", {200, 40, 60}, 0.3, 0.35, 0.6, 0.8, 10},
               {"sunflower", {240, 200, 30}, 0.12, 0.18, 1.5, 1.8, 10},
               {"lavender patch", {150, 110, 200}, 0.3, 0.4, 0.4, 0.6, 8},
               {"fountain", {180, 190, 200}, 0.8, 1.0, 1.0, 1.4, 1}}};
    case SceneClass::village:
      return {{150, 140, 120}, "villager", {}, {}, 0.0,
              {{"house", {210, 180, 140}, 1.4, 2.0, 3.0, 4.5, 6},
               {"fence post", {120, 90, 60}, 0.1, 0.12, 1.0, 1.1, 14},
               {"well", {100, 100, 110}, 0.6, 0.7, 0.8, 1.0, 1}}};
  }
  return {};
}

std::uint64_t mix_seed(std::uint64_t seed, SceneClass c, std::string_view salt) {
  std::uint64_t h = fnv1a64(to_string(c));
  h = fnv1a64(salt, h);
  return h ^ (seed * 0x9E3779B97F4A7C15ULL);
}

double clearance(const World& w, const Eigen::Vector2d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Cylinder& c : w.obstacles) {
    best = std::min(best, (p - c.center).norm() - c.radius);
  }
  return best;
}

bool fits(const World& w, const Eigen::Vector2d& p, double r, double gap) {
  for (const Cylinder& c : w.obstacles) {
    if ((p - c.center).norm() < c.radius + r + gap) return false;
  }
  return true;
}

Terrain make_terrain(Rng& rng, const Bounds& b) {
  Terrain t;
  t.origin_x = b.min_x;
  t.origin_y = b.min_y;
  t.cell = 1.0;
  t.nx = int(std::lround(b.max_x - b.min_x)) + 1;
  t.ny = int(std::lround(b.max_y - b.min_y)) + 1;
  struct Wave {
    double kx, ky, phase, amp;
  };
  Wave waves[3];
  for (Wave& wv : waves) {
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    const double k = rng.uniform(0.3, 0.9);
    wv = {k * std::cos(dir), k * std::sin(dir), rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.025, 0.04)};
  }
  t.heights.resize(std::size_t(t.nx) * std::size_t(t.ny));
  for (int j = 0; j < t.ny; ++j) {
    for (int i = 0; i < t.nx; ++i) {
      const double x = t.origin_x + i, y = t.origin_y + j;
      double h = 0.0;
      for (const Wave& wv : waves) h += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
      t.heights[std::size_t(j) * std::size_t(t.nx) + std::size_t(i)] = h;
    }
  }
  return t;
}

}  // namespace

World generate_world_layout(std::uint64_t seed, SceneClass scene_class) {
  Rng rng(mix_seed(seed, scene_class, "layout"));
  const Recipe recipe = recipe_for(scene_class);
  World w;
  w.seed = seed;
  w.scene_class = scene_class;
  w.ground_color = recipe.ground;
  const Bounds& b = w.bounds;

  for (double row_y : recipe.row_ys) {
    // Rows are broken by regular gaps so that the field stays traversable.
    for (double x = b.min_x + 1.0; x <= b.max_x - 1.0; x += recipe.row_spacing) {
      const double phase = std::fmod(x - b.min_x, 5.0);
      if (phase < 2.4) continue;
      const ObstacleKind& k = recipe.row_kind;
      w.obstacles.push_back({k.name, {x, row_y + rng.uniform(-0.05, 0.05)}, rng.uniform(k.r_lo, k.r_hi),
                             rng.uniform(k.h_lo, k.h_hi), k.color});
    }
  }
  for (const ObstacleKind& k : recipe.scattered) {
    for (int i = 0; i < k.count; ++i) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double r = rng.uniform(k.r_lo, k.r_hi);
        const Eigen::Vector2d p(rng.uniform(b.min_x + 1.0 + r, b.max_x - 1.0 - r),
                                rng.uniform(b.min_y + 1.0 + r, b.max_y - 1.0 - r));
        if (!fits(w, p, r, 0.8)) continue;
        w.obstacles.push_back({k.name, p, r, rng.uniform(k.h_lo, k.h_hi), k.color});
        break;
      }
    }
  }
  // The person every episode in this scene navigates to.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Eigen::Vector2d p(rng.uniform(b.min_x + 6.0, b.max_x - 6.0), rng.uniform(b.min_y + 6.0, b.max_y - 6.0));
    if (!fits(w, p, 0.2, 1.5)) continue;
    w.obstacles.push_back({recipe.worker, p, 0.2, 1.7, kWorkerColor});
    break;
  }
  if (scene_class == SceneClass::mountain) {
    w.terrain = make_terrain(rng, b);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Dynamics

namespace {

bool segment_hits_disk(const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& c, double r) {
  const Eigen::Vector2d d = q - p;
  const double len2 = d.squaredNorm();
  double s = len2 > 0.0 ? (c - p).dot(d) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (p + s * d - c).norm() <= r;
}

}  // namespace

RobotState step(const World& world, const RobotState& state, ActionType action, const DynamicsConfig& cfg) {
  if (state.stopped_) {
    throw Error(ErrorCode::SteppedAfterStop, "robot already stopped");
  }
  RobotState next = state;
  next.collided_ = false;
  switch (action) {
    case ActionType::FORWARD: {
      const Eigen::Vector2d from = state.pose_.position();
      const Eigen::Vector2d to =
          from + cfg.forward_step * Eigen::Vector2d(std::cos(state.pose_.heading), std::sin(state.pose_.heading));
      bool blocked = !world.bounds.contains(to);
      for (const Cylinder& c : world.obstacles) {
        if (blocked) break;
        blocked = segment_hits_disk(from, to, c.center, c.radius);
      }
      if (blocked) {
        next.collided_ = true;
      } else {
        next.pose_.x = to.x();
        next.pose_.y = to.y();
      }
      break;
    }
    case ActionType::LEFT_ROTATE:
    case ActionType::RIGHT_ROTATE:
      next.turns_ += action == ActionType::LEFT_ROTATE ? 1 : -1;
      next.pose_.heading = wrap_angle(next.base_heading_ + double(next.turns_) * cfg.rotate_step);
      break;
    case ActionType::STOP:
      next.stopped_ = true;
      break;
  }
  return next;
}

std::vector<Pose2D> replay(const World& world, const Pose2D& start, std::span<const ActionType> actions,
                           const DynamicsConfig& cfg) {
  RobotState s(start);
  std::vector<Pose2D> poses{s.pose()};
  for (ActionType a : actions) {
    s = step(world, s, a, cfg);
    if (s.stopped()) break;
    poses.push_back(s.pose());
  }
  return poses;
}

CameraPose robot_camera_pose(const Pose2D& pose, double camera_height) {
  return {{pose.x, pose.y, camera_height}, pose.heading, 0.0};
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct ColumnHit {
  double t_in;
  double t_out;
  std::size_t index;
};

Rgb shade_ground(Rgb base, double x, double y) {
  const bool odd = (static_cast<long>(std::floor(x)) + static_cast<long>(std::floor(y))) & 1;
  auto adj = [odd](std::uint8_t v) { return static_cast<std::uint8_t>(odd ? std::min(255, v + 10) : std::max(0, v - 10)); };
  return {adj(base.r), adj(base.g), adj(base.b)};
}

}  // namespace

Frame render_frame(const World& world, const Pose2D& pose, const Intrinsics& k, double camera_height, int step_index) {
  k.validate();
  Frame f;
  f.step_index = step_index;
  f.intrinsics = k;
  f.pose = robot_camera_pose(pose, camera_height);
  f.image = Image(k.width, k.height, kSkyColor);
  f.depth.assign(f.image.pixels.size(), 0.0);

  const double cyaw = std::cos(pose.heading), syaw = std::sin(pose.heading);
  const Eigen::Vector2d origin(pose.x, pose.y);
  const double h = camera_height;
  const bool flat = world.terrain.flat();
  const double t_max_h = world.terrain.max_height();

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<ColumnHit> hits;
  std::vector<double> ground_t(std::size_t(k.height));
  std::vector<double> prof_t, prof_h;
  for (int u = 0; u < k.width; ++u) {
    // With zero pitch the horizontal part of the ray depends on the column only.
    const double a = (u - k.center_x) / k.focal_x;
    const Eigen::Vector2d dxy(cyaw + a * syaw, syaw - a * cyaw);
    hits.clear();
    const double qa = dxy.squaredNorm();
    for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
      const Cylinder& c = world.obstacles[i];
      const Eigen::Vector2d oc = origin - c.center;
      const double qb = 2.0 * dxy.dot(oc);
      const double qc = oc.squaredNorm() - c.radius * c.radius;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      const double t0 = (-qb - sq) / (2.0 * qa);
      const double t1 = (-qb + sq) / (2.0 * qa);
      if (t0 <= 0.0) continue;
      hits.push_back({t0, t1, i});
    }

    // Ground hit per row. Over a height field the first hit along a steeper
    // ray is never farther, so rows are scanned bottom-up with a forward-only
    // cursor into the terrain profile of this column.
    if (flat) {
      for (int v = 0; v < k.height; ++v) {
        const double b = (v - k.center_y) / k.focal_y;
        ground_t[std::size_t(v)] = b > 0.0 ? h / b : kInf;
      }
    } else {
      prof_t.clear();
      prof_h.clear();
      for (double t = 0.05; t < kMaxViewDistance; t += 0.02 + 0.015 * t) {
        prof_t.push_back(t);
        prof_h.push_back(world.terrain.height_at(pose.x + t * dxy.x(), pose.y + t * dxy.y()));
      }
      std::size_t cursor = 0;
      for (int v = k.height - 1; v >= 0; --v) {
        const double b = (v - k.center_y) / k.focal_y;
        ground_t[std::size_t(v)] = kInf;
        if (b <= 0.0 || h - t_max_h > b * kMaxViewDistance) continue;
        while (cursor + 1 < prof_t.size() && h - b * prof_t[cursor + 1] > prof_h[cursor + 1]) ++cursor;
        if (cursor + 1 >= prof_t.size()) continue;
        auto above = [&](double t) {
          return h - b * t - world.terrain.height_at(pose.x + t * dxy.x(), pose.y + t * dxy.y());
        };
        double lo = prof_t[cursor], hi = prof_t[cursor + 1];
        if (above(lo) <= 0.0) {
          ground_t[std::size_t(v)] = lo;
          continue;
        }
        for (int it = 0; it < 12; ++it) {
          const double m = 0.5 * (lo + hi);
          (above(m) > 0.0 ? lo : hi) = m;
        }
        ground_t[std::size_t(v)] = hi;
      }
    }

    for (int v = 0; v < k.height; ++v) {
      const double b = (v - k.center_y) / k.focal_y;  // world dz per unit depth is -b
      double best_t = kInf;
      Rgb best_color = kSkyColor;
      if (const double tg = ground_t[std::size_t(v)]; tg < kMaxViewDistance) {
        best_t = tg;
        best_color = shade_ground(world.ground_color, pose.x + tg * dxy.x(), pose.y + tg * dxy.y());
      }

      for (const ColumnHit& hit : hits) {
        if (hit.t_in >= best_t) continue;
        const Cylinder& c = world.obstacles[hit.index];
        const double z_in = h - b * hit.t_in;
        if (z_in >= kCylinderBase && z_in <= c.height) {
          best_t = hit.t_in;
          best_color = c.color;
        } else if (z_in > c.height && b > 0.0) {
          const double t_top = (h - c.height) / b;
          if (t_top >= hit.t_in && t_top <= hit.t_out && t_top < best_t) {
            best_t = t_top;
            best_color = c.color;
          }
        }
      }

      if (best_t < kMaxViewDistance) {
        const std::size_t idx = std::size_t(v) * std::size_t(k.width) + std::size_t(u);
        f.image.pixels[idx] = best_color;
        f.depth[idx] = best_t;
      }
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Episodes

namespace {

// Nearest landmark to p, preferring a kind other than `avoid` when one lies
// within a few meters so consecutive clauses do not repeat themselves.
std::string nearest_landmark(const World& w, const Eigen::Vector2d& p, const Cylinder& worker,
                             const std::string& avoid) {
  const Cylinder* best = nullptr;
  const Cylinder* best_other = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  double best_other_d = best_d;
  for (const Cylinder& c : w.obstacles) {
    if (&c == &worker) continue;
    const double d = (p - c.center).norm();
    if (d < best_d) {
      best_d = d;
      best = &c;
    }
    if (c.kind != avoid && d < best_other_d) {
      best_other_d = d;
      best_other = &c;
    }
  }
  if (best_other && best_other_d < 4.0) return best_other->kind;
  return best ? best->kind : "open ground";
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string compose_instruction(Rng& rng, const World& w, const Cylinder& worker,
                                const std::vector<Eigen::Vector2d>& waypoints) {
  static constexpr const char* kVerbs[] = {"walk toward the", "head to the", "go along the path to the",
                                           "move over to the"};
  static constexpr const char* kFinal[] = {"approach the {} and stop", "go to the {} who is working there",
                                           "find the {} and stop next to them"};
  std::vector<std::string> clauses;
  std::string prev;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    prev = nearest_landmark(w, waypoints[i], worker, prev);
    clauses.push_back(std::string(kVerbs[rng.below(std::size(kVerbs))]) + " " + prev);
  }
  std::string fin = kFinal[rng.below(std::size(kFinal))];
  fin.replace(fin.find("{}"), 2, worker.kind);
  clauses.push_back(fin);

  std::string out = capitalize(clauses[0]);
  for (std::size_t i = 1; i < clauses.size(); ++i) {
    switch (rng.below(3)) {
      case 0: out += ", then " + clauses[i]; break;
      case 1: out += " and then " + clauses[i]; break;
      default: out += ". " + capitalize(clauses[i]); break;
    }
  }
  return out + ".";
}

}  // namespace

namespace {

constexpr int kWorkerRelocations = 8;

// Episodes towards the world's worker, or the index of the first episode that
// could not be produced.
std::variant<std::vector<Episode>, int> make_episodes(const World& w, Rng& rng, const GenerationConfig& cfg) {
  std::vector<Episode> episodes;
  const Cylinder& worker = w.obstacles.back();
  const Eigen::Vector2d target = worker.center;
  const Bounds& b = w.bounds;
  const SceneClass scene_class = w.scene_class;
  const OracleParams oracle{cfg.waypoint_radius};

  for (int e = 0; e < cfg.episodes; ++e) {
    const int subtasks = 2 + e % 4;
    bool done = false;
    for (int attempt = 0; attempt < cfg.max_retries && !done; ++attempt) {
      // Start on an annulus around the target.
      const double radius = rng.uniform(cfg.min_start_distance, 1.7 * cfg.min_start_distance);
      const double bearing = rng.uniform(-kPi, kPi);
      const Eigen::Vector2d start = target + radius * Eigen::Vector2d(std::cos(bearing), std::sin(bearing));
      if (start.x() < b.min_x + 1.0 || start.x() > b.max_x - 1.0 || start.y() < b.min_y + 1.0 ||
          start.y() > b.max_y - 1.0) {
        continue;
      }
      const double dist = (start - target).norm();
      if (clearance(w, start) < 0.8) continue;

      // Intermediate waypoints zig-zag around the straight route.
      const Eigen::Vector2d along = (target - start) / dist;
      const Eigen::Vector2d lateral(-along.y(), along.x());
      std::vector<Eigen::Vector2d> wps;
      bool ok = true;
      for (int i = 1; i < subtasks && ok; ++i) {
        const double side = (i % 2 ? 1.0 : -1.0) * rng.uniform(0.8, 2.0);
        const Eigen::Vector2d p = start + (dist * i / subtasks) * along + side * lateral;
        ok = b.contains(p) && clearance(w, p) >= 0.8;
        wps.push_back(p);
      }
      if (!ok) continue;
      wps.push_back(target);
      Eigen::Vector2d prev = start;
      for (const auto& p : wps) {
        ok = ok && (p - prev).norm() >= 1.8;
        prev = p;
      }
      if (!ok) continue;

      Pose2D start_pose{start.x(), start.y(), wrap_angle(rng.uniform(-kPi, kPi))};
      RobotState s(start_pose);
      std::vector<ActionType> labels;
      std::size_t cursor = 0;
      while (int(labels.size()) < cfg.max_label_steps) {
        const OracleDecision d = oracle_decide(s.pose(), wps, cursor, oracle);
        cursor = d.cursor;
        labels.push_back(d.action);
        s = step(w, s, d.action, cfg.dynamics);
        if (s.collided()) break;
        if (s.stopped()) break;
      }
      if (!s.stopped() || s.collided()) continue;
      if ((s.pose().position() - target).norm() > cfg.success_radius) continue;

      Episode ep;
      char idx[16];
      std::snprintf(idx, sizeof idx, "%03d", e);
      ep.id = w.scene_id() + ":" + idx;
      ep.scene_class = scene_class;
      ep.start = start_pose;
      ep.target = target;
      ep.label_actions = std::move(labels);
      ep.subtask_waypoints = wps;
      ep.instruction = compose_instruction(rng, w, worker, wps);
      episodes.push_back(std::move(ep));
      done = true;
    }
    if (!done) return e;
  }
  return episodes;
}

}  // namespace

GeneratedScene generate_world(std::uint64_t seed, SceneClass scene_class, const GenerationConfig& cfg) {
  GeneratedScene scene;
  scene.world = generate_world_layout(seed, scene_class);
  World& w = scene.world;
  Rng rng(mix_seed(seed, scene_class, "episodes"));
  int failed = 0;
  for (int relocation = 0; relocation <= kWorkerRelocations; ++relocation) {
    if (relocation > 0) {
      // Move the worker somewhere else and start over.
      Rng place(mix_seed(seed, scene_class, "worker-" + std::to_string(relocation)));
      Cylinder worker = w.obstacles.back();
      w.obstacles.pop_back();
      for (int attempt = 0; attempt < 10000; ++attempt) {
        const Eigen::Vector2d p(place.uniform(w.bounds.min_x + 6.0, w.bounds.max_x - 6.0),
                                place.uniform(w.bounds.min_y + 6.0, w.bounds.max_y - 6.0));
        if (!fits(w, p, worker.radius, 1.5)) continue;
        worker.center = p;
        break;
      }
      w.obstacles.push_back(worker);
      rng = Rng(mix_seed(seed, scene_class, "episodes-" + std::to_string(relocation)));
    }
    auto made = make_episodes(w, rng, cfg);
    if (auto* eps = std::get_if<std::vector<Episode>>(&made)) {
      scene.episodes = std::move(*eps);
      return scene;
    }
    failed = std::get<int>(made);
  }
  throw Error(ErrorCode::UnreachableTarget,
              "could not generate episode " + std::to_string(failed) + " for " + w.scene_id());
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json rgb_json(Rgb c) { return nlohmann::json::array({c.r, c.g, c.b}); }
Rgb rgb_from(const nlohmann::json& j) {
  return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

}  // namespace

nlohmann::json episode_to_json(const Episode& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["scene_class"] = to_string(e.scene_class);
  j["instruction"] = e.instruction;
  j["start"] = {e.start.x, e.start.y, e.start.heading};
  j["target"] = {e.target.x(), e.target.y()};
  auto& labels = j["label_actions"] = nlohmann::json::array();
  for (ActionType a : e.label_actions) labels.push_back(to_string(a));
  auto& wps = j["subtask_waypoints"] = nlohmann::json::array();
  for (const auto& p : e.subtask_waypoints) wps.push_back({p.x(), p.y()});
  return j;
}

Episode episode_from_json(const nlohmann::json& j) {
  try {
    Episode e;
    e.id = j.at("id").get<std::string>();
    e.scene_class = scene_class_from_string(j.at("scene_class").get<std::string>());
    e.instruction = j.at("instruction").get<std::string>();
    const auto& s = j.at("start");
    e.start = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    e.target = {j.at("target").at(0).get<double>(), j.at("target").at(1).get<double>()};
    for (const auto& a : j.at("label_actions")) {
      auto parsed = action_from_string(a.get<std::string>());
      if (!parsed) throw Error(ErrorCode::ParseFailure, "unknown action " + a.dump());
      e.label_actions.push_back(*parsed);
    }
    for (const auto& p : j.at("subtask_waypoints")) {
      e.subtask_waypoints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    if (e.subtask_waypoints.empty()) throw Error(ErrorCode::ParseFailure, "episode without waypoints");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseFailure, std::string("episode json: ") + ex.what());
  }
}

nlohmann::json world_to_json(const World& w) {
  nlohmann::json j;
  j["seed"] = w.seed;
  j["scene_class"] = to_string(w.scene_class);
  j["bounds"] = {w.bounds.min_x, w.bounds.min_y, w.bounds.max_x, w.bounds.max_y};
  j["ground_color"] = rgb_json(w.ground_color);
  auto& obs = j["obstacles"] = nlohmann::json::array();
  for (const Cylinder& c : w.obstacles) {
    obs.push_back({{"kind", c.kind},
                   {"center", {c.center.x(), c.center.y()}},
                   {"radius", c.radius},
                   {"height", c.height},
                   {"color", rgb_json(c.color)}});
  }
  return j;
}

World world_from_json(const nlohmann::json& j) {
  try {
    World w;
    w.seed = j.at("seed").get<std::uint64_t>();
    w.scene_class = scene_class_from_string(j.at("scene_class").get<std::string>());
    const auto& b = j.at("bounds");
    w.bounds = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
    w.ground_color = rgb_from(j.at("ground_color"));
    for (const auto& o : j.at("obstacles")) {
      Cylinder c;
      c.kind = o.at("kind").get<std::string>();
      c.center = {o.at("center").at(0).get<double>(), o.at("center").at(1).get<double>()};
      c.radius = o.at("radius").get<double>();
      c.height = o.at("height").get<double>();
      c.color = rgb_from(o.at("color"));
      if (!(c.radius > 0.0)) throw Error(ErrorCode::InvalidWorld, "obstacle radius must be positive");
      if (!w.bounds.contains(c.center)) throw Error(ErrorCode::InvalidWorld, "obstacle outside bounds");
      w.obstacles.push_back(std::move(c));
    }
    w.terrain = generate_world_layout(w.seed, w.scene_class).terrain;
    return w;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseFailure, std::string("world json: ") + ex.what());
  }
}

std::string episodes_to_jsonl(std::span<const Episode> episodes) {
  std::string out;
  for (const Episode& e : episodes) {
    out += episode_to_json(e).dump();
    out += '\n';
  }
  return out;
}

std::vector<Episode> episodes_from_jsonl(std::string_view text) {
  std::vector<Episode> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(episode_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ParseFailure, std::string("episode line: ") + ex.what());
    }
  }
  return out;
}

}  // namespace sumvln
