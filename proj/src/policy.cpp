#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

#include "sumvln/agent.hpp"
#include "sumvln/codec.hpp"
#include "sumvln/error.hpp"
#include "sumvln/log.hpp"
#include "sumvln/rng.hpp"

namespace sumvln {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t episode_seed(const PolicyContext& ctx, std::uint64_t salt) {
  const std::uint64_t id_hash = ctx.episode ? fnv1a64(ctx.episode->id) : 0;
  return splitmix64(ctx.seed ^ splitmix64(id_hash ^ salt));
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string memory_summary(std::span<const MemoryView> memory) {
  if (memory.empty()) return "no spatial memory";
  std::string out = "memory views:";
  for (const auto& v : memory) out += " " + std::string(to_string(v.perspective));
  return out;
}

class ScriptedOraclePolicy final : public Policy {
 public:
  explicit ScriptedOraclePolicy(const PolicyContext& ctx)
      : episode_(*ctx.episode), params_(ctx.oracle), impairment_(ctx.impairment), rng_(episode_seed(ctx, 0x0a11)) {
    // Drawn first so the misplacement does not depend on how many noise
    // samples were consumed before it is needed.
    const double angle = rng_.uniform(-std::numbers::pi, std::numbers::pi);
    misplaced_ = episode_.target + impairment_.misplacement * Eigen::Vector2d(std::cos(angle), std::sin(angle));
  }

  PolicyKind kind() const override { return PolicyKind::scripted_oracle; }

  std::string decide(const ModelRequest&, const StepObservation& obs) override {
    std::vector<Eigen::Vector2d> waypoints = episode_.subtask_waypoints;
    std::string belief = "target sighted";
    if (impairment_.active() && !waypoints.empty()) {
      if ((obs.pose.position() - episode_.target).norm() <= impairment_.sensing_range) sighted_ = true;
      if (!sighted_) {
        if (impairment_.use_memory_hint && !hint_checked_) {
          hint_ = memory_target_hint(obs.memory);
          hint_checked_ = true;
        }
        waypoints.back() = hint_ ? *hint_ : misplaced_;
        belief = hint_ ? "target placed from memory" : "target guessed";
      }
    }
    const double noise =
        impairment_.bearing_noise_deg > 0.0
            ? rng_.uniform(-impairment_.bearing_noise_deg, impairment_.bearing_noise_deg) * kDeg
            : 0.0;
    const OracleDecision d = oracle_decide(obs.pose, waypoints, cursor_, params_, noise);
    cursor_ = d.cursor;

    const std::string recall = memory_summary(obs.memory) + "; " + belief;
    const std::string observe = "waypoint " + std::to_string(d.cursor + 1) + "/" + std::to_string(waypoints.size()) +
                                " at " + fmt2(d.distance) + " m, bearing " + fmt2(d.bearing_error / kDeg) + " deg";
    std::string decide;
    switch (d.action) {
      case ActionType::STOP: decide = "final waypoint reached"; break;
      case ActionType::FORWARD: decide = "heading is within tolerance, drive on"; break;
      case ActionType::LEFT_ROTATE: decide = "waypoint lies to the left"; break;
      case ActionType::RIGHT_ROTATE: decide = "waypoint lies to the right"; break;
    }
    return compose_output(d.action, recall, observe, decide);
  }

 private:
  const Episode& episode_;
  OracleParams params_;
  Impairment impairment_;
  Rng rng_;
  std::size_t cursor_ = 0;
  Eigen::Vector2d misplaced_;
  bool sighted_ = false;
  bool hint_checked_ = false;
  std::optional<Eigen::Vector2d> hint_;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(const PolicyContext& ctx) : rng_(episode_seed(ctx, 0x5eed)) {}
  PolicyKind kind() const override { return PolicyKind::random; }

  std::string decide(const ModelRequest&, const StepObservation& obs) override {
    const ActionType a = kAllActions[rng_.below(kAllActions.size())];
    return compose_output(a, memory_summary(obs.memory), "ignored", "uniform draw");
  }

 private:
  Rng rng_;
};

class FixedPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::fixed; }
  std::string decide(const ModelRequest&, const StepObservation& obs) override {
    return compose_output(ActionType::FORWARD, memory_summary(obs.memory), "ignored", "always forward");
  }
};

class RemotePolicy final : public Policy {
 public:
  explicit RemotePolicy(const PolicyContext& ctx)
      : endpoint_(*ctx.endpoint), limiter_(ctx.rate_limiter), timeout_(ctx.timeout) {}
  PolicyKind kind() const override { return PolicyKind::remote; }

  std::string decide(const ModelRequest& request, const StepObservation&) override {
    const std::string body = request.serialize();
    std::optional<HttpResult> res;
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (limiter_) limiter_->acquire();
      res = http_post(endpoint_, "/decide", body, "application/json", timeout_);
      if (res && res->status == 200) break;
      log_warn("policy endpoint " + endpoint_.url_for("/decide") +
               (res ? " returned HTTP " + std::to_string(res->status) : std::string(" is unreachable")));
      res.reset();
    }
    if (!res) throw Error(ErrorCode::EndpointUnreachable, "no answer from " + endpoint_.url_for("/decide"));
    std::string text;
    try {
      const auto j = nlohmann::json::parse(res->body);
      if (j.is_object() && j.contains("text") && j["text"].is_string()) text = j["text"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    if (text.empty()) throw Error(ErrorCode::ModelRefusal, "policy endpoint returned no text");
    return text;
  }

 private:
  HttpEndpoint endpoint_;
  std::shared_ptr<RateLimiter> limiter_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

RateLimiter::RateLimiter(double calls_per_second) {
  if (calls_per_second > 0.0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / calls_per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_ == std::chrono::steady_clock::duration::zero()) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyContext& ctx) {
  switch (kind) {
    case PolicyKind::scripted_oracle:
      if (!ctx.episode) throw Error(ErrorCode::InvalidConfig, "scripted_oracle needs the episode");
      return std::make_unique<ScriptedOraclePolicy>(ctx);
    case PolicyKind::random: return std::make_unique<RandomPolicy>(ctx);
    case PolicyKind::fixed: return std::make_unique<FixedPolicy>();
    case PolicyKind::remote:
      if (!ctx.endpoint) throw Error(ErrorCode::InvalidConfig, "remote policy needs an endpoint");
      return std::make_unique<RemotePolicy>(ctx);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown policy kind");
}

std::optional<Eigen::Vector2d> memory_target_hint(std::span<const MemoryView> views) {
  std::vector<const MemoryView*> ordered;
  for (const auto& v : views) {
    if (v.perspective == Perspective::oblique) ordered.push_back(&v);
  }
  for (const auto& v : views) {
    if (v.perspective == Perspective::frontal) ordered.push_back(&v);
  }
  for (const MemoryView* v : ordered) {
    const Image& img = v->image;
    double sum_u = 0.0;
    int count = 0;
    int bottom = -1;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        if (img.at(x, y) == kWorkerColor) {
          sum_u += x;
          ++count;
          bottom = std::max(bottom, y);
        }
      }
    }
    if (count < 3) continue;
    const Intrinsics& k = v->intrinsics;
    const Eigen::Vector3d ray_cam((sum_u / count - k.center_x) / k.focal_x, (bottom - k.center_y) / k.focal_y, 1.0);
    const Eigen::Vector3d ray = v->camera.world_from_camera() * ray_cam;
    if (ray.z() > -1e-9) continue;
    const double t = -v->camera.position.z() / ray.z();
    const Eigen::Vector3d hit = v->camera.position + t * ray;
    return hit.head<2>();
  }
  return std::nullopt;
}

}  // namespace sumvln
