#include "sumvln/runner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "sumvln/error.hpp"
#include "sumvln/eval.hpp"
#include "sumvln/log.hpp"
#include "json_util.hpp"

namespace sumvln {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string_view to_string(DeviationMode m) { return m == DeviationMode::all_differ ? "all-differ" : "hamming"; }

DeviationMode deviation_mode_from_string(std::string_view s) {
  if (s == "all-differ") return DeviationMode::all_differ;
  if (s == "hamming") return DeviationMode::hamming;
  throw Error(ErrorCode::InvalidConfig, "unknown deviation mode '" + std::string(s) + "'");
}

std::string_view to_string(MemoryKeyMode m) {
  return m == MemoryKeyMode::scene_and_instruction ? "scene-and-instruction" : "scene-only";
}

MemoryKeyMode key_mode_from_string(std::string_view s) {
  if (s == "scene-and-instruction") return MemoryKeyMode::scene_and_instruction;
  if (s == "scene-only") return MemoryKeyMode::scene_only;
  throw Error(ErrorCode::InvalidConfig, "unknown key mode '" + std::string(s) + "'");
}

// Copies the fields of `j` into `target` through `apply`, rejecting names
// that `apply` does not know.
template <typename Fn>
void for_each_field(const json& j, std::string_view where, Fn&& apply) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(where) + " must be a JSON object");
  for (const auto& [name, value] : j.items()) {
    if (!apply(name, value)) {
      throw Error(ErrorCode::InvalidConfig, "unknown field '" + name + "' in " + std::string(where));
    }
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void RunnerConfig::validate() const {
  if (tau < 1) throw Error(ErrorCode::InvalidConfig, "tau must be at least 1");
  if (max_steps < 1) throw Error(ErrorCode::InvalidConfig, "max_steps must be at least 1");
  if (!(success_radius > 0.0)) throw Error(ErrorCode::InvalidConfig, "success_radius must be positive");
  if (q < 2) throw Error(ErrorCode::InvalidConfig, "q must be at least 2");
  if (history_window < 1) throw Error(ErrorCode::InvalidConfig, "history_window must be at least 1");
  if (policy_retries < 0) throw Error(ErrorCode::InvalidConfig, "policy_retries must be non-negative");
  if (!(dynamics.forward_step > 0.0) || !(dynamics.rotate_step > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "dynamics steps must be positive");
  }
  try {
    frame_intrinsics.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("frame intrinsics: ") + e.what());
  }
  reconstructor.validate();
  memory_render.validate();
}

json runner_config_to_json(const RunnerConfig& c) {
  json j = json::object();
  j["tau"] = c.tau;
  j["max_steps"] = c.max_steps;
  j["success_radius"] = c.success_radius;
  j["memory_selection"] = to_string(c.memory_selection);
  j["q"] = c.q;
  j["dynamics"] = {{"forward_step", c.dynamics.forward_step},
                   {"rotate_step_deg", c.dynamics.rotate_step / kDeg},
                   {"camera_height", c.dynamics.camera_height}};
  j["frame_intrinsics"] = detail::intrinsics_json(c.frame_intrinsics);
  j["history_window"] = c.history_window;
  j["deviation_check"] = c.deviation_check;
  j["deviation_mode"] = to_string(c.deviation_mode);
  j["hamming_threshold"] = c.hamming_threshold;
  j["key_mode"] = to_string(c.key_mode);
  j["reconstructor"] = {{"backend", to_string(c.reconstructor.backend)},
                        {"pixel_stride", c.reconstructor.pixel_stride},
                        {"endpoint", c.reconstructor.external_endpoint ? json(*c.reconstructor.external_endpoint)
                                                                       : json(nullptr)},
                        {"hyper_params", c.reconstructor.hyper_params}};
  j["memory_render"] = {{"frontal_pitch_deg", c.memory_render.frontal_pitch_deg},
                        {"oblique_pitch_deg", c.memory_render.oblique_pitch_deg},
                        {"hfov_deg", c.memory_render.hfov_deg},
                        {"min_oblique_standoff", c.memory_render.min_oblique_standoff},
                        {"created_at", c.memory_render.created_at ? json(*c.memory_render.created_at)
                                                                  : json(nullptr)}};
  j["policy_retries"] = c.policy_retries;
  j["parse_mode"] = c.parse_mode == ParseMode::strict ? "strict" : "lenient";
  j["seed"] = c.seed;
  j["impairment"] = {{"bearing_noise_deg", c.impairment.bearing_noise_deg},
                     {"sensing_range", finite_or_null(c.impairment.sensing_range)},
                     {"misplacement", c.impairment.misplacement},
                     {"use_memory_hint", c.impairment.use_memory_hint}};
  j["oracle"] = {{"waypoint_radius", c.oracle.waypoint_radius},
                 {"bearing_tolerance_deg", c.oracle.bearing_tolerance / kDeg}};
  return j;
}

RunnerConfig runner_config_from_json(const json& j, RunnerConfig c) {
  try {
    for_each_field(j, "runner config", [&](const std::string& k, const json& v) {
      if (k == "tau") c.tau = v.get<int>();
      else if (k == "max_steps") c.max_steps = v.get<int>();
      else if (k == "success_radius") c.success_radius = v.get<double>();
      else if (k == "memory_selection") c.memory_selection = memory_selection_from_string(v.get<std::string>());
      else if (k == "q") c.q = v.get<std::size_t>();
      else if (k == "dynamics") {
        for_each_field(v, "dynamics", [&](const std::string& dk, const json& dv) {
          if (dk == "forward_step") c.dynamics.forward_step = dv.get<double>();
          else if (dk == "rotate_step_deg") c.dynamics.rotate_step = dv.get<double>() * kDeg;
          else if (dk == "camera_height") c.dynamics.camera_height = dv.get<double>();
          else return false;
          return true;
        });
      } else if (k == "frame_intrinsics") {
        c.frame_intrinsics = detail::intrinsics_from(v);
      } else if (k == "history_window") c.history_window = v.get<std::size_t>();
      else if (k == "deviation_check") c.deviation_check = v.get<bool>();
      else if (k == "deviation_mode") c.deviation_mode = deviation_mode_from_string(v.get<std::string>());
      else if (k == "hamming_threshold") c.hamming_threshold = v.get<int>();
      else if (k == "key_mode") c.key_mode = key_mode_from_string(v.get<std::string>());
      else if (k == "reconstructor") {
        for_each_field(v, "reconstructor", [&](const std::string& rk, const json& rv) {
          if (rk == "backend") c.reconstructor.backend = reconstruction_backend_from_string(rv.get<std::string>());
          else if (rk == "pixel_stride") c.reconstructor.pixel_stride = rv.get<int>();
          else if (rk == "endpoint") {
            c.reconstructor.external_endpoint =
                rv.is_null() ? std::nullopt : std::optional<std::string>(rv.get<std::string>());
          } else if (rk == "hyper_params") c.reconstructor.hyper_params = rv;
          else return false;
          return true;
        });
      } else if (k == "memory_render") {
        for_each_field(v, "memory_render", [&](const std::string& mk, const json& mv) {
          if (mk == "frontal_pitch_deg") c.memory_render.frontal_pitch_deg = mv.get<double>();
          else if (mk == "oblique_pitch_deg") c.memory_render.oblique_pitch_deg = mv.get<double>();
          else if (mk == "hfov_deg") c.memory_render.hfov_deg = mv.get<double>();
          else if (mk == "min_oblique_standoff") c.memory_render.min_oblique_standoff = mv.get<double>();
          else if (mk == "created_at") {
            c.memory_render.created_at =
                mv.is_null() ? std::nullopt : std::optional<std::string>(mv.get<std::string>());
          } else return false;
          return true;
        });
      } else if (k == "policy_retries") c.policy_retries = v.get<int>();
      else if (k == "parse_mode") {
        const auto s = v.get<std::string>();
        if (s != "strict" && s != "lenient") throw Error(ErrorCode::InvalidConfig, "parse_mode is strict|lenient");
        c.parse_mode = s == "strict" ? ParseMode::strict : ParseMode::lenient;
      } else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "impairment") {
        for_each_field(v, "impairment", [&](const std::string& ik, const json& iv) {
          if (ik == "bearing_noise_deg") c.impairment.bearing_noise_deg = iv.get<double>();
          else if (ik == "sensing_range") {
            c.impairment.sensing_range = iv.is_null() ? std::numeric_limits<double>::infinity() : iv.get<double>();
          } else if (ik == "misplacement") c.impairment.misplacement = iv.get<double>();
          else if (ik == "use_memory_hint") c.impairment.use_memory_hint = iv.get<bool>();
          else return false;
          return true;
        });
      } else if (k == "oracle") {
        for_each_field(v, "oracle", [&](const std::string& ok, const json& ov) {
          if (ok == "waypoint_radius") c.oracle.waypoint_radius = ov.get<double>();
          else if (ok == "bearing_tolerance_deg") c.oracle.bearing_tolerance = ov.get<double>() * kDeg;
          else return false;
          return true;
        });
      } else {
        return false;
      }
      return true;
    });
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("runner config: ") + e.what());
  }
  return c;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::stopped: return "stopped";
    case Termination::deviated: return "deviated";
    case Termination::step_limit: return "step_limit";
  }
  return "step_limit";
}

Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::stopped, Termination::deviated, Termination::step_limit}) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::ParseFailure, "unknown termination '" + std::string(s) + "'");
}

json episode_result_to_json(const EpisodeResult& r) {
  json traj = json::array();
  for (const auto& p : r.trajectory) traj.push_back(detail::pose2d_json(p));
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step},
                     {"action", to_string(s.action)},
                     {"recall", s.memory_thought},
                     {"observe", s.observation_thought},
                     {"decide", s.decision_thought}});
  }
  json j = json::object();
  j["episode_id"] = r.episode_id;
  j["scene_class"] = to_string(r.scene_class);
  j["complexity"] = r.complexity;
  j["memory_selection"] = to_string(r.memory_selection);
  j["trajectory"] = std::move(traj);
  j["steps"] = std::move(steps);
  j["final_pose"] = detail::pose2d_json(r.final_pose);
  j["termination"] = to_string(r.termination);
  j["ne"] = r.ne;
  j["success"] = r.success;
  j["subtasks_completed"] = r.subtasks_completed;
  j["subtask_total"] = r.subtask_total;
  j["memory_hit"] = r.memory_hit;
  j["collisions"] = r.collisions;
  j["failure"] = r.failure ? json(*r.failure) : json(nullptr);
  return j;
}

EpisodeResult episode_result_from_json(const json& j) {
  try {
    EpisodeResult r;
    r.episode_id = j.at("episode_id").get<std::string>();
    r.scene_class = scene_class_from_string(j.at("scene_class").get<std::string>());
    r.complexity = j.at("complexity").get<int>();
    r.memory_selection = memory_selection_from_string(j.at("memory_selection").get<std::string>());
    for (const auto& p : j.at("trajectory")) r.trajectory.push_back(detail::pose2d_from(p));
    for (const auto& s : j.at("steps")) {
      StepLog log;
      log.step = s.at("step").get<int>();
      const auto a = action_from_string(s.at("action").get<std::string>());
      if (!a) throw Error(ErrorCode::ParseFailure, "bad action in result");
      log.action = *a;
      log.memory_thought = s.at("recall").get<std::string>();
      log.observation_thought = s.at("observe").get<std::string>();
      log.decision_thought = s.at("decide").get<std::string>();
      r.steps.push_back(std::move(log));
    }
    r.final_pose = detail::pose2d_from(j.at("final_pose"));
    r.termination = termination_from_string(j.at("termination").get<std::string>());
    r.ne = j.at("ne").get<double>();
    r.success = j.at("success").get<bool>();
    r.subtasks_completed = j.at("subtasks_completed").get<int>();
    r.subtask_total = j.at("subtask_total").get<int>();
    r.memory_hit = j.at("memory_hit").get<bool>();
    r.collisions = j.at("collisions").get<int>();
    if (j.contains("failure") && !j["failure"].is_null()) r.failure = j["failure"].get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("episode result: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseFailure, std::string("episode result: ") + e.what());
  }
}

std::string trace_jsonl(const EpisodeResult& r) {
  std::string out;
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto& s = r.steps[i];
    const Pose2D& pose = i + 1 < r.trajectory.size() ? r.trajectory[i + 1] : r.final_pose;
    json line = json::object();
    line["episode_id"] = r.episode_id;
    line["t"] = s.step;
    line["action"] = to_string(s.action);
    line["recall"] = s.memory_thought;
    line["decide"] = s.decision_thought;
    line["pose"] = detail::pose2d_json(pose);
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string memory_key(const Episode& e, MemoryKeyMode mode) {
  return MemoryBank::make_key(e.scene_id(), e.instruction, mode);
}

SpatialMemory pre_explore(const World& world, const Episode& episode, const RunnerConfig& cfg, const MemoryBank& bank,
                          std::span<const Pose2D> trajectory) {
  std::vector<Pose2D> poses;
  if (trajectory.empty()) {
    poses = replay(world, episode.start, episode.label_actions, cfg.dynamics);
  } else {
    poses.assign(trajectory.begin(), trajectory.end());
  }
  std::vector<Frame> frames;
  for (std::size_t i : sample_indices(poses.size(), cfg.q)) {
    frames.push_back(
        render_frame(world, poses[i], cfg.frame_intrinsics, cfg.dynamics.camera_height, static_cast<int>(i)));
  }
  const Reconstruction recon = reconstruct(frames, cfg.reconstructor);
  MemoryRenderConfig mcfg = cfg.memory_render;
  mcfg.start = episode.start;
  mcfg.camera_height = cfg.dynamics.camera_height;
  SpatialMemory m = render_memory(recon, mcfg);
  m.scene_key = memory_key(episode, cfg.key_mode);
  bank.store(m.scene_key, m);
  return m;
}

bool check_deviation(std::span<const ActionType> predicted, std::span<const ActionType> labels, int tau,
                     DeviationMode mode, int hamming_threshold) {
  const std::size_t window = static_cast<std::size_t>(tau) + 1;
  if (tau < 1 || predicted.size() < window) return false;
  int mismatches = 0;
  for (std::size_t i = predicted.size() - window; i < predicted.size(); ++i) {
    if (i < labels.size() && predicted[i] != labels[i]) ++mismatches;
  }
  if (mode == DeviationMode::all_differ) return mismatches == static_cast<int>(window);
  return mismatches >= std::max(hamming_threshold, 1);
}

EpisodeResult run_episode(const World& world, const Episode& episode, const RunnerConfig& cfg,
                          const RunOptions& opts) {
  cfg.validate();
  EpisodeResult res;
  res.episode_id = episode.id;
  res.scene_class = episode.scene_class;
  res.complexity = episode.subtask_count();
  res.memory_selection = cfg.memory_selection;

  MemoryLoad memory;
  if (cfg.memory_selection != MemorySelection::none) {
    if (opts.bank) {
      memory = opts.bank->load(memory_key(episode, cfg.key_mode), cfg.memory_selection);
    }
    if (!memory.hit) log_warn("no memory for " + episode.id + "; running without it");
  }
  res.memory_hit = memory.hit;

  PolicyContext ctx = opts.context;
  ctx.seed = cfg.seed;
  ctx.world = &world;
  ctx.episode = &episode;
  ctx.oracle = cfg.oracle;
  ctx.impairment = cfg.impairment;
  const auto policy = make_policy(opts.policy, ctx);
  const PromptTemplate& tmpl = opts.prompt ? *opts.prompt : PromptTemplate::builtin();
  SubtaskList subtasks = decompose_instruction(episode.instruction);

  RobotState state(episode.start);
  res.trajectory.push_back(state.pose());
  std::deque<Frame> recent;
  std::vector<ActionType> predicted;
  bool ended = false;

  for (int t = 0; t < cfg.max_steps; ++t) {
    recent.push_back(render_frame(world, state.pose(), cfg.frame_intrinsics, cfg.dynamics.camera_height, t));
    while (recent.size() > cfg.history_window) recent.pop_front();
    const std::vector<Frame> frames(recent.begin(), recent.end());

    RequestInputs in;
    in.instruction = episode.instruction;
    in.subtasks = &subtasks;
    in.memory = memory.views;
    in.recent_frames = frames;
    in.history = predicted;
    in.step = t;
    in.history_window = cfg.history_window;
    const ModelRequest request = build_request(tmpl, in);
    const StepObservation obs{t, state.pose(), memory.views};

    std::optional<ModelOutput> out;
    std::string last_error;
    const auto started = std::chrono::steady_clock::now();
    for (int attempt = 0; attempt <= cfg.policy_retries && !out; ++attempt) {
      try {
        out = parse_output(policy->decide(request, obs), cfg.parse_mode);
      } catch (const Error& e) {
        last_error = e.what();
        log_warn(episode.id + " step " + std::to_string(t) + ": " + last_error);
      }
    }
    if (!out) {
      res.failure = "PolicyFailure: " + last_error;
      log_error(episode.id + ": " + *res.failure);
      res.termination = Termination::step_limit;
      ended = true;
      break;
    }

    StepLog log;
    log.step = t;
    log.action = out->action;
    log.memory_thought = std::move(out->memory_thought);
    log.observation_thought = std::move(out->observation_thought);
    log.decision_thought = std::move(out->decision_thought);
    log.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    res.steps.push_back(std::move(log));
    predicted.push_back(out->action);

    state = step(world, state, out->action, cfg.dynamics);
    if (state.collided()) ++res.collisions;
    res.trajectory.push_back(state.pose());

    if (out->action == ActionType::STOP) {
      res.termination = Termination::stopped;
      ended = true;
      break;
    }
    if (cfg.deviation_check &&
        check_deviation(predicted, episode.label_actions, cfg.tau, cfg.deviation_mode, cfg.hamming_threshold)) {
      res.termination = Termination::deviated;
      ended = true;
      break;
    }
  }
  if (!ended) res.termination = Termination::step_limit;

  res.final_pose = state.pose();
  res.ne = navigation_error(res.final_pose.position(), episode.target);
  res.success = success(res.ne, cfg.success_radius);
  if (!episode.subtask_waypoints.empty()) {
    const IsrCount isr = independent_success(res.trajectory, episode.subtask_waypoints, cfg.success_radius);
    res.subtasks_completed = isr.completed;
    res.subtask_total = isr.total;
  }
  return res;
}

}  // namespace sumvln
