#pragma once

// Episode loop: pre-exploration memory building, perceive/decide/act steps
// and the three termination conditions.

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sumvln/agent.hpp"
#include "sumvln/memory_bank.hpp"
#include "sumvln/simulator.hpp"
#include "sumvln/sum.hpp"

namespace sumvln {

enum class DeviationMode { all_differ, hamming };

struct RunnerConfig {
  int tau = 3;
  int max_steps = 50;
  double success_radius = 3.0;
  MemorySelection memory_selection = MemorySelection::none;
  std::size_t q = 10;
  DynamicsConfig dynamics;
  Intrinsics frame_intrinsics;  // robot camera, 640x360 by default
  std::size_t history_window = 3;
  bool deviation_check = true;  // off for deployment, where labels are unknown
  DeviationMode deviation_mode = DeviationMode::all_differ;
  int hamming_threshold = 3;  // mismatches in the window, hamming mode only
  MemoryKeyMode key_mode = MemoryKeyMode::scene_and_instruction;
  ReconstructorConfig reconstructor;
  MemoryRenderConfig memory_render;  // start pose is taken from the episode
  int policy_retries = 2;            // extra decide/parse attempts per step
  ParseMode parse_mode = ParseMode::lenient;
  std::uint64_t seed = 0;
  Impairment impairment;
  OracleParams oracle;

  /// Throws InvalidConfig.
  void validate() const;
};

nlohmann::json runner_config_to_json(const RunnerConfig& c);
/// Missing fields keep their defaults; unknown fields are rejected.
RunnerConfig runner_config_from_json(const nlohmann::json& j, RunnerConfig base = {});

enum class Termination { stopped, deviated, step_limit };
std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct StepLog {
  int step = 0;
  ActionType action = ActionType::STOP;
  std::string memory_thought;
  std::string observation_thought;
  std::string decision_thought;
  std::chrono::milliseconds latency{0};  // not serialized
};

struct EpisodeResult {
  std::string episode_id;
  SceneClass scene_class = SceneClass::farm;
  int complexity = 0;  // subtask count
  MemorySelection memory_selection = MemorySelection::none;
  std::vector<Pose2D> trajectory;  // start pose first
  std::vector<StepLog> steps;
  Pose2D final_pose;
  Termination termination = Termination::step_limit;
  double ne = 0.0;
  bool success = false;
  int subtasks_completed = 0;
  int subtask_total = 0;
  bool memory_hit = false;
  int collisions = 0;
  std::optional<std::string> failure;  // PolicyFailure cause
};

nlohmann::json episode_result_to_json(const EpisodeResult& r);
EpisodeResult episode_result_from_json(const nlohmann::json& j);

/// One JSON line per step: {episode_id, t, action, recall, decide, pose}.
std::string trace_jsonl(const EpisodeResult& r);

std::string memory_key(const Episode& e, MemoryKeyMode mode);

/// Replays the label actions (or `trajectory` when given), samples q poses,
/// renders and reconstructs them, renders the memory and stores it.
SpatialMemory pre_explore(const World& world, const Episode& episode, const RunnerConfig& cfg,
                          const MemoryBank& bank, std::span<const Pose2D> trajectory = {});

/// All-differ mode: true iff at least tau + 1 actions were predicted and each
/// of the last tau + 1 differs from the label at the same index. Indices past
/// the end of the labels never count as deviating.
bool check_deviation(std::span<const ActionType> predicted, std::span<const ActionType> labels, int tau,
                     DeviationMode mode = DeviationMode::all_differ, int hamming_threshold = 0);

struct RunOptions {
  PolicyKind policy = PolicyKind::scripted_oracle;
  PolicyContext context;  // episode/world/seed/oracle/impairment are filled in
  const PromptTemplate* prompt = nullptr;  // builtin when null
  const MemoryBank* bank = nullptr;        // no memory when null
};

EpisodeResult run_episode(const World& world, const Episode& episode, const RunnerConfig& cfg, const RunOptions& opts);

}  // namespace sumvln
