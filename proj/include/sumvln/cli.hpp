#pragma once

// Command-line surface: gen, build-memory, run, eval, inspect-memory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sumvln/agent.hpp"
#include "sumvln/eval.hpp"
#include "sumvln/runner.hpp"
#include "sumvln/simulator.hpp"

namespace sumvln {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<SceneClass> scene_classes{kAllSceneClasses.begin(), kAllSceneClasses.end()};
  int episodes_per_class = 10;
  PolicyKind policy = PolicyKind::scripted_oracle;
  MemorySelection memory_selection = MemorySelection::none;
  RunnerConfig runner;
  std::optional<std::string> reconstruction_endpoint;
  std::optional<std::string> policy_endpoint;
  std::filesystem::path data_dir = "data";
  std::filesystem::path bank_dir = "bank";
  std::filesystem::path output_dir = "runs/latest";
  std::optional<std::filesystem::path> prompt_file;
  int parallel = 1;
  double policy_rate_limit = 0.0;  // calls per second, 0 = unlimited
  GroupBy group_by = GroupBy::scene;
  IsrMode isr_mode = IsrMode::mean_counts;

  /// Copies the top-level seed and memory selection into the runner config
  /// and attaches endpoints where the backend or policy uses them. Throws
  /// InvalidConfig.
  void finalize();
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& c);
/// Missing fields keep their defaults; unknown fields throw InvalidConfig.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct Dataset {
  std::map<std::string, World> worlds;  // by scene id
  std::vector<Episode> episodes;        // sorted by id
};

/// Reads <dir>/worlds/*.json and <dir>/episodes/*.jsonl, keeping the listed
/// scene classes.
Dataset load_dataset(const std::filesystem::path& dir, const std::vector<SceneClass>& classes);

/// Episode ids contain ':', which is replaced for file names.
std::string episode_file_stem(std::string_view episode_id);

/// Entry point of the `sumvln` binary; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace sumvln
