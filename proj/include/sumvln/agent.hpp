#pragma once

// Decision layer: instruction decomposition, prompt assembly, decision
// policies and parsing of the tagged model output.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sumvln/http.hpp"
#include "sumvln/memory_bank.hpp"
#include "sumvln/oracle.hpp"
#include "sumvln/simulator.hpp"

namespace sumvln {

// ---------------------------------------------------------------------------
// Subtasks

struct SubtaskList {
  std::vector<std::string> subtasks;
  std::size_t cursor = 0;
};

/// Splits on sentence ends, then on ", then", "and then" and "; ". Throws
/// EmptyInstruction when nothing but whitespace and separators remains.
SubtaskList decompose_instruction(std::string_view instruction);

// ---------------------------------------------------------------------------
// Prompt

/// Placeholders: {{instruction}}, {{subtasks}}, {{history}}, {{step}}.
struct PromptTemplate {
  std::string system_text;
  std::string user_text;

  /// A line consisting of "---" separates the system and user sections.
  static PromptTemplate parse(std::string_view text);
  static PromptTemplate load(const std::filesystem::path& path);
  static const PromptTemplate& builtin();

  /// Throws UnresolvedPlaceholder if either section uses an unknown name or
  /// an unterminated "{{".
  void validate() const;
};

struct PromptValues {
  std::string instruction;
  std::string subtasks;
  std::string history;
  std::string step;
};

/// Single pass: substituted values are never expanded again.
std::string fill_placeholders(std::string_view text, const PromptValues& values);

struct RequestPart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;
  Image image;
};

struct ModelRequest {
  std::string system;
  std::vector<RequestPart> parts;
  std::size_t memory_attachments = 0;
  std::size_t frame_attachments = 0;

  std::size_t attachment_count() const { return memory_attachments + frame_attachments; }
  /// {system, parts: [{type: "text"|"image", data}]}; images as base64 PNG.
  nlohmann::json to_json() const;
  std::string serialize() const;
};

struct RequestInputs {
  std::string instruction;
  const SubtaskList* subtasks = nullptr;
  std::span<const MemoryView> memory;
  std::span<const Frame> recent_frames;  // oldest first
  std::span<const ActionType> history;   // actions taken so far
  int step = 0;
  std::size_t history_window = 3;
};

/// Memory views first (each preceded by a label part), then the last
/// `history_window` frames, then the user prompt. Throws EmptyInput when no
/// frames are given.
ModelRequest build_request(const PromptTemplate& tmpl, const RequestInputs& in);

// ---------------------------------------------------------------------------
// Output

struct ModelOutput {
  std::string raw;
  ActionType action = ActionType::STOP;
  std::string memory_thought;       // <recall>
  std::string observation_thought;  // <observe>
  std::string decision_thought;     // <decide>
};

enum class ParseMode { strict, lenient };

std::string compose_output(ActionType action, std::string_view recall, std::string_view observe,
                           std::string_view decide);

/// First occurrence of each tag pair wins. Action text is trimmed, upper-cased
/// and has spaces and hyphens mapped to '_' before matching. Lenient mode
/// leaves missing thought sections empty instead of throwing MissingSection.
ModelOutput parse_output(std::string_view raw, ParseMode mode = ParseMode::strict);

// ---------------------------------------------------------------------------
// Policies

enum class PolicyKind { scripted_oracle, random, fixed, remote };

std::string_view to_string(PolicyKind k);
/// Accepts '-' in place of '_'.
PolicyKind policy_kind_from_string(std::string_view s);

/// Minimum spacing between calls, shared by all remote policies of a run.
class RateLimiter {
 public:
  explicit RateLimiter(double calls_per_second = 0.0);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

/// Degrades the scripted oracle: noisy bearings and a limited sensing range
/// beyond which the final target is believed to be `misplacement` metres away
/// from where it is. A memory view showing the worker replaces that belief
/// with a ground-plane estimate.
struct Impairment {
  double bearing_noise_deg = 0.0;
  double sensing_range = std::numeric_limits<double>::infinity();
  double misplacement = 4.0;
  bool use_memory_hint = true;

  bool active() const { return bearing_noise_deg > 0.0 || std::isfinite(sensing_range); }
};

struct PolicyContext {
  std::uint64_t seed = 0;
  const World* world = nullptr;
  const Episode* episode = nullptr;
  OracleParams oracle;
  Impairment impairment;
  std::optional<HttpEndpoint> endpoint;
  std::shared_ptr<RateLimiter> rate_limiter;
  std::chrono::milliseconds timeout = std::chrono::seconds(120);
};

/// What the runner knows at a step besides the request.
struct StepObservation {
  int step = 0;
  Pose2D pose;
  std::span<const MemoryView> memory;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  /// Raw tagged text.
  virtual std::string decide(const ModelRequest& request, const StepObservation& obs) = 0;
};

/// Throws InvalidConfig when the context lacks what the policy needs.
std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyContext& ctx);

/// Ground position of the worker seen in a memory view: the ray through the
/// bottom of the worker's pixel blob intersected with z = 0. Oblique views
/// are preferred.
std::optional<Eigen::Vector2d> memory_target_hint(std::span<const MemoryView> views);

}  // namespace sumvln
