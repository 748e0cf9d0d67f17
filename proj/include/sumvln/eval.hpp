#pragma once

// Metrics (SR, NE, ISR), grouped aggregation and report emission.

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sumvln/runner.hpp"

namespace sumvln {

/// Planar Euclidean distance.
double navigation_error(const Eigen::Vector2d& final_position, const Eigen::Vector2d& target);

/// Inclusive: ne == radius succeeds.
bool success(double ne, double radius);

struct IsrCount {
  int completed = 0;
  int total = 0;
};

/// Longest prefix of `waypoints` that the trajectory visits within `radius`
/// in order. One pose may satisfy several consecutive waypoints. Throws
/// EmptyInput when there are no waypoints.
IsrCount independent_success(std::span<const Pose2D> trajectory, std::span<const Eigen::Vector2d> waypoints,
                             double radius);

enum class GroupBy { none, scene, complexity, complexity_coarse };
std::string_view to_string(GroupBy g);
GroupBy group_by_from_string(std::string_view s);

/// mean_counts: (mean completed, mean total). normalized: (mean of
/// completed / total, 1).
enum class IsrMode { mean_counts, normalized };
std::string_view to_string(IsrMode m);
IsrMode isr_mode_from_string(std::string_view s);

struct GroupKey {
  std::string scene = "all";
  std::string complexity = "all";
  std::string memory;

  friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

struct MetricsReport {
  GroupKey key;
  std::size_t n = 0;
  double sr = 0.0;
  double mean_ne = 0.0;
  double isr_completed = 0.0;
  double isr_total = 0.0;
};

struct Aggregate {
  std::vector<MetricsReport> reports;
  std::vector<GroupKey> empty_groups;  // named groups with no episodes
};

/// Complexity bucket of a subtask count: "2" (two or fewer), "3", ">=4"; or
/// "2" and ">=3" when coarse.
std::string complexity_bucket(int subtasks, bool coarse);

/// Groups by memory selection first, then by `group_by`; each memory
/// selection also gets an "all" row. Success is re-derived from ne and
/// `radius`.
Aggregate aggregate(std::span<const EpisodeResult> results, double radius, GroupBy group_by,
                    IsrMode isr_mode = IsrMode::mean_counts);

enum class ReportFormat { csv, markdown };

/// CSV carries exact (shortest round-trip) values, markdown two decimals.
/// Throws EmptyInput when there are no reports.
std::string emit_report(const Aggregate& agg, ReportFormat format);
void write_report(const std::filesystem::path& path, const Aggregate& agg, ReportFormat format);

/// Reads back the rows of a CSV report.
std::vector<MetricsReport> parse_csv_report(std::string_view text);

/// Shortest decimal text that reads back as exactly `v`.
std::string format_double(double v);

}  // namespace sumvln
