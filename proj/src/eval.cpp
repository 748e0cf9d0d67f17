#include "sumvln/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "sumvln/codec.hpp"
#include "sumvln/error.hpp"

namespace sumvln {

double navigation_error(const Eigen::Vector2d& final_position, const Eigen::Vector2d& target) {
  return (final_position - target).norm();
}

bool success(double ne, double radius) { return ne <= radius; }

IsrCount independent_success(std::span<const Pose2D> trajectory, std::span<const Eigen::Vector2d> waypoints,
                             double radius) {
  if (waypoints.empty()) throw Error(ErrorCode::EmptyInput, "independent_success needs waypoints");
  IsrCount out{0, static_cast<int>(waypoints.size())};
  std::size_t k = 0;
  for (const auto& pose : trajectory) {
    while (k < waypoints.size() && (pose.position() - waypoints[k]).norm() <= radius) ++k;
    if (k == waypoints.size()) break;
  }
  out.completed = static_cast<int>(k);
  return out;
}

std::string_view to_string(GroupBy g) {
  switch (g) {
    case GroupBy::none: return "none";
    case GroupBy::scene: return "scene";
    case GroupBy::complexity: return "complexity";
    case GroupBy::complexity_coarse: return "complexity-coarse";
  }
  return "none";
}

GroupBy group_by_from_string(std::string_view s) {
  for (auto g : {GroupBy::none, GroupBy::scene, GroupBy::complexity, GroupBy::complexity_coarse}) {
    if (to_string(g) == s) return g;
  }
  throw Error(ErrorCode::BadArgs, "unknown grouping '" + std::string(s) + "'");
}

std::string_view to_string(IsrMode m) { return m == IsrMode::mean_counts ? "mean-counts" : "normalized"; }

IsrMode isr_mode_from_string(std::string_view s) {
  if (s == "mean-counts") return IsrMode::mean_counts;
  if (s == "normalized") return IsrMode::normalized;
  throw Error(ErrorCode::BadArgs, "unknown ISR mode '" + std::string(s) + "'");
}

std::string complexity_bucket(int subtasks, bool coarse) {
  if (subtasks <= 2) return "2";
  if (coarse) return ">=3";
  return subtasks == 3 ? "3" : ">=4";
}

namespace {

MetricsReport summarize(const GroupKey& key, const std::vector<const EpisodeResult*>& members, double radius,
                        IsrMode mode) {
  MetricsReport r;
  r.key = key;
  r.n = members.size();
  double wins = 0.0, ne = 0.0, done = 0.0, total = 0.0;
  for (const EpisodeResult* e : members) {
    wins += success(e->ne, radius) ? 1.0 : 0.0;
    ne += e->ne;
    if (mode == IsrMode::mean_counts) {
      done += e->subtasks_completed;
      total += e->subtask_total;
    } else {
      done += e->subtask_total > 0 ? double(e->subtasks_completed) / e->subtask_total : 0.0;
      total += 1.0;
    }
  }
  const double n = double(r.n);
  r.sr = wins / n;
  r.mean_ne = ne / n;
  r.isr_completed = done / n;
  r.isr_total = total / n;
  return r;
}

std::vector<std::string> group_names(GroupBy g) {
  switch (g) {
    case GroupBy::none: return {};
    case GroupBy::scene: {
      std::vector<std::string> out;
      for (auto c : kAllSceneClasses) out.emplace_back(to_string(c));
      return out;
    }
    case GroupBy::complexity: return {"2", "3", ">=4"};
    case GroupBy::complexity_coarse: return {"2", ">=3"};
  }
  return {};
}

std::string group_of(const EpisodeResult& e, GroupBy g) {
  switch (g) {
    case GroupBy::none: return "all";
    case GroupBy::scene: return std::string(to_string(e.scene_class));
    case GroupBy::complexity: return complexity_bucket(e.complexity, false);
    case GroupBy::complexity_coarse: return complexity_bucket(e.complexity, true);
  }
  return "all";
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseFailure, "not a number in report: '" + s + "'");
  }
  return v;
}

constexpr std::string_view kCsvHeader = "group_scene,group_complexity,memory,n,sr,mean_ne_m,isr_completed,isr_total";

}  // namespace

Aggregate aggregate(std::span<const EpisodeResult> results, double radius, GroupBy group_by, IsrMode isr_mode) {
  Aggregate agg;
  std::map<MemorySelection, std::vector<const EpisodeResult*>> by_memory;
  for (const auto& r : results) by_memory[r.memory_selection].push_back(&r);

  for (const auto& [sel, members] : by_memory) {
    const std::string memory(to_string(sel));
    std::map<std::string, std::vector<const EpisodeResult*>> buckets;
    for (const EpisodeResult* e : members) buckets[group_of(*e, group_by)].push_back(e);
    for (const auto& name : group_names(group_by)) {
      GroupKey key;
      key.memory = memory;
      (group_by == GroupBy::scene ? key.scene : key.complexity) = name;
      const auto it = buckets.find(name);
      if (it == buckets.end()) {
        agg.empty_groups.push_back(key);
      } else {
        agg.reports.push_back(summarize(key, it->second, radius, isr_mode));
      }
    }
    agg.reports.push_back(summarize({"all", "all", memory}, members, radius, isr_mode));
  }
  return agg;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

std::string emit_report(const Aggregate& agg, ReportFormat format) {
  if (agg.reports.empty()) throw Error(ErrorCode::EmptyInput, "no report rows to emit");
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << kCsvHeader << '\n';
    for (const auto& r : agg.reports) {
      out << csv_field(r.key.scene) << ',' << csv_field(r.key.complexity) << ',' << csv_field(r.key.memory) << ','
          << r.n << ',' << format_double(r.sr) << ',' << format_double(r.mean_ne) << ','
          << format_double(r.isr_completed) << ',' << format_double(r.isr_total) << '\n';
    }
    for (const auto& k : agg.empty_groups) {
      out << "# empty group: scene=" << k.scene << " complexity=" << k.complexity << " memory=" << k.memory << '\n';
    }
  } else {
    out << "| Scene | Complexity | Memory | n | SR↑ | NE↓ (m) | ISR |\n";
    out << "|---|---|---|---:|---:|---:|---:|\n";
    for (const auto& r : agg.reports) {
      out << "| " << r.key.scene << " | " << r.key.complexity << " | " << r.key.memory << " | " << r.n << " | "
          << fixed2(r.sr) << " | " << fixed2(r.mean_ne) << " | " << fixed2(r.isr_completed) << " / "
          << fixed2(r.isr_total) << " |\n";
    }
    if (!agg.empty_groups.empty()) {
      out << "\nGroups without episodes:";
      for (std::size_t i = 0; i < agg.empty_groups.size(); ++i) {
        const auto& k = agg.empty_groups[i];
        out << (i ? "; " : " ") << "scene " << k.scene << ", complexity " << k.complexity << ", memory "
            << k.memory;
      }
      out << '\n';
    }
  }
  return out.str();
}

void write_report(const std::filesystem::path& path, const Aggregate& agg, ReportFormat format) {
  const std::string text = emit_report(agg, format);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<MetricsReport> parse_csv_report(std::string_view text) {
  std::vector<MetricsReport> out;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      if (line != kCsvHeader) throw Error(ErrorCode::ParseFailure, "unexpected report header");
      header = false;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw Error(ErrorCode::ParseFailure, "report row has " + std::to_string(f.size()) + " fields");
    MetricsReport r;
    r.key = {f[0], f[1], f[2]};
    r.n = static_cast<std::size_t>(parse_double(f[3]));
    r.sr = parse_double(f[4]);
    r.mean_ne = parse_double(f[5]);
    r.isr_completed = parse_double(f[6]);
    r.isr_total = parse_double(f[7]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sumvln
