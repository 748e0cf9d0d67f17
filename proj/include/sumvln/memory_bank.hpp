#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sumvln/sum.hpp"

namespace sumvln {

struct MemoryView {
  Perspective perspective = Perspective::frontal;
  Image image;
  CameraPose camera;
  Intrinsics intrinsics;
};

struct MemoryLoad {
  bool hit = false;
  std::vector<MemoryView> views;  // [], [frontal], [oblique] or [frontal, oblique]

  std::vector<Image> images() const;
};

enum class MemoryKeyMode { scene_and_instruction, scene_only };

struct StoredRecord {
  std::string key;
  std::filesystem::path directory;
  nlohmann::json meta;
};

/// Persistent store of rendered memories.
///
/// Layout: <root>/<key>/{frontal.png, oblique.png, meta.json}. <root>/<key>
/// is a symlink into <root>/.records/; a store writes a fresh record directory
/// and swaps the link with rename(2), so readers see either the previous or
/// the new record, never a mix. One writer per key; any number of readers.
class MemoryBank {
 public:
  explicit MemoryBank(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  StoredRecord store(const std::string& key, const SpatialMemory& m) const;

  /// A missing key is a miss (hit = false), not an error. Throws CorruptRecord
  /// when the stored images do not match the digests in meta.json.
  MemoryLoad load(const std::string& key, MemorySelection sel) const;

  /// Full record, or nullopt when the key is absent.
  std::optional<SpatialMemory> load_record(const std::string& key) const;

  bool contains(const std::string& key) const;
  std::vector<std::string> keys() const;

  /// scene id, optionally followed by "--" and 16 hex digits of the
  /// instruction's SHA-256.
  static std::string make_key(std::string_view scene_id, std::string_view instruction,
                              MemoryKeyMode mode = MemoryKeyMode::scene_and_instruction);

  /// Throws InvalidKey for empty keys or characters outside [A-Za-z0-9._-].
  static void validate_key(std::string_view key);

 private:
  std::filesystem::path root_;
};

}  // namespace sumvln
