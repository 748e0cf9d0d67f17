#include "sumvln/memory_bank.hpp"

#include <algorithm>
#include <random>

#include "sumvln/codec.hpp"
#include "sumvln/error.hpp"
#include "json_util.hpp"

namespace fs = std::filesystem;

namespace sumvln {

using detail::camera_from;
using detail::camera_json;
using detail::intrinsics_from;
using detail::intrinsics_json;

namespace {

constexpr const char* kRecordsDir = ".records";
constexpr int kReadAttempts = 16;

std::string random_nonce() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  std::uint64_t v = rng();
  for (int i = 0; i < 16; ++i, v >>= 4) out.push_back(kHex[v & 0xF]);
  return out;
}

// Thrown internally when a record directory vanished mid-read (a concurrent
// store replaced it); the caller re-resolves the link and retries.
struct RecordVanished {};

Bytes read_record_file(const fs::path& p) {
  try {
    return read_file(p);
  } catch (const Error&) {
    throw RecordVanished{};
  }
}

struct RawRecord {
  nlohmann::json meta;
  std::optional<Bytes> frontal_png;
  std::optional<Bytes> oblique_png;
};

std::optional<RawRecord> read_raw(const fs::path& root, const std::string& key, bool frontal, bool oblique) {
  for (int attempt = 0; attempt < kReadAttempts; ++attempt) {
    std::error_code ec;
    const fs::path dir = fs::canonical(root / key, ec);
    if (ec) {
      // The link may have been swapped and its old target removed in between.
      if (fs::exists(fs::symlink_status(root / key, ec))) continue;
      return std::nullopt;
    }
    try {
      RawRecord rec;
      const Bytes meta_bytes = read_record_file(dir / "meta.json");
      try {
        rec.meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
      } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::CorruptRecord, "meta.json for '" + key + "': " + ex.what());
      }
      auto check = [&](const char* file, const char* field) {
        Bytes data = read_record_file(dir / file);
        if (sha256_hex(data) != rec.meta.value(field, std::string{})) {
          throw Error(ErrorCode::CorruptRecord, std::string(file) + " does not match its digest for '" + key + "'");
        }
        return data;
      };
      if (frontal) rec.frontal_png = check("frontal.png", "frontal_sha256");
      if (oblique) rec.oblique_png = check("oblique.png", "oblique_sha256");
      return rec;
    } catch (const RecordVanished&) {
      continue;
    }
  }
  throw Error(ErrorCode::IoFailure, "record '" + key + "' kept changing while being read");
}

}  // namespace

std::vector<Image> MemoryLoad::images() const {
  std::vector<Image> out;
  for (const auto& v : views) out.push_back(v.image);
  return out;
}

MemoryBank::MemoryBank(fs::path root) : root_(std::move(root)) {}

void MemoryBank::validate_key(std::string_view key) {
  if (key.empty()) throw Error(ErrorCode::InvalidKey, "memory key must be non-empty");
  if (key.front() == '.') throw Error(ErrorCode::InvalidKey, "memory key may not start with '.'");
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) throw Error(ErrorCode::InvalidKey, "invalid character in memory key '" + std::string(key) + "'");
  }
}

std::string MemoryBank::make_key(std::string_view scene_id, std::string_view instruction, MemoryKeyMode mode) {
  std::string key(scene_id);
  if (mode == MemoryKeyMode::scene_and_instruction) {
    key += "--" + sha256_hex(instruction).substr(0, 16);
  }
  validate_key(key);
  return key;
}

StoredRecord MemoryBank::store(const std::string& key, const SpatialMemory& m) const {
  validate_key(key);
  try {
    fs::create_directories(root_ / kRecordsDir);
    const std::string version = key + "." + random_nonce();
    const fs::path dir = root_ / kRecordsDir / version;
    fs::create_directory(dir);

    const Bytes frontal = encode_png(m.frontal);
    const Bytes oblique = encode_png(m.oblique);
    nlohmann::json meta;
    meta["scene_key"] = m.scene_key;
    meta["frontal_pitch"] = m.frontal_pitch_deg;
    meta["oblique_pitch"] = m.oblique_pitch_deg;
    meta["reconstruction_digest"] = m.reconstruction_digest;
    meta["created_at"] = m.created_at;
    meta["frontal_sha256"] = sha256_hex(frontal);
    meta["oblique_sha256"] = sha256_hex(oblique);
    meta["frontal_camera"] = camera_json(m.frontal_camera);
    meta["oblique_camera"] = camera_json(m.oblique_camera);
    meta["intrinsics"] = intrinsics_json(m.intrinsics);
    write_file(dir / "frontal.png", frontal);
    write_file(dir / "oblique.png", oblique);
    write_text_file(dir / "meta.json", meta.dump(2) + "\n");

    const fs::path link = root_ / key;
    std::optional<fs::path> previous;
    if (fs::is_symlink(link)) {
      previous = root_ / fs::read_symlink(link);
    } else if (fs::exists(link)) {
      fs::remove_all(link);
    }
    const fs::path tmp_link = root_ / (".link-" + version);
    fs::create_symlink(fs::path(kRecordsDir) / version, tmp_link);
    fs::rename(tmp_link, link);
    if (previous && fs::exists(*previous) && fs::canonical(*previous) != fs::canonical(dir)) {
      fs::remove_all(*previous);
    }
    return {key, link, meta};
  } catch (const fs::filesystem_error& ex) {
    throw Error(ErrorCode::IoFailure, std::string("memory bank store: ") + ex.what());
  }
}

MemoryLoad MemoryBank::load(const std::string& key, MemorySelection sel) const {
  validate_key(key);
  MemoryLoad out;
  if (sel == MemorySelection::none) return out;
  const bool want_f = sel == MemorySelection::frontal || sel == MemorySelection::hybrid;
  const bool want_o = sel == MemorySelection::oblique || sel == MemorySelection::hybrid;
  const auto raw = read_raw(root_, key, want_f, want_o);
  if (!raw) return out;
  try {
    const Intrinsics k = intrinsics_from(raw->meta.at("intrinsics"));
    if (want_f) {
      out.views.push_back({Perspective::frontal, decode_png(*raw->frontal_png), camera_from(raw->meta.at("frontal_camera")), k});
    }
    if (want_o) {
      out.views.push_back({Perspective::oblique, decode_png(*raw->oblique_png), camera_from(raw->meta.at("oblique_camera")), k});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::CorruptRecord, "meta.json for '" + key + "': " + ex.what());
  }
  out.hit = true;
  return out;
}

std::optional<SpatialMemory> MemoryBank::load_record(const std::string& key) const {
  validate_key(key);
  const auto raw = read_raw(root_, key, true, true);
  if (!raw) return std::nullopt;
  try {
    SpatialMemory m;
    const auto& meta = raw->meta;
    m.frontal = decode_png(*raw->frontal_png);
    m.oblique = decode_png(*raw->oblique_png);
    m.frontal_pitch_deg = meta.at("frontal_pitch").get<double>();
    m.oblique_pitch_deg = meta.at("oblique_pitch").get<double>();
    m.frontal_camera = camera_from(meta.at("frontal_camera"));
    m.oblique_camera = camera_from(meta.at("oblique_camera"));
    m.intrinsics = intrinsics_from(meta.at("intrinsics"));
    m.reconstruction_digest = meta.at("reconstruction_digest").get<std::string>();
    m.scene_key = meta.at("scene_key").get<std::string>();
    m.created_at = meta.at("created_at").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::CorruptRecord, "meta.json for '" + key + "': " + ex.what());
  }
}

bool MemoryBank::contains(const std::string& key) const {
  validate_key(key);
  std::error_code ec;
  return fs::exists(root_ / key, ec);
}

std::vector<std::string> MemoryBank::keys() const {
  std::vector<std::string> out;
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) return out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    const std::string name = entry.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    if (fs::exists(entry.path() / "meta.json", ec)) out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sumvln
