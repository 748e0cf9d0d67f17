#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "sumvln/error.hpp"
#include "sumvln/sum.hpp"

namespace sumvln {

static_assert(std::endian::native == std::endian::little, "GLB I/O assumes a little-endian host");

namespace {

constexpr int kFloat = 5126;
constexpr int kUnsignedByte = 5121;
constexpr int kUnsignedShort = 5123;

void put_u32(Bytes& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

std::uint32_t get_u32(std::span<const std::uint8_t> data, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, data.data() + offset, 4);
  return v;
}

nlohmann::json pose_json(const CameraPose& p) {
  return {p.position.x(), p.position.y(), p.position.z(), p.yaw, p.pitch};
}

CameraPose pose_from(const nlohmann::json& j) {
  return {{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}, j.at(3).get<double>(),
          j.at(4).get<double>()};
}

struct AccessorView {
  const std::uint8_t* base = nullptr;
  std::size_t count = 0;
  std::size_t stride = 0;
  int component_type = 0;
  int components = 0;
  bool normalized = false;
};

int component_size(int type) {
  switch (type) {
    case kFloat: return 4;
    case kUnsignedShort: return 2;
    case kUnsignedByte: return 1;
    default: return 0;
  }
}

AccessorView view_accessor(const nlohmann::json& doc, std::size_t index, std::span<const std::uint8_t> bin) {
  const auto& accessors = doc.at("accessors");
  if (index >= accessors.size()) throw Error(ErrorCode::MalformedGlb, "accessor index out of range");
  const auto& acc = accessors.at(index);
  AccessorView v;
  v.count = acc.at("count").get<std::size_t>();
  v.component_type = acc.at("componentType").get<int>();
  v.normalized = acc.value("normalized", false);
  const std::string type = acc.at("type").get<std::string>();
  v.components = type == "VEC3" ? 3 : type == "VEC4" ? 4 : type == "VEC2" ? 2 : type == "SCALAR" ? 1 : 0;
  const int csize = component_size(v.component_type);
  if (v.components == 0 || csize == 0) throw Error(ErrorCode::MalformedGlb, "unsupported accessor layout " + type);
  const std::size_t elem = std::size_t(csize) * std::size_t(v.components);
  if (v.count == 0) {
    v.stride = elem;
    return v;
  }
  if (!acc.contains("bufferView")) throw Error(ErrorCode::MalformedGlb, "sparse/implicit accessors unsupported");
  const auto& bv = doc.at("bufferViews").at(acc.at("bufferView").get<std::size_t>());
  if (bv.value("buffer", 0) != 0) throw Error(ErrorCode::MalformedGlb, "only the embedded buffer is supported");
  const std::size_t bv_offset = bv.value("byteOffset", std::size_t{0});
  const std::size_t bv_length = bv.at("byteLength").get<std::size_t>();
  const std::size_t acc_offset = acc.value("byteOffset", std::size_t{0});
  v.stride = bv.value("byteStride", elem);
  if (v.stride < elem) throw Error(ErrorCode::MalformedGlb, "byteStride smaller than element");
  const std::size_t needed = acc_offset + (v.count - 1) * v.stride + elem;
  if (bv_offset + bv_length > bin.size() || needed > bv_length) {
    throw Error(ErrorCode::MalformedGlb, "accessor exceeds its buffer view");
  }
  v.base = bin.data() + bv_offset + acc_offset;
  return v;
}

double read_component(const std::uint8_t* p, int type) {
  switch (type) {
    case kFloat: {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    case kUnsignedShort: {
      std::uint16_t s;
      std::memcpy(&s, p, 2);
      return s;
    }
    default: return *p;
  }
}

std::uint8_t to_channel(double value, int type) {
  switch (type) {
    case kUnsignedByte: return static_cast<std::uint8_t>(value);
    case kUnsignedShort: return static_cast<std::uint8_t>(std::lround(value / 257.0));
    default: return static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
  }
}

}  // namespace

Bytes write_glb(const Reconstruction& r) {
  if (r.cloud.points.size() != r.cloud.colors.size()) {
    throw Error(ErrorCode::MalformedGlb, "point and color counts differ");
  }
  const std::size_t n = r.cloud.size();

  Bytes bin;
  bin.reserve(16 * n);
  float lo[3] = {std::numeric_limits<float>::max(), std::numeric_limits<float>::max(), std::numeric_limits<float>::max()};
  float hi[3] = {-lo[0], -lo[1], -lo[2]};
  for (const auto& p : r.cloud.points) {
    const float g[3] = {static_cast<float>(p.x()), static_cast<float>(p.z()), -static_cast<float>(p.y())};
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], g[i]);
      hi[i] = std::max(hi[i], g[i]);
    }
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(g);
    bin.insert(bin.end(), bytes, bytes + 12);
  }
  for (const Rgb& c : r.cloud.colors) {
    bin.insert(bin.end(), {c.r, c.g, c.b, std::uint8_t{255}});
  }

  nlohmann::json doc;
  doc["asset"] = {{"version", "2.0"}, {"generator", "sumvln"}};
  doc["scene"] = 0;
  using nlohmann::json;
  doc["scenes"] = json::array({json{{"nodes", json::array({0})}}});
  doc["nodes"] = json::array({json{{"mesh", 0}}});
  json attributes = json::object();
  attributes["POSITION"] = 0;
  attributes["COLOR_0"] = 1;
  json primitive = json::object();
  primitive["attributes"] = attributes;
  primitive["mode"] = 0;
  doc["meshes"] = json::array({json{{"primitives", json::array({primitive})}}});
  nlohmann::json pos_acc = {{"bufferView", 0}, {"componentType", kFloat}, {"count", n}, {"type", "VEC3"}};
  if (n > 0) {
    pos_acc["min"] = {lo[0], lo[1], lo[2]};
    pos_acc["max"] = {hi[0], hi[1], hi[2]};
  }
  json color_acc = {{"bufferView", 1}, {"componentType", kUnsignedByte}, {"normalized", true}, {"count", n},
                    {"type", "VEC4"}};
  doc["accessors"] = json::array({pos_acc, color_acc});
  doc["bufferViews"] = json::array({json{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", 12 * n}},
                                    json{{"buffer", 0}, {"byteOffset", 12 * n}, {"byteLength", 4 * n}}});
  doc["buffers"] = json::array({json{{"byteLength", bin.size()}}});

  nlohmann::json extras;
  auto& poses = extras["frame_poses"] = nlohmann::json::array();
  for (const auto& p : r.frame_poses) poses.push_back(pose_json(p));
  extras["source_frame_ids"] = r.source_frame_ids;
  extras["intrinsics"] = {r.intrinsics.focal_x, r.intrinsics.focal_y, r.intrinsics.center_x,
                          r.intrinsics.center_y, r.intrinsics.width,   r.intrinsics.height};
  extras["empty"] = r.empty;
  doc["extras"] = {{"sumvln", extras}};

  std::string json_text = doc.dump();
  while (json_text.size() % 4 != 0) json_text.push_back(' ');
  while (bin.size() % 4 != 0) bin.push_back(0);

  Bytes out;
  const std::size_t total = 12 + 8 + json_text.size() + 8 + bin.size();
  out.reserve(total);
  put_u32(out, kGlbMagic);
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(total));
  put_u32(out, static_cast<std::uint32_t>(json_text.size()));
  put_u32(out, kGlbJsonChunk);
  out.insert(out.end(), json_text.begin(), json_text.end());
  put_u32(out, static_cast<std::uint32_t>(bin.size()));
  put_u32(out, kGlbBinChunk);
  out.insert(out.end(), bin.begin(), bin.end());
  return out;
}

Reconstruction read_glb(std::span<const std::uint8_t> data) {
  if (data.size() < 12) {
    throw Error(ErrorCode::ChunkLengthMismatch, "GLB shorter than its 12-byte header");
  }
  if (get_u32(data, 0) != kGlbMagic) throw Error(ErrorCode::BadMagic, "not a binary glTF file");
  if (const auto version = get_u32(data, 4); version != 2) {
    throw Error(ErrorCode::UnsupportedVersion, "GLB version " + std::to_string(version));
  }
  if (get_u32(data, 8) != data.size()) {
    throw Error(ErrorCode::ChunkLengthMismatch, "header length " + std::to_string(get_u32(data, 8)) +
                                                    " != actual " + std::to_string(data.size()));
  }

  std::span<const std::uint8_t> json_chunk, bin_chunk;
  bool have_json = false;
  std::size_t offset = 12;
  while (offset < data.size()) {
    if (data.size() - offset < 8) throw Error(ErrorCode::ChunkLengthMismatch, "truncated chunk header");
    const std::uint32_t len = get_u32(data, offset);
    const std::uint32_t type = get_u32(data, offset + 4);
    if (len % 4 != 0) throw Error(ErrorCode::ChunkLengthMismatch, "chunk length not 4-byte aligned");
    if (len > data.size() - offset - 8) throw Error(ErrorCode::ChunkLengthMismatch, "chunk exceeds file");
    const auto body = data.subspan(offset + 8, len);
    if (!have_json) {
      if (type != kGlbJsonChunk) throw Error(ErrorCode::MalformedGlb, "first chunk is not JSON");
      json_chunk = body;
      have_json = true;
    } else if (type == kGlbBinChunk && bin_chunk.empty()) {
      bin_chunk = body;
    }
    offset += 8 + len;
  }
  if (!have_json) throw Error(ErrorCode::MalformedGlb, "missing JSON chunk");

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_chunk.begin(), json_chunk.end());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::MalformedGlb, std::string("JSON chunk: ") + ex.what());
  }

  Reconstruction r;
  try {
    std::vector<const nlohmann::json*> prims;
    std::vector<const nlohmann::json*> point_prims;
    const nlohmann::json none = nlohmann::json::array();
    const auto& meshes = doc.contains("meshes") ? doc.at("meshes") : none;
    for (const auto& mesh : meshes) {
      const auto& primitives = mesh.contains("primitives") ? mesh.at("primitives") : none;
      for (const auto& prim : primitives) {
        if (!prim.contains("attributes") || !prim["attributes"].contains("POSITION")) continue;
        prims.push_back(&prim);
        if (prim.value("mode", 4) == 0) point_prims.push_back(&prim);
      }
    }
    // Prefer point primitives; fall back to the vertices of any geometry.
    const auto& chosen = point_prims.empty() ? prims : point_prims;
    if (chosen.empty()) throw Error(ErrorCode::MissingPositionAccessor, "no primitive with POSITION");

    for (const nlohmann::json* prim : chosen) {
      const auto& attrs = prim->at("attributes");
      const AccessorView pos = view_accessor(doc, attrs.at("POSITION").get<std::size_t>(), bin_chunk);
      if (pos.component_type != kFloat || pos.components != 3) {
        throw Error(ErrorCode::MalformedGlb, "POSITION must be float32 VEC3");
      }
      std::optional<AccessorView> col;
      if (attrs.contains("COLOR_0")) {
        col = view_accessor(doc, attrs.at("COLOR_0").get<std::size_t>(), bin_chunk);
        if (col->count != pos.count || col->components < 3) {
          throw Error(ErrorCode::MalformedGlb, "COLOR_0 does not match POSITION");
        }
      }
      r.cloud.reserve(r.cloud.size() + pos.count);
      for (std::size_t i = 0; i < pos.count; ++i) {
        float g[3];
        std::memcpy(g, pos.base + i * pos.stride, 12);
        Rgb c{200, 200, 200};
        if (col) {
          const std::uint8_t* p = col->base + i * col->stride;
          const int cs = component_size(col->component_type);
          c = {to_channel(read_component(p, col->component_type), col->component_type),
               to_channel(read_component(p + cs, col->component_type), col->component_type),
               to_channel(read_component(p + 2 * cs, col->component_type), col->component_type)};
        }
        r.cloud.push_back({double(g[0]), -double(g[2]), double(g[1])}, c);
      }
    }

    if (doc.contains("extras") && doc["extras"].contains("sumvln")) {
      const auto& ex = doc["extras"]["sumvln"];
      for (const auto& p : ex.value("frame_poses", nlohmann::json::array())) r.frame_poses.push_back(pose_from(p));
      r.source_frame_ids = ex.value("source_frame_ids", std::vector<int>{});
      if (ex.contains("intrinsics")) {
        const auto& k = ex["intrinsics"];
        r.intrinsics = {k.at(0).get<double>(), k.at(1).get<double>(), k.at(2).get<double>(),
                        k.at(3).get<double>(), k.at(4).get<int>(),    k.at(5).get<int>()};
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::MalformedGlb, std::string("glTF document: ") + ex.what());
  }
  r.empty = r.cloud.empty();
  return r;
}

}  // namespace sumvln
