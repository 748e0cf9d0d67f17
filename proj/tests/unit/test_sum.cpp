#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "stub_server.hpp"
#include "sumvln/error.hpp"
#include "sumvln/rng.hpp"
#include "sumvln/sum.hpp"

using namespace sumvln;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Rgb kRed{255, 0, 0};
constexpr Rgb kBlue{0, 0, 255};

template <class F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::ParseFailure;
}

std::vector<Frame> blank_frames(std::size_t n) {
  std::vector<Frame> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].step_index = int(i);
  return out;
}

std::uint32_t u32_at(const Bytes& b, std::size_t off) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + off, 4);
  return v;
}

void put_u32(Bytes& b, std::size_t off, std::uint32_t v) { std::memcpy(b.data() + off, &v, 4); }

// Splits a GLB into its JSON document and BIN payload.
std::pair<nlohmann::json, Bytes> split_glb(const Bytes& glb) {
  const std::uint32_t json_len = u32_at(glb, 12);
  const std::string text(glb.begin() + 20, glb.begin() + 20 + json_len);
  Bytes bin;
  const std::size_t bin_at = 20 + json_len;
  if (bin_at + 8 <= glb.size()) {
    const std::uint32_t bin_len = u32_at(glb, bin_at);
    bin.assign(glb.begin() + std::ptrdiff_t(bin_at + 8), glb.begin() + std::ptrdiff_t(bin_at + 8 + bin_len));
  }
  return {nlohmann::json::parse(text), bin};
}

// Assembles a GLB container by hand from a document and payload.
Bytes assemble_glb(const nlohmann::json& doc, const Bytes& bin) {
  std::string text = doc.dump();
  while (text.size() % 4) text.push_back(' ');
  Bytes payload = bin;
  while (payload.size() % 4) payload.push_back(0);
  Bytes out(12);
  auto chunk = [&](std::uint32_t type, const std::uint8_t* data, std::size_t n) {
    const std::size_t at = out.size();
    out.resize(at + 8);
    put_u32(out, at, std::uint32_t(n));
    put_u32(out, at + 4, type);
    out.insert(out.end(), data, data + n);
  };
  chunk(kGlbJsonChunk, reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
  chunk(kGlbBinChunk, payload.data(), payload.size());
  put_u32(out, 0, kGlbMagic);
  put_u32(out, 4, 2);
  put_u32(out, 8, std::uint32_t(out.size()));
  return out;
}

Reconstruction three_points() {
  Reconstruction r;
  r.cloud.push_back({1.0, 2.0, 3.0}, {10, 20, 30});
  r.cloud.push_back({-0.5, 0.25, 1.75}, {255, 0, 128});
  r.cloud.push_back({0.1f, -7.3f, 0.0}, {0, 0, 0});
  return r;
}

// Samples the side surface of a vertical cylinder with roughly `spacing` m
// between neighbouring points.
void add_cylinder(PointCloud& cloud, Eigen::Vector2d c, double r, double h, Rgb color, double spacing) {
  const int around = int(std::ceil(2 * kPi * r / spacing));
  const int up = int(std::ceil(h / spacing));
  for (int i = 0; i < around; ++i) {
    const double a = 2 * kPi * i / around;
    for (int j = 0; j <= up; ++j) cloud.push_back({c.x() + r * std::cos(a), c.y() + r * std::sin(a), h * j / up}, color);
  }
}

bool has_color(const Image& img, Rgb c, int u0 = 0, int u1 = -1) {
  if (u1 < 0) u1 = img.width;
  for (int v = 0; v < img.height; ++v)
    for (int u = u0; u < u1; ++u)
      if (img.at(u, v) == c) return true;
  return false;
}

}  // namespace

TEST_CASE("sample_indices examples") {
  CHECK(sample_indices(28, 10) == std::vector<std::size_t>{0, 3, 6, 9, 12, 15, 18, 21, 24, 27});
  CHECK(sample_indices(5, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(sample_indices(10, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(code_of([] { sample_indices(0, 10); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { sample_indices(5, 1); }) == ErrorCode::QTooSmall);

  const auto frames = blank_frames(28);
  const auto picked = sample_frames(frames, 10);
  REQUIRE(picked.size() == 10);
  CHECK(picked[1].step_index == 3);
  CHECK(picked.back().step_index == 27);
}

TEST_CASE("sample_indices matches the equal-spacing oracle and its properties") {
  for (std::size_t n = 1; n <= 120; ++n) {
    for (std::size_t q = 2; q <= 25; ++q) {
      const auto got = sample_indices(n, q);
      INFO("n=", n, " q=", q);
      CHECK(got == oracle::equal_spacing(n, q));
      CHECK(std::is_sorted(got.begin(), got.end()));
      CHECK(std::set<std::size_t>(got.begin(), got.end()).size() == got.size());
      CHECK(got.front() == 0);
      CHECK(got.back() == n - 1);
      if (got.size() >= 2) {
        std::size_t lo = n, hi = 0;
        for (std::size_t i = 1; i < got.size(); ++i) {
          lo = std::min(lo, got[i] - got[i - 1]);
          hi = std::max(hi, got[i] - got[i - 1]);
        }
        CHECK(hi - lo <= 1);
      }
    }
  }
}

TEST_CASE("glb round trip") {
  SUBCASE("three points") {
    Reconstruction r = three_points();
    r.frame_poses = {CameraPose{{1, 2, 0.38}, 0.5, 0.0}};
    r.source_frame_ids = {4};
    const Bytes glb = write_glb(r);
    CHECK(u32_at(glb, 0) == kGlbMagic);
    CHECK(u32_at(glb, 4) == 2);
    CHECK(u32_at(glb, 8) == glb.size());
    const auto [doc, bin] = split_glb(glb);
    CHECK(u32_at(glb, 12) % 4 == 0);
    CHECK(bin.size() % 4 == 0);
    const auto& prim = doc["meshes"][0]["primitives"][0];
    CHECK(prim["mode"] == 0);
    CHECK(doc["accessors"][prim["attributes"]["POSITION"].get<int>()]["componentType"] == 5126);
    CHECK(doc["accessors"][prim["attributes"]["COLOR_0"].get<int>()]["normalized"] == true);

    const Reconstruction back = read_glb(glb);
    REQUIRE(back.cloud.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      for (int a = 0; a < 3; ++a) CHECK(back.cloud.points[i][a] == double(float(r.cloud.points[i][a])));
      CHECK(back.cloud.colors[i] == r.cloud.colors[i]);
    }
    CHECK(back.source_frame_ids == r.source_frame_ids);
    CHECK(back.frame_poses.size() == 1);
  }

  SUBCASE("empty cloud") {
    const Bytes glb = write_glb(Reconstruction{});
    CHECK(u32_at(glb, 8) == glb.size());
    const auto [doc, bin] = split_glb(glb);
    CHECK(doc["accessors"][0]["count"] == 0);
    CHECK(read_glb(glb).cloud.empty());
  }

  SUBCASE("random clouds") {
    Rng rng(12);
    for (int t = 0; t < 30; ++t) {
      Reconstruction r;
      const std::size_t n = rng.below(500);
      for (std::size_t i = 0; i < n; ++i) {
        r.cloud.push_back({float(rng.uniform(-20, 20)), float(rng.uniform(-20, 20)), float(rng.uniform(-1, 5))},
                          {std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256))});
      }
      const Bytes glb = write_glb(r);
      CHECK(u32_at(glb, 8) == glb.size());
      const Reconstruction back = read_glb(glb);
      CHECK(back.cloud.points == r.cloud.points);
      CHECK(back.cloud.colors == r.cloud.colors);
    }
  }

  SUBCASE("positions are stored Y-up") {
    Reconstruction r;
    r.cloud.push_back({1, 2, 3}, kRed);
    const auto [doc, bin] = split_glb(write_glb(r));
    float g[3];
    std::memcpy(g, bin.data(), 12);
    CHECK(g[0] == 1.0f);
    CHECK(g[1] == 3.0f);
    CHECK(g[2] == -2.0f);
  }
}

TEST_CASE("glb errors") {
  const Bytes good = write_glb(three_points());

  Bytes bad = good;
  bad[0] ^= 0xff;
  CHECK(code_of([&] { read_glb(bad); }) == ErrorCode::BadMagic);

  bad = good;
  put_u32(bad, 4, 1);
  CHECK(code_of([&] { read_glb(bad); }) == ErrorCode::UnsupportedVersion);

  const Bytes truncated(good.begin(), good.end() - 4);
  CHECK(code_of([&] { read_glb(truncated); }) == ErrorCode::ChunkLengthMismatch);
  CHECK(code_of([&] { read_glb(Bytes(good.begin(), good.begin() + 8)); }) == ErrorCode::ChunkLengthMismatch);

  auto [doc, bin] = split_glb(good);
  CHECK(read_glb(assemble_glb(doc, bin)).cloud.size() == 3);
  doc["meshes"][0]["primitives"][0]["attributes"].erase("POSITION");
  CHECK(code_of([&] { read_glb(assemble_glb(doc, bin)); }) == ErrorCode::MissingPositionAccessor);
}

TEST_CASE("glb without colors reads as grey points") {
  auto [doc, bin] = split_glb(write_glb(three_points()));
  doc["meshes"][0]["primitives"][0]["attributes"].erase("COLOR_0");
  doc.erase("extras");
  const Reconstruction r = read_glb(assemble_glb(doc, bin));
  CHECK(r.cloud.size() == 3);
  CHECK(r.frame_poses.empty());
}

TEST_CASE("posed-depth reconstruction of a wall is planar") {
  // Wall: the plane x = 5, seen from ten poses along a short path.
  const Intrinsics k = Intrinsics::from_hfov(64, 36, kPi / 2);
  std::vector<Frame> frames;
  for (int i = 0; i < 10; ++i) {
    Frame f;
    f.step_index = i;
    f.intrinsics = k;
    f.pose = CameraPose{{0.1 * i, -0.3 + 0.05 * i, 0.38}, 0.05 * (i - 5), 0.0};
    f.image = Image(k.width, k.height, {90, 90, 90});
    f.depth.assign(std::size_t(k.width * k.height), 0.0);
    const auto rot = oracle::camera_to_world(f.pose->yaw, f.pose->pitch);
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        const std::array<double, 3> ray = {(u - k.center_x) / k.focal_x, (v - k.center_y) / k.focal_y, 1.0};
        const double dx = oracle::mul(rot, ray)[0];
        if (dx > 1e-9) f.depth[std::size_t(v * k.width + u)] = (5.0 - f.pose->position.x()) / dx;
      }
    }
    frames.push_back(f);
  }
  ReconstructorConfig cfg;
  cfg.pixel_stride = 2;
  const Reconstruction r = reconstruct(frames, cfg);
  CHECK_FALSE(r.empty);
  CHECK(r.cloud.size() == 10 * 32 * 18);
  CHECK(r.source_frame_ids.size() == r.frame_poses.size());
  CHECK(oracle::plane_residual(r.cloud.points) < 1e-6);
  for (const auto& p : r.cloud.points) CHECK(std::abs(p.x() - 5.0) < 1e-6);
}

TEST_CASE("reconstruct edge cases") {
  const Intrinsics k = Intrinsics::from_hfov(16, 9, kPi / 2);
  Frame f;
  f.intrinsics = k;
  f.pose = CameraPose{};
  f.image = Image(16, 9);
  f.depth.assign(16 * 9, 0.0);
  const std::vector<Frame> zero{f};
  const Reconstruction r = reconstruct(zero, {});
  CHECK(r.empty);
  CHECK(r.cloud.empty());

  f.depth.clear();
  const std::vector<Frame> depthless{f};
  CHECK(code_of([&] { reconstruct(depthless, {}); }) == ErrorCode::MissingDepth);
  CHECK(code_of([&] { reconstruct({}, {}); }) == ErrorCode::EmptyInput);

  ReconstructorConfig bad;
  bad.backend = ReconstructionBackend::external;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad.backend = ReconstructionBackend::posed_depth;
  bad.external_endpoint = "http://127.0.0.1:1";
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("external reconstruction backend") {
  Frame f;
  f.intrinsics = Intrinsics::from_hfov(8, 4, kPi / 2);
  f.image = Image(8, 4, kRed);
  const std::vector<Frame> frames{f, f};

  SUBCASE("stub returns a single point") {
    Reconstruction one;
    one.cloud.push_back({1.5, -2.0, 0.5}, kBlue);
    testing::StubServer stub;
    stub.serve_reconstruction(write_glb(one));
    stub.start();
    ReconstructorConfig cfg;
    cfg.backend = ReconstructionBackend::external;
    cfg.external_endpoint = stub.url();
    cfg.hyper_params = {{"conf_threshold", 0.5}};
    const Reconstruction r = reconstruct(frames, cfg);
    REQUIRE(r.cloud.size() == 1);
    CHECK(r.cloud.points[0] == Eigen::Vector3d(1.5, -2.0, 0.5));
    CHECK(r.cloud.colors[0] == kBlue);
    CHECK(stub.calls() == 1);
    const auto body = nlohmann::json::parse(stub.bodies().at(0));
    CHECK(body["frames"].size() == 2);
    CHECK(body["frames"][0]["pose"].is_null());
    CHECK(body["params"]["conf_threshold"] == 0.5);
    CHECK(decode_png(base64_decode(body["frames"][0]["image"].get<std::string>())) == f.image);
  }

  SUBCASE("garbage body") {
    testing::StubServer stub;
    stub.serve_fixed("/reconstruct", 200, "nope", "model/gltf-binary");
    stub.start();
    ReconstructorConfig cfg;
    cfg.backend = ReconstructionBackend::external;
    cfg.external_endpoint = stub.url();
    CHECK(code_of([&] { reconstruct(frames, cfg); }) == ErrorCode::MalformedGlb);
  }

  SUBCASE("unreachable") {
    ReconstructorConfig cfg;
    cfg.backend = ReconstructionBackend::external;
    cfg.external_endpoint = "http://127.0.0.1:" + std::to_string(testing::unused_port());
    CHECK(code_of([&] { reconstruct(frames, cfg); }) == ErrorCode::BackendUnreachable);
  }
}

TEST_CASE("render_memory") {
  MemoryRenderConfig cfg;
  cfg.created_at = "2024-01-01T00:00:00Z";

  SUBCASE("empty reconstruction") {
    const SpatialMemory m = render_memory(Reconstruction{}, cfg);
    CHECK(m.frontal == Image(640, 360, kMemoryBackground));
    CHECK(m.oblique == Image(640, 360, kMemoryBackground));
    CHECK(m.created_at == "2024-01-01T00:00:00Z");
    CHECK(m.reconstruction_digest == sha256_hex(write_glb(Reconstruction{})));
  }

  SUBCASE("size is fixed whatever the source frames") {
    Reconstruction r = three_points();
    r.intrinsics = Intrinsics::from_hfov(32, 18, 1.0);
    const SpatialMemory m = render_memory(r, cfg);
    CHECK(m.frontal.width == 640);
    CHECK(m.frontal.height == 360);
    CHECK(m.oblique.width == 640);
    CHECK(m.oblique.height == 360);
  }

  SUBCASE("a red cylinder ahead lands in the central third") {
    Reconstruction r;
    add_cylinder(r.cloud, {3.0, 0.4}, 0.25, 1.0, kRed, 0.01);
    cfg.start = {0.0, 0.0, 0.0};
    const SpatialMemory m = render_memory(r, cfg);
    CHECK(m.frontal_camera.position == Eigen::Vector3d(0, 0, 0.38));
    CHECK(has_color(m.frontal, kRed, 640 / 3, 2 * 640 / 3));

    // Every red pixel falls inside the column span predicted by the oracle.
    const auto rot = oracle::camera_to_world(0.0, 0.0);
    double umin = 1e9, umax = -1e9;
    for (const auto& p : r.cloud.points) {
      const Eigen::Vector3d d = p - m.frontal_camera.position;
      double cam[3] = {0, 0, 0};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cam[i] += rot[j][i] * d[j];
      const double u = m.intrinsics.focal_x * cam[0] / cam[2] + m.intrinsics.center_x;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
    }
    for (int v = 0; v < 360; ++v)
      for (int u = 0; u < 640; ++u)
        if (m.frontal.at(u, v) == kRed) {
          CHECK(u >= std::floor(umin + 0.5));
          CHECK(u <= std::floor(umax + 0.5));
        }
  }

  SUBCASE("near cylinder hides the far one only in the frontal view") {
    Reconstruction r;
    add_cylinder(r.cloud, {2.0, 0.0}, 0.4, 1.5, kRed, 0.003);
    add_cylinder(r.cloud, {5.0, 0.0}, 0.2, 1.0, kBlue, 0.01);
    cfg.start = {0.0, 0.0, 0.0};
    const SpatialMemory m = render_memory(r, cfg);
    CHECK(has_color(m.frontal, kRed));
    CHECK_FALSE(has_color(m.frontal, kBlue));
    CHECK(has_color(m.oblique, kRed));
    CHECK(has_color(m.oblique, kBlue));
  }

  SUBCASE("pitch ranges") {
    cfg.frontal_pitch_deg = 6;
    CHECK(code_of([&] { render_memory(Reconstruction{}, cfg); }) == ErrorCode::InvalidConfig);
    cfg.frontal_pitch_deg = 5;
    cfg.oblique_pitch_deg = 39;
    CHECK(code_of([&] { render_memory(Reconstruction{}, cfg); }) == ErrorCode::InvalidConfig);
    cfg.oblique_pitch_deg = 50;
    const SpatialMemory m = render_memory(three_points(), cfg);
    CHECK(m.frontal_pitch_deg == 5);
    CHECK(m.oblique_camera.pitch == doctest::Approx(50 * kPi / 180));
  }
}

TEST_CASE("oblique camera looks through the centroid") {
  MemoryRenderConfig cfg;
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    cfg.start = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi)};
    cfg.oblique_pitch_deg = rng.uniform(40, 50);
    const Eigen::Vector3d c(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(0, 2));
    const CameraPose pose = oblique_camera_pose(c, cfg);
    const Projection p = project_point(c, memory_intrinsics(), pose);
    CHECK(p.u == doctest::Approx(320).epsilon(1e-9));
    CHECK(p.v == doctest::Approx(180).epsilon(1e-9));
    CHECK((pose.position - c).head<2>().norm() >= cfg.min_oblique_standoff - 1e-9);
    CHECK(pose.yaw == cfg.start.heading);
  }
}

TEST_CASE("selection names") {
  for (auto s : {MemorySelection::frontal, MemorySelection::oblique, MemorySelection::hybrid, MemorySelection::none}) {
    CHECK(memory_selection_from_string(to_string(s)) == s);
  }
  CHECK(code_of([] { memory_selection_from_string("both"); }) == ErrorCode::BadArgs);
}
