#include <atomic>
#include <filesystem>
#include <thread>

#include "doctest.h"
#include "sumvln/error.hpp"
#include "sumvln/memory_bank.hpp"
#include "temp_dir.hpp"

using namespace sumvln;
namespace fs = std::filesystem;

namespace {

SpatialMemory solid_memory(Rgb front, Rgb oblique, int w = 640, int h = 360) {
  SpatialMemory m;
  m.frontal = Image(w, h, front);
  m.oblique = Image(w, h, oblique);
  m.frontal.at(1, 2) = {1, 2, 3};
  m.oblique_pitch_deg = 45;
  m.frontal_camera = {{1, 2, 0.38}, 0.3, 0.0};
  m.oblique_camera = {{-1, 2, 3.5}, 0.3, 0.7853981633974483};
  m.intrinsics = memory_intrinsics();
  m.reconstruction_digest = std::string(64, 'a');
  m.scene_key = "forest-1";
  m.created_at = "2024-05-06T07:08:09Z";
  return m;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::ParseFailure;
}

}  // namespace

TEST_CASE("store then load") {
  testing::TempDir dir;
  const MemoryBank bank(dir.path() / "bank");
  const SpatialMemory m = solid_memory({10, 200, 30}, {40, 50, 60});
  const StoredRecord rec = bank.store("forest-1--abc", m);
  CHECK(fs::exists(dir.path() / "bank" / "forest-1--abc" / "frontal.png"));
  CHECK(fs::exists(dir.path() / "bank" / "forest-1--abc" / "oblique.png"));
  CHECK(fs::exists(dir.path() / "bank" / "forest-1--abc" / "meta.json"));
  CHECK(rec.meta["scene_key"] == "forest-1");
  CHECK(rec.meta["reconstruction_digest"] == m.reconstruction_digest);
  CHECK(rec.meta["created_at"] == "2024-05-06T07:08:09Z");
  CHECK(rec.meta["frontal_pitch"] == 0.0);
  CHECK(rec.meta["oblique_pitch"] == 45.0);

  SUBCASE("hybrid keeps frontal then oblique") {
    const MemoryLoad got = bank.load("forest-1--abc", MemorySelection::hybrid);
    CHECK(got.hit);
    REQUIRE(got.views.size() == 2);
    CHECK(got.views[0].perspective == Perspective::frontal);
    CHECK(got.views[0].image == m.frontal);
    CHECK(got.views[1].perspective == Perspective::oblique);
    CHECK(got.views[1].image == m.oblique);
    CHECK(got.views[0].camera == m.frontal_camera);
    CHECK(got.views[1].camera == m.oblique_camera);
    CHECK(got.views[1].intrinsics == m.intrinsics);
    CHECK(got.images() == std::vector<Image>{m.frontal, m.oblique});
  }

  SUBCASE("single selections") {
    const MemoryLoad o = bank.load("forest-1--abc", MemorySelection::oblique);
    REQUIRE(o.views.size() == 1);
    CHECK(o.views[0].image == m.oblique);
    const MemoryLoad f = bank.load("forest-1--abc", MemorySelection::frontal);
    REQUIRE(f.views.size() == 1);
    CHECK(f.views[0].image == m.frontal);
    const MemoryLoad n = bank.load("forest-1--abc", MemorySelection::none);
    CHECK_FALSE(n.hit);
    CHECK(n.views.empty());
  }

  SUBCASE("full record") {
    const auto back = bank.load_record("forest-1--abc");
    REQUIRE(back.has_value());
    CHECK(back->frontal == m.frontal);
    CHECK(back->oblique == m.oblique);
    CHECK(back->scene_key == m.scene_key);
    CHECK(back->reconstruction_digest == m.reconstruction_digest);
    CHECK(back->oblique_pitch_deg == 45.0);
    CHECK(back->created_at == m.created_at);
  }

  SUBCASE("overwrite replaces and leaves one record behind") {
    const SpatialMemory m2 = solid_memory({1, 1, 1}, {2, 2, 2});
    bank.store("forest-1--abc", m2);
    CHECK(bank.load("forest-1--abc", MemorySelection::frontal).views.at(0).image == m2.frontal);
    int records = 0;
    for (const auto& e : fs::directory_iterator(dir.path() / "bank" / ".records")) records += e.is_directory();
    CHECK(records == 1);
  }

  SUBCASE("listing") {
    bank.store("city-2", m);
    CHECK(bank.keys() == std::vector<std::string>{"city-2", "forest-1--abc"});
    CHECK(bank.contains("city-2"));
    CHECK_FALSE(bank.contains("city-3"));
  }
}

TEST_CASE("a missing key is a miss") {
  testing::TempDir dir;
  const MemoryBank bank(dir.path() / "nowhere");
  const MemoryLoad got = bank.load("absent", MemorySelection::hybrid);
  CHECK_FALSE(got.hit);
  CHECK(got.views.empty());
  CHECK_FALSE(bank.load_record("absent").has_value());
  CHECK(bank.keys().empty());
}

TEST_CASE("tampered images are detected") {
  testing::TempDir dir;
  const MemoryBank bank(dir.path());
  bank.store("k", solid_memory({5, 5, 5}, {6, 6, 6}));
  write_file(dir.path() / "k" / "oblique.png", encode_png(Image(640, 360, {9, 9, 9})));
  CHECK(code_of([&] { bank.load("k", MemorySelection::hybrid); }) == ErrorCode::CorruptRecord);
  CHECK(code_of([&] { bank.load("k", MemorySelection::oblique); }) == ErrorCode::CorruptRecord);
  CHECK(bank.load("k", MemorySelection::frontal).hit);

  write_text_file(dir.path() / "k" / "meta.json", "{not json");
  CHECK(code_of([&] { bank.load("k", MemorySelection::frontal); }) == ErrorCode::CorruptRecord);
}

TEST_CASE("keys") {
  CHECK(MemoryBank::make_key("forest-1", "go left", MemoryKeyMode::scene_only) == "forest-1");
  const std::string k = MemoryBank::make_key("forest-1", "go left");
  CHECK(k == "forest-1--" + sha256_hex(std::string_view("go left")).substr(0, 16));
  CHECK(k != MemoryBank::make_key("forest-1", "go right"));
  CHECK(k == MemoryBank::make_key("forest-1", "go left"));

  for (const char* bad : {"", ".hidden", "a/b", "a b", "..", "é"}) {
    CHECK(code_of([&] { MemoryBank::validate_key(bad); }) == ErrorCode::InvalidKey);
  }
  MemoryBank::validate_key("Ab0._-");
  testing::TempDir dir;
  const MemoryBank bank(dir.path());
  CHECK(code_of([&] { bank.store("../x", solid_memory({}, {})); }) == ErrorCode::InvalidKey);
}

TEST_CASE("readers never observe a torn record") {
  testing::TempDir dir;
  const MemoryBank bank(dir.path());
  const SpatialMemory a = solid_memory({200, 0, 0}, {200, 0, 0}, 64, 36);
  const SpatialMemory b = solid_memory({0, 0, 200}, {0, 0, 200}, 64, 36);
  bank.store("shared", a);

  std::atomic<bool> done{false};
  std::atomic<int> loads{0}, torn{0}, errors{0};
  auto reader = [&] {
    while (!done.load()) {
      try {
        const MemoryLoad got = bank.load("shared", MemorySelection::hybrid);
        if (!got.hit || got.views.size() != 2 || got.views[0].image.at(0, 0) != got.views[1].image.at(0, 0)) ++torn;
        ++loads;
      } catch (const Error&) {
        ++errors;
      }
    }
  };
  std::vector<std::thread> readers;
  for (int i = 0; i < 3; ++i) readers.emplace_back(reader);
  for (int i = 0; i < 60; ++i) bank.store("shared", i % 2 ? a : b);
  done = true;
  for (auto& t : readers) t.join();
  CHECK(loads.load() > 0);
  CHECK(torn.load() == 0);
  CHECK(errors.load() == 0);
}
