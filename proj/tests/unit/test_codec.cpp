#include <cstdlib>

#include "doctest.h"
#include "sumvln/codec.hpp"
#include "sumvln/error.hpp"
#include "sumvln/rng.hpp"
#include "temp_dir.hpp"

using namespace sumvln;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (auto& p : img.pixels) p = {std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256))};
  return img;
}

Bytes as_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST_CASE("png round trip") {
  for (auto [w, h] : {std::pair{1, 1}, {7, 3}, {640, 360}}) {
    const Image img = noise_image(w, h, std::uint64_t(w * 1000 + h));
    const Bytes png = encode_png(img);
    CHECK(png.size() > 8);
    CHECK(png[1] == 'P');
    CHECK(decode_png(png) == img);
    CHECK(encode_png(img) == png);
  }
  const Bytes junk = as_bytes("not a png at all");
  try {
    decode_png(junk);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseFailure);
  }
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const Bytes b = as_bytes("abc");
  CHECK(sha256_hex(b) == sha256_hex(std::string_view("abc")));
}

TEST_CASE("base64") {
  const std::pair<std::string_view, std::string_view> vectors[] = {
      {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},        {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
  };
  for (auto [plain, enc] : vectors) {
    CHECK(base64_encode(as_bytes(plain)) == enc);
    CHECK(base64_decode(enc) == as_bytes(plain));
  }
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    Bytes data(rng.below(100));
    for (auto& c : data) c = std::uint8_t(rng.below(256));
    CHECK(base64_decode(base64_encode(data)) == data);
  }
  CHECK_THROWS_AS(base64_decode("abc"), Error);
  CHECK_THROWS_AS(base64_decode("ab!="), Error);
}

TEST_CASE("fnv1a64") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("file helpers") {
  testing::TempDir dir;
  const Bytes data = as_bytes("hello\nworld");
  write_file(dir / "a.bin", data);
  CHECK(read_file(dir / "a.bin") == data);
  write_file_atomic(dir / "a.bin", as_bytes("x"));
  CHECK(read_text_file(dir / "a.bin") == "x");
  write_text_file(dir / "t.txt", "text");
  CHECK(read_text_file(dir / "t.txt") == "text");
  try {
    read_file(dir / "missing");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
}

TEST_CASE("timestamp honours SOURCE_DATE_EPOCH") {
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  CHECK(utc_timestamp_now() == "2023-11-14T22:13:20Z");
  ::unsetenv("SOURCE_DATE_EPOCH");
  CHECK(utc_timestamp_now().size() == 20);
}
