#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sumvln/geometry.hpp"

namespace sumvln {

using Bytes = std::vector<std::uint8_t>;

// 8-bit RGB PNG. Encoding is deterministic for a given image.
Bytes encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> data);

std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

// Whole-file helpers; both throw IoFailure.
Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);

/// 64-bit FNV-1a; used to derive per-episode seeds from string ids.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Current UTC time as ISO-8601 (second resolution). Honors SOURCE_DATE_EPOCH.
std::string utc_timestamp_now();

}  // namespace sumvln
