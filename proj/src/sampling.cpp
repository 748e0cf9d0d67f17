#include <numeric>

#include "sumvln/error.hpp"
#include "sumvln/sum.hpp"

namespace sumvln {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t q) {
  if (n == 0) {
    throw Error(ErrorCode::EmptyInput, "no frames to sample");
  }
  if (q < 2) {
    throw Error(ErrorCode::QTooSmall, "q must be >= 2, got " + std::to_string(q));
  }
  std::vector<std::size_t> out;
  if (n <= q) {
    out.resize(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  out.reserve(q);
  const std::size_t den = 2 * (q - 1);
  for (std::size_t i = 0; i < q; ++i) {
    // Exact integer form of round(i * (n - 1) / (q - 1)).
    out.push_back((2 * i * (n - 1) + (q - 1)) / den);
  }
  return out;
}

std::vector<Frame> sample_frames(std::span<const Frame> frames, std::size_t q) {
  std::vector<Frame> out;
  for (std::size_t i : sample_indices(frames.size(), q)) out.push_back(frames[i]);
  return out;
}

}  // namespace sumvln
