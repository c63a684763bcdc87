#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <Eigen/Core>

namespace isda {

/// Counter-based random stream (Philox4x32-10). The 64-bit seed is the
/// cipher key; the 64-bit stream id and a 64-bit block counter form the
/// 128-bit counter. A stream is therefore fully determined by
/// (seed, stream_id) and its position, independent of which thread runs it.
///
/// Satisfies UniformRandomBitGenerator so it can drive <random>
/// distributions, although the library itself only uses uniform() and
/// normal() to keep draws identical across standard libraries.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream keyed by (this stream id, index). Children of distinct
  /// indices, and children of distinct parents, do not overlap.
  RngStream substream(std::uint64_t index) const;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal (Box-Muller, cached pair).
  double normal();
  Eigen::VectorXd normal_vector(Eigen::Index n);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used to derive substream ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace isda
