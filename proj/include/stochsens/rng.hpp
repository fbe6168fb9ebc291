#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace stochsens {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t v) noexcept {
  return splitmix64(v);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Reproducible random stream addressed by (seed, stream_id).
///
/// The generator is xoshiro256** whose 256-bit state is derived by hashing
/// the address, so any number of streams can be created independently (no
/// shared state, no sequential jump-ahead) and a stream can be re-created
/// bit-for-bit from its address alone. Child streams are addressed by
/// hashing the parent's stream id with a child index.
///
/// Satisfies UniformRandomBitGenerator, so it also plugs into <random>.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id) {
    std::uint64_t sm = detail::mix64(seed) ^
                       detail::mix64(stream_id * 0xd1342543de82ef95ULL +
                                     0x2545f4914f6cdd1dULL);
    for (auto& word : s_) word = detail::splitmix64(sm);
    // xoshiro must not start from the all-zero state.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1).
  double uniform_pos() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Exponential with the given rate (> 0). Never returns 0, so simulated
  // jump times stay strictly increasing.
  double exponential(double rate) noexcept {
    return -std::log(uniform_pos()) / rate;
  }

  double unit_exponential() noexcept { return -std::log(uniform_pos()); }

  // Independent stream derived from this stream's address (not its state).
  RngStream child(std::uint64_t index) const noexcept {
    std::uint64_t h = detail::mix64(stream_id_ ^ 0x6a09e667f3bcc909ULL) ^
                      detail::mix64(index + 0xbb67ae8584caa73bULL);
    return RngStream(seed_, detail::mix64(h));
  }

  // Independent stream seeded from this stream's next outputs; advances
  // this stream.
  RngStream split() noexcept {
    const std::uint64_t a = (*this)();
    const std::uint64_t b = (*this)();
    return RngStream(a, b);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  friend bool operator==(const RngStream& a, const RngStream& b) noexcept {
    return a.s_[0] == b.s_[0] && a.s_[1] == b.s_[1] && a.s_[2] == b.s_[2] &&
           a.s_[3] == b.s_[3];
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4]{};
};

}  // namespace stochsens
