#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

#include <Eigen/Dense>

namespace nngpw {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The output is a pure function of (key, counter), so a stream can be
/// reproduced from its key alone, independent of how work is scheduled.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  explicit Philox4x32(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (index_ == 4) {
      block_ = generate(key_, counter_++);
      index_ = 0;
    }
    return block_[index_++];
  }

  static std::array<std::uint32_t, 4> generate(std::uint64_t key, std::uint64_t counter) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(counter),
                                     static_cast<std::uint32_t>(counter >> 32), 0u, 0u};
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
      k0 += kW0;
      k1 += kW1;
    }
    return ctr;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int index_ = 4;
};

/// Random source with uniform and Box-Muller Gaussian draws.
///
/// Gaussian variates are produced by our own Box-Muller transform rather
/// than std::normal_distribution, whose algorithm is implementation defined.
class Rng {
 public:
  using result_type = std::uint32_t;

  explicit Rng(std::uint64_t key) : engine_(key) {}

  static constexpr result_type min() { return Philox4x32::min(); }
  static constexpr result_type max() { return Philox4x32::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = engine_() >> 5;  // 27 bits
    const std::uint64_t lo = engine_() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound));
  }

  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal();
  }

 private:
  Philox4x32 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001B3ull;
  }
  return hash;
}

}  // namespace detail

/// A named, splittable seed. Children are derived by hashing, so the
/// stream for ("params", layer 3) does not depend on which other streams
/// were used before it.
class SeedStream {
 public:
  explicit constexpr SeedStream(std::uint64_t seed) : key_(detail::splitmix64(seed)) {}

  [[nodiscard]] constexpr SeedStream child(std::uint64_t tag) const {
    return SeedStream(key_ ^ detail::splitmix64(tag + 0x632BE59BD9B4E019ull), Raw{});
  }
  [[nodiscard]] constexpr SeedStream child(std::string_view name) const {
    return child(detail::fnv1a(name));
  }

  [[nodiscard]] Rng rng() const { return Rng(key_); }
  [[nodiscard]] constexpr std::uint64_t key() const { return key_; }

  friend constexpr bool operator==(const SeedStream&, const SeedStream&) = default;

 private:
  struct Raw {};
  constexpr SeedStream(std::uint64_t mixed, Raw) : key_(detail::splitmix64(mixed)) {}
  std::uint64_t key_;
};

}  // namespace nngpw
