#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "hhefl/common.hpp"

namespace hhefl {

// Keccak sponge in XOF mode (FIPS 202 SHAKE). Absorb everything first,
// then squeeze an unbounded stream.
class Shake {
 public:
  enum class Kind { Shake128, Shake256 };

  explicit Shake(Kind kind);

  void absorb(const void* data, std::size_t len);
  void absorb(const std::vector<u8>& v) { absorb(v.data(), v.size()); }
  void absorb(const std::string& s) { absorb(s.data(), s.size()); }
  void absorb_u64(u64 v);

  // First call finalizes the absorb phase.
  void squeeze(void* out, std::size_t len);
  u8 squeeze_u8();
  u64 squeeze_u64();

  // Draws `bits` (<= 57) from the squeezed stream, LSB-first.
  u64 squeeze_bits(int bits);

 private:
  void permute();
  std::array<u64, 25> state_{};
  std::size_t rate_;
  std::size_t pos_ = 0;
  bool squeezing_ = false;
  u64 bit_buf_ = 0;
  int bit_count_ = 0;
};

// Deterministic expandable generator: every random draw in the toolkit is
// keyed by (256-bit seed, domain string, stream index) so runs reproduce.
class SeedRng {
 public:
  SeedRng(const std::array<u8, 32>& seed, const std::string& domain, u64 stream = 0);

  // Convenience: build a 256-bit seed from a 64-bit integer.
  static std::array<u8, 32> expand_seed(u64 seed);

  u64 next_u64();
  // Uniform in [0, bound) by rejection.
  u64 uniform(u64 bound);
  double uniform_real();                  // [0, 1)
  double normal(double mean, double stddev);
  void fill(void* out, std::size_t len);
  SeedRng fork(const std::string& domain, u64 stream = 0) const;

 private:
  Shake xof_;
  std::array<u8, 32> seed_;
  bool have_gauss_ = false;
  double gauss_ = 0.0;
};

}  // namespace hhefl
