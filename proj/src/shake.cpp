#include "hhefl/shake.hpp"

#include <cmath>
#include <cstring>

namespace hhefl {

namespace {

constexpr u64 kRoundConstants[24] = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL,
    0x8000000080008000ULL, 0x000000000000808bULL, 0x0000000080000001ULL,
    0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008aULL,
    0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
    0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL,
    0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
    0x000000000000800aULL, 0x800000008000000aULL, 0x8000000080008081ULL,
    0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL};

constexpr int kRotc[24] = {1,  3,  6,  10, 15, 21, 28, 36, 45, 55, 2,  14,
                           27, 41, 56, 8,  25, 43, 62, 18, 39, 61, 20, 44};

constexpr int kPiln[24] = {10, 7,  11, 17, 18, 3, 5,  16, 8,  21, 24, 4,
                           15, 23, 19, 13, 12, 2, 20, 14, 22, 9,  6,  1};

inline u64 rotl(u64 x, int n) { return (x << n) | (x >> (64 - n)); }

void keccak_f1600(std::array<u64, 25>& st) {
  for (int round = 0; round < 24; round++) {
    u64 bc[5];
    for (int i = 0; i < 5; i++)
      bc[i] = st[i] ^ st[i + 5] ^ st[i + 10] ^ st[i + 15] ^ st[i + 20];
    for (int i = 0; i < 5; i++) {
      u64 t = bc[(i + 4) % 5] ^ rotl(bc[(i + 1) % 5], 1);
      for (int j = 0; j < 25; j += 5) st[j + i] ^= t;
    }
    u64 t = st[1];
    for (int i = 0; i < 24; i++) {
      int j = kPiln[i];
      u64 tmp = st[j];
      st[j] = rotl(t, kRotc[i]);
      t = tmp;
    }
    for (int j = 0; j < 25; j += 5) {
      for (int i = 0; i < 5; i++) bc[i] = st[j + i];
      for (int i = 0; i < 5; i++) st[j + i] ^= (~bc[(i + 1) % 5]) & bc[(i + 2) % 5];
    }
    st[0] ^= kRoundConstants[round];
  }
}

}  // namespace

Shake::Shake(Kind kind) : rate_(kind == Kind::Shake128 ? 168 : 136) {}

void Shake::permute() { keccak_f1600(state_); }

void Shake::absorb(const void* data, std::size_t len) {
  if (squeezing_) throw HheError("Shake: absorb after squeeze");
  const u8* p = static_cast<const u8*>(data);
  u8* st = reinterpret_cast<u8*>(state_.data());
  while (len > 0) {
    std::size_t n = std::min(len, rate_ - pos_);
    for (std::size_t i = 0; i < n; i++) st[pos_ + i] ^= p[i];
    pos_ += n;
    p += n;
    len -= n;
    if (pos_ == rate_) {
      permute();
      pos_ = 0;
    }
  }
}

void Shake::absorb_u64(u64 v) {
  u8 b[8];
  for (int i = 0; i < 8; i++) b[i] = static_cast<u8>(v >> (8 * i));
  absorb(b, 8);
}

void Shake::squeeze(void* out, std::size_t len) {
  u8* st = reinterpret_cast<u8*>(state_.data());
  if (!squeezing_) {
    st[pos_] ^= 0x1f;  // SHAKE domain separation + pad10*1
    st[rate_ - 1] ^= 0x80;
    permute();
    pos_ = 0;
    squeezing_ = true;
  }
  u8* p = static_cast<u8*>(out);
  while (len > 0) {
    if (pos_ == rate_) {
      permute();
      pos_ = 0;
    }
    std::size_t n = std::min(len, rate_ - pos_);
    std::memcpy(p, st + pos_, n);
    pos_ += n;
    p += n;
    len -= n;
  }
}

u8 Shake::squeeze_u8() {
  u8 v;
  squeeze(&v, 1);
  return v;
}

u64 Shake::squeeze_u64() {
  u8 b[8];
  squeeze(b, 8);
  u64 v = 0;
  for (int i = 0; i < 8; i++) v |= static_cast<u64>(b[i]) << (8 * i);
  return v;
}

u64 Shake::squeeze_bits(int bits) {
  while (bit_count_ < bits) {
    bit_buf_ |= static_cast<u64>(squeeze_u8()) << bit_count_;
    bit_count_ += 8;
  }
  u64 v = bit_buf_ & ((u64{1} << bits) - 1);
  bit_buf_ >>= bits;
  bit_count_ -= bits;
  return v;
}

SeedRng::SeedRng(const std::array<u8, 32>& seed, const std::string& domain, u64 stream)
    : xof_(Shake::Kind::Shake256) {
  // Derive a path-specific seed so forks of forks never collide.
  Shake d(Shake::Kind::Shake256);
  d.absorb(seed.data(), seed.size());
  d.absorb(domain);
  d.absorb_u64(stream);
  d.squeeze(seed_.data(), seed_.size());
  xof_.absorb(seed_.data(), seed_.size());
}

std::array<u8, 32> SeedRng::expand_seed(u64 seed) {
  Shake x(Shake::Kind::Shake256);
  x.absorb("hhefl-seed");
  x.absorb_u64(seed);
  std::array<u8, 32> out{};
  x.squeeze(out.data(), out.size());
  return out;
}

u64 SeedRng::next_u64() { return xof_.squeeze_u64(); }

u64 SeedRng::uniform(u64 bound) {
  if (bound == 0) throw ParameterError("uniform: zero bound");
  if ((bound & (bound - 1)) == 0) return next_u64() & (bound - 1);
  u64 limit = ~u64{0} - (~u64{0} % bound + 1) % bound;
  for (;;) {
    u64 v = next_u64();
    if (v <= limit) return v % bound;
  }
}

double SeedRng::uniform_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeedRng::normal(double mean, double stddev) {
  if (have_gauss_) {
    have_gauss_ = false;
    return mean + stddev * gauss_;
  }
  double u1, u2, s;
  do {
    u1 = 2.0 * uniform_real() - 1.0;
    u2 = 2.0 * uniform_real() - 1.0;
    s = u1 * u1 + u2 * u2;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  gauss_ = u2 * f;
  have_gauss_ = true;
  return mean + stddev * u1 * f;
}

void SeedRng::fill(void* out, std::size_t len) { xof_.squeeze(out, len); }

SeedRng SeedRng::fork(const std::string& domain, u64 stream) const {
  return SeedRng(seed_, domain, stream);
}

}  // namespace hhefl
