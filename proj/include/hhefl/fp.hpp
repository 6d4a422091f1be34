#pragma once

#include <vector>

#include "hhefl/common.hpp"

namespace hhefl::fp {

// Prime field used by both the symmetric cipher and the BFV plaintext space.
constexpr u64 kPrime = 65537;  // 2^16 + 1

inline u64 add(u64 a, u64 b) {
  u64 s = a + b;
  return s >= kPrime ? s - kPrime : s;
}

inline u64 sub(u64 a, u64 b) { return a >= b ? a - b : a + kPrime - b; }

inline u64 neg(u64 a) { return a == 0 ? 0 : kPrime - a; }

inline u64 mul(u64 a, u64 b) { return (a * b) % kPrime; }

inline u64 pow(u64 base, u64 exp) {
  u64 r = 1;
  base %= kPrime;
  while (exp) {
    if (exp & 1) r = mul(r, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return r;
}

inline u64 inv(u64 a) {
  if (a == 0) throw ParameterError("fp::inv of zero");
  return pow(a, kPrime - 2);
}

// Slot payloads everywhere are plain vectors of reduced field elements.
using SlotVector = std::vector<u64>;

}  // namespace hhefl::fp
