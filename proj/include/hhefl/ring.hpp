#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hhefl/common.hpp"
#include "hhefl/fp.hpp"

namespace hhefl {

// Word-sized prime modulus with Barrett state for 128-bit reduction.
class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(u64 q);

  u64 value() const { return q_; }
  int bits() const { return bits_; }

  u64 reduce(u128 x) const {
    u64 x0 = static_cast<u64>(x);
    u64 x1 = static_cast<u64>(x >> 64);
    u64 carry = static_cast<u64>((static_cast<u128>(x0) * ratio_lo_) >> 64);
    u128 m2 = static_cast<u128>(x0) * ratio_hi_;
    u128 m3 = static_cast<u128>(x1) * ratio_lo_;
    u128 mid = static_cast<u128>(carry) + static_cast<u64>(m2) + static_cast<u64>(m3);
    u64 q_hat = x1 * ratio_hi_ + static_cast<u64>(m2 >> 64) +
                static_cast<u64>(m3 >> 64) + static_cast<u64>(mid >> 64);
    u64 r = x0 - q_hat * q_;
    while (r >= q_) r -= q_;
    return r;
  }
  u64 reduce(u64 x) const { return x >= q_ ? reduce(static_cast<u128>(x)) : x; }
  u64 mul(u64 a, u64 b) const { return reduce(static_cast<u128>(a) * b); }
  u64 add(u64 a, u64 b) const {
    u64 s = a + b;
    return s >= q_ ? s - q_ : s;
  }
  u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + q_ - b; }
  u64 neg(u64 a) const { return a == 0 ? 0 : q_ - a; }
  u64 pow(u64 base, u64 exp) const;
  u64 inv(u64 a) const;  // a != 0

  // Shoup companion for a fixed multiplicand w < q.
  u64 shoup(u64 w) const {
    return static_cast<u64>((static_cast<u128>(w) << 64) / q_);
  }
  // r = a*w mod q given ws = shoup(w); result < 2q ("lazy").
  u64 mul_shoup_lazy(u64 a, u64 w, u64 ws) const {
    u64 hi = static_cast<u64>((static_cast<u128>(a) * ws) >> 64);
    return a * w - hi * q_;
  }
  u64 mul_shoup(u64 a, u64 w, u64 ws) const {
    u64 r = mul_shoup_lazy(a, w, ws);
    return r >= q_ ? r - q_ : r;
  }

 private:
  u64 q_ = 0;
  u64 ratio_hi_ = 0, ratio_lo_ = 0;  // floor(2^128 / q)
  int bits_ = 0;
};

// Negacyclic NTT tables for one (degree, prime) pair. The prime must satisfy
// q = 1 (mod 2n) so a primitive 2n-th root exists; the root is chosen
// deterministically (smallest quadratic non-residue raised to (q-1)/2n).
class NttTables {
 public:
  NttTables(u32 n, const Modulus& q);

  void forward(u64* a) const;  // coefficients -> evaluations (internal order)
  void inverse(u64* a) const;
  u32 degree() const { return n_; }
  const Modulus& modulus() const { return q_; }
  u64 root() const { return psi_; }

  // Evaluation point held at transform position j, as an exponent of psi.
  // Discovered once from forward(X); powers are always odd.
  u32 exponent_at(u32 pos) const { return exp_at_pos_[pos]; }

 private:
  u32 n_;
  int log_n_;
  Modulus q_;
  u64 psi_;
  std::vector<u64> w_, w_shoup_;    // psi^bitrev(i)
  std::vector<u64> iw_, iw_shoup_;  // inverses, same layout
  u64 n_inv_, n_inv_shoup_;
  std::vector<u32> exp_at_pos_;
};

// Ordered RNS prime set with mixed-radix (Garner) machinery. Exact signed
// conversions between bases are built from digit vectors; everything stays
// in word arithmetic.
class MrcBase {
 public:
  explicit MrcBase(const std::vector<u64>& primes);

  std::size_t size() const { return mods_.size(); }
  const Modulus& mod(std::size_t i) const { return mods_[i]; }
  const std::vector<Modulus>& mods() const { return mods_; }
  double log2_product() const { return log2_m_.back(); }

  // residues[i] = x mod m_i  ->  digits (Garner, LSD first).
  void to_digits(const u64* residues, u64* digits) const;
  // True if the representative in [0, M) exceeds (M-1)/2.
  bool digits_negative(const u64* digits) const;
  // log2 of the representative (0 -> 0).
  double digits_log2(const u64* digits) const;

  // Horner evaluation of a digit vector against a target modulus.
  struct Eval {
    Modulus target;
    std::vector<u64> radix, radix_shoup;  // m_i mod target
    u64 product_mod;                      // M mod target
  };
  Eval make_eval(const Modulus& target) const;
  u64 eval_digits(const u64* digits, const Eval& e) const;
  // Signed evaluation: representative > M/2 is treated as negative.
  u64 eval_digits_signed(const u64* digits, const Eval& e) const;

 private:
  std::vector<Modulus> mods_;
  std::vector<u64> inv_, inv_shoup_;  // inv[i][j] = m_i^{-1} mod m_j, i<j, flattened
  std::vector<u64> half_digits_;      // digits of (M-1)/2
  std::vector<double> log2_m_;        // prefix sums of log2(m_i)
  std::size_t idx(std::size_t i, std::size_t j) const { return j * size() + i; }
};

// One residue polynomial ring Z_q[X]/(X^n+1) for an ordered prime chain.
class RingSpace {
 public:
  RingSpace(u32 n, const std::vector<u64>& primes);

  u32 degree() const { return n_; }
  std::size_t levels() const { return mods_.size(); }
  const Modulus& mod(std::size_t i) const { return mods_[i]; }
  const NttTables& ntt(std::size_t i) const { return ntt_[i]; }
  const MrcBase& mrc() const { return mrc_; }
  double log2_q() const { return mrc_.log2_product(); }

 private:
  u32 n_;
  std::vector<Modulus> mods_;
  std::vector<NttTables> ntt_;
  MrcBase mrc_;
};

// RNS polynomial: levels x degree residues, residue-major. `ntt_form`
// distinguishes coefficient domain from evaluation domain.
struct RnsPoly {
  u32 n = 0;
  u32 levels = 0;
  bool ntt_form = false;
  std::vector<u64> data;  // levels * n

  RnsPoly() = default;
  RnsPoly(u32 n_, u32 levels_, bool ntt)
      : n(n_), levels(levels_), ntt_form(ntt), data(static_cast<std::size_t>(n_) * levels_, 0) {}

  u64* res(std::size_t level) { return data.data() + static_cast<std::size_t>(level) * n; }
  const u64* res(std::size_t level) const {
    return data.data() + static_cast<std::size_t>(level) * n;
  }
  bool operator==(const RnsPoly& o) const = default;
};

// Elementwise ring operations over a RingSpace (levels of the poly must not
// exceed the space's). All are safe for aliased outputs.
void poly_add(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b, RnsPoly& out);
void poly_sub(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b, RnsPoly& out);
void poly_neg(const RingSpace& rs, const RnsPoly& a, RnsPoly& out);
void ntt_forward(const RingSpace& rs, RnsPoly& a);
void ntt_inverse(const RingSpace& rs, RnsPoly& a);
// Pointwise product; both inputs must be in NTT form.
void poly_mul_ntt(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b, RnsPoly& out);
// Full negacyclic product of coefficient-form inputs (NTT round trip inside).
RnsPoly ring_mul(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b);
// out = a * scalar (scalar reduced per level).
void poly_scalar_mul(const RingSpace& rs, const RnsPoly& a, u64 scalar, RnsPoly& out);

// Substitution X -> X^elt (elt odd, < 2n) on a coefficient-form polynomial.
void apply_galois_coeff(const RingSpace& rs, const RnsPoly& in, u32 elt, RnsPoly& out);

// Lazy accumulation helpers used by key switching and diagonal sums.
void mac_no_reduce(const u64* a, const u64* b, u128* acc, std::size_t count);
void reduce_acc(const u128* acc, const Modulus& q, u64* out, std::size_t count);

// Wire format: n (u32), level count (u16), domain flag (u8), residues
// little-endian u64, residue-major.
void serialize_poly(const RnsPoly& p, ByteWriter& w);
RnsPoly deserialize_poly(ByteReader& r);

// CRT slot batching over the plaintext prime (fp::kPrime). Slots form two
// rows of length n/2; rotations act on rows independently.
class BatchEncoder {
 public:
  explicit BatchEncoder(u32 n);

  u32 degree() const { return n_; }
  u32 slot_count() const { return n_; }
  u32 row_size() const { return n_ / 2; }
  const Modulus& plain_modulus() const { return t_; }

  // v.size() <= n, zero padded. Throws CapacityError beyond n.
  RnsPoly encode(const fp::SlotVector& v) const;
  fp::SlotVector decode(const RnsPoly& p) const;

  // Galois element realizing a row rotation by `step` (out[i] = in[i+step]).
  u32 galois_elt_for_step(int step) const;
  // Plaintext-side row rotation, the oracle contract for he_rotate.
  static fp::SlotVector rotate_rows(const fp::SlotVector& v, int step, u32 n);

 private:
  u32 n_;
  Modulus t_;
  NttTables tables_;
  std::vector<u32> slot_to_pos_;  // slot index -> transform position
};

}  // namespace hhefl
