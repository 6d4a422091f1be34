#include "hhefl/ring.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace hhefl {

namespace {

u32 reverse_bits(u32 v, int bits) {
  u32 r = 0;
  for (int i = 0; i < bits; i++) {
    r = (r << 1) | (v & 1);
    v >>= 1;
  }
  return r;
}

int log2_exact(u32 n) {
  int lg = 0;
  while ((u32{1} << lg) < n) lg++;
  if ((u32{1} << lg) != n) throw ParameterError("ring degree must be a power of two");
  return lg;
}

}  // namespace

Modulus::Modulus(u64 q) : q_(q) {
  if (q < 2) throw ParameterError("modulus must be >= 2");
  u128 ratio = ~static_cast<u128>(0) / q;  // == floor(2^128 / q) for q not a power of two
  ratio_hi_ = static_cast<u64>(ratio >> 64);
  ratio_lo_ = static_cast<u64>(ratio);
  bits_ = 64 - __builtin_clzll(q);
}

u64 Modulus::pow(u64 base, u64 exp) const {
  u64 r = 1;
  base = reduce(base);
  while (exp) {
    if (exp & 1) r = mul(r, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return r;
}

u64 Modulus::inv(u64 a) const {
  a = reduce(a);
  if (a == 0) throw ParameterError("inverse of zero");
  return pow(a, q_ - 2);  // q prime throughout this project
}

NttTables::NttTables(u32 n, const Modulus& q) : n_(n), log_n_(log2_exact(n)), q_(q) {
  u64 m = q.value();
  if ((m - 1) % (2ULL * n) != 0)
    throw ParameterError("modulus has no primitive 2N-th root of unity");

  // Smallest quadratic non-residue gives an element of exact order 2N.
  u64 nonres = 0;
  for (u64 x = 2;; x++) {
    if (q.pow(x, (m - 1) / 2) == m - 1) {
      nonres = x;
      break;
    }
  }
  psi_ = q.pow(nonres, (m - 1) / (2ULL * n));

  w_.resize(n);
  w_shoup_.resize(n);
  iw_.resize(n);
  iw_shoup_.resize(n);
  u64 psi_inv = q.inv(psi_);
  for (u32 i = 0; i < n; i++) {
    u32 r = reverse_bits(i, log_n_);
    w_[i] = q.pow(psi_, r);
    iw_[i] = q.pow(psi_inv, r);
    w_shoup_[i] = q.shoup(w_[i]);
    iw_shoup_[i] = q.shoup(iw_[i]);
  }
  n_inv_ = q.inv(n);
  n_inv_shoup_ = q.shoup(n_inv_);

  // Discover which evaluation point each transform position holds by
  // transforming the monomial X.
  std::vector<u64> probe(n, 0);
  probe[1] = 1;
  forward(probe.data());
  std::unordered_map<u64, u32> exp_of_value;
  exp_of_value.reserve(n * 2);
  u64 v = psi_;
  u64 psi_sq = q.mul(psi_, psi_);
  for (u32 e = 1; e < 2 * n; e += 2) {
    exp_of_value.emplace(v, e);
    v = q.mul(v, psi_sq);
  }
  exp_at_pos_.resize(n);
  for (u32 j = 0; j < n; j++) {
    auto it = exp_of_value.find(probe[j]);
    if (it == exp_of_value.end()) throw ParameterError("ntt table self-check failed");
    exp_at_pos_[j] = it->second;
  }
}

void NttTables::forward(u64* a) const {
  const u64 q = q_.value();
  const u64 two_q = 2 * q;
  u32 t = n_;
  for (u32 mlen = 1; mlen < n_; mlen <<= 1) {
    t >>= 1;
    for (u32 i = 0; i < mlen; i++) {
      u64 w = w_[mlen + i];
      u64 ws = w_shoup_[mlen + i];
      u64* x = a + 2 * i * t;
      u64* y = x + t;
      for (u32 j = 0; j < t; j++) {
        u64 u = x[j];
        if (u >= two_q) u -= two_q;
        u64 v = q_.mul_shoup_lazy(y[j], w, ws);
        x[j] = u + v;
        y[j] = u + two_q - v;
      }
    }
  }
  for (u32 i = 0; i < n_; i++) {
    u64 u = a[i];
    if (u >= two_q) u -= two_q;
    if (u >= q) u -= q;
    a[i] = u;
  }
}

void NttTables::inverse(u64* a) const {
  const u64 q = q_.value();
  const u64 two_q = 2 * q;
  u32 t = 1;
  for (u32 mlen = n_ >> 1; mlen >= 1; mlen >>= 1) {
    for (u32 i = 0; i < mlen; i++) {
      u64 w = iw_[mlen + i];
      u64 ws = iw_shoup_[mlen + i];
      u64* x = a + 2 * i * t;
      u64* y = x + t;
      for (u32 j = 0; j < t; j++) {
        u64 u = x[j];
        u64 v = y[j];
        u64 s = u + v;
        if (s >= two_q) s -= two_q;
        x[j] = s;
        y[j] = q_.mul_shoup_lazy(u + two_q - v, w, ws);
      }
    }
    t <<= 1;
  }
  for (u32 i = 0; i < n_; i++) {
    u64 u = q_.mul_shoup_lazy(a[i], n_inv_, n_inv_shoup_);
    if (u >= q) u -= q;
    a[i] = u;
  }
}

MrcBase::MrcBase(const std::vector<u64>& primes) {
  if (primes.empty()) throw ParameterError("empty RNS base");
  for (u64 p : primes) mods_.emplace_back(p);
  std::size_t L = size();
  inv_.assign(L * L, 0);
  inv_shoup_.assign(L * L, 0);
  for (std::size_t j = 1; j < L; j++) {
    for (std::size_t i = 0; i < j; i++) {
      u64 v = mods_[j].inv(mods_[j].reduce(mods_[i].value()));
      inv_[idx(i, j)] = v;
      inv_shoup_[idx(i, j)] = mods_[j].shoup(v);
    }
  }
  log2_m_.resize(L + 1);
  log2_m_[0] = 0.0;
  for (std::size_t i = 0; i < L; i++)
    log2_m_[i + 1] = log2_m_[i] + std::log2(static_cast<double>(mods_[i].value()));

  // (M-1)/2 == (m_i - 1) * inv(2) mod m_i, since M == 0 mod m_i.
  std::vector<u64> half_res(L);
  for (std::size_t i = 0; i < L; i++) {
    u64 inv2 = mods_[i].inv(2);
    half_res[i] = mods_[i].mul(mods_[i].value() - 1, inv2);
  }
  half_digits_.resize(L);
  to_digits(half_res.data(), half_digits_.data());
}

void MrcBase::to_digits(const u64* residues, u64* digits) const {
  std::size_t L = size();
  digits[0] = residues[0];
  for (std::size_t j = 1; j < L; j++) {
    const Modulus& mj = mods_[j];
    u64 v = residues[j];
    for (std::size_t i = 0; i < j; i++) {
      u64 d = mj.reduce(digits[i]);
      v = mj.mul_shoup(mj.sub(v, d), inv_[idx(i, j)], inv_shoup_[idx(i, j)]);
    }
    digits[j] = v;
  }
}

bool MrcBase::digits_negative(const u64* digits) const {
  for (std::size_t i = size(); i-- > 0;) {
    if (digits[i] != half_digits_[i]) return digits[i] > half_digits_[i];
  }
  return false;  // exactly (M-1)/2: non-negative
}

double MrcBase::digits_log2(const u64* digits) const {
  for (std::size_t i = size(); i-- > 0;) {
    if (digits[i] != 0)
      return std::log2(static_cast<double>(digits[i])) + log2_m_[i];
  }
  return 0.0;
}

MrcBase::Eval MrcBase::make_eval(const Modulus& target) const {
  Eval e;
  e.target = target;
  std::size_t L = size();
  e.radix.resize(L);
  e.radix_shoup.resize(L);
  u64 prod = 1;
  for (std::size_t i = 0; i < L; i++) {
    u64 r = target.reduce(mods_[i].value());
    e.radix[i] = r;
    e.radix_shoup[i] = target.shoup(r);
    prod = target.mul(prod, r);
  }
  e.product_mod = prod;
  return e;
}

u64 MrcBase::eval_digits(const u64* digits, const Eval& e) const {
  std::size_t L = size();
  u64 acc = e.target.reduce(digits[L - 1]);
  for (std::size_t i = L - 1; i-- > 0;) {
    acc = e.target.mul_shoup(acc, e.radix[i], e.radix_shoup[i]);
    acc = e.target.add(acc, e.target.reduce(digits[i]));
  }
  return acc;
}

u64 MrcBase::eval_digits_signed(const u64* digits, const Eval& e) const {
  u64 v = eval_digits(digits, e);
  if (digits_negative(digits)) v = e.target.sub(v, e.product_mod);
  return v;
}

RingSpace::RingSpace(u32 n, const std::vector<u64>& primes) : n_(n), mrc_(primes) {
  log2_exact(n);
  for (u64 p : primes) mods_.emplace_back(p);
  ntt_.reserve(mods_.size());
  for (const auto& m : mods_) ntt_.emplace_back(n, m);
}

namespace {
void check_pair(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b) {
  if (a.n != b.n || a.n != rs.degree() || a.levels != b.levels ||
      a.levels > rs.levels() || a.ntt_form != b.ntt_form)
    throw ParameterError("ring element parameter mismatch");
}
}  // namespace

void poly_add(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b, RnsPoly& out) {
  check_pair(rs, a, b);
  out.n = a.n;
  out.levels = a.levels;
  out.ntt_form = a.ntt_form;
  out.data.resize(a.data.size());
  for (u32 l = 0; l < a.levels; l++) {
    const Modulus& m = rs.mod(l);
    const u64* pa = a.res(l);
    const u64* pb = b.res(l);
    u64* po = out.res(l);
    for (u32 i = 0; i < a.n; i++) po[i] = m.add(pa[i], pb[i]);
  }
}

void poly_sub(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b, RnsPoly& out) {
  check_pair(rs, a, b);
  out.n = a.n;
  out.levels = a.levels;
  out.ntt_form = a.ntt_form;
  out.data.resize(a.data.size());
  for (u32 l = 0; l < a.levels; l++) {
    const Modulus& m = rs.mod(l);
    const u64* pa = a.res(l);
    const u64* pb = b.res(l);
    u64* po = out.res(l);
    for (u32 i = 0; i < a.n; i++) po[i] = m.sub(pa[i], pb[i]);
  }
}

void poly_neg(const RingSpace& rs, const RnsPoly& a, RnsPoly& out) {
  out = a;
  for (u32 l = 0; l < a.levels; l++) {
    const Modulus& m = rs.mod(l);
    u64* po = out.res(l);
    for (u32 i = 0; i < a.n; i++) po[i] = m.neg(po[i]);
  }
}

void ntt_forward(const RingSpace& rs, RnsPoly& a) {
  if (a.ntt_form) throw ParameterError("ntt_forward: input already in NTT form");
  if (a.n != rs.degree() || a.levels > rs.levels())
    throw ParameterError("ntt_forward: parameter mismatch");
  for (u32 l = 0; l < a.levels; l++) rs.ntt(l).forward(a.res(l));
  a.ntt_form = true;
}

void ntt_inverse(const RingSpace& rs, RnsPoly& a) {
  if (!a.ntt_form) throw ParameterError("ntt_inverse: input not in NTT form");
  if (a.n != rs.degree() || a.levels > rs.levels())
    throw ParameterError("ntt_inverse: parameter mismatch");
  for (u32 l = 0; l < a.levels; l++) rs.ntt(l).inverse(a.res(l));
  a.ntt_form = false;
}

void poly_mul_ntt(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b, RnsPoly& out) {
  check_pair(rs, a, b);
  if (!a.ntt_form) throw ParameterError("poly_mul_ntt: inputs must be in NTT form");
  out.n = a.n;
  out.levels = a.levels;
  out.ntt_form = true;
  out.data.resize(a.data.size());
  for (u32 l = 0; l < a.levels; l++) {
    const Modulus& m = rs.mod(l);
    const u64* pa = a.res(l);
    const u64* pb = b.res(l);
    u64* po = out.res(l);
    for (u32 i = 0; i < a.n; i++) po[i] = m.mul(pa[i], pb[i]);
  }
}

RnsPoly ring_mul(const RingSpace& rs, const RnsPoly& a, const RnsPoly& b) {
  check_pair(rs, a, b);
  if (a.ntt_form) throw ParameterError("ring_mul expects coefficient form");
  RnsPoly fa = a, fb = b, out;
  ntt_forward(rs, fa);
  ntt_forward(rs, fb);
  poly_mul_ntt(rs, fa, fb, out);
  ntt_inverse(rs, out);
  return out;
}

void poly_scalar_mul(const RingSpace& rs, const RnsPoly& a, u64 scalar, RnsPoly& out) {
  out = a;
  for (u32 l = 0; l < a.levels; l++) {
    const Modulus& m = rs.mod(l);
    u64 s = m.reduce(scalar);
    u64 ss = m.shoup(s);
    u64* po = out.res(l);
    for (u32 i = 0; i < a.n; i++) po[i] = m.mul_shoup(po[i], s, ss);
  }
}

void apply_galois_coeff(const RingSpace& rs, const RnsPoly& in, u32 elt, RnsPoly& out) {
  if (in.ntt_form) throw ParameterError("apply_galois expects coefficient form");
  u32 n = in.n;
  u32 mask = 2 * n - 1;
  if ((elt & 1) == 0 || elt >= 2 * n) throw ParameterError("invalid Galois element");
  RnsPoly result(n, in.levels, false);
  for (u32 l = 0; l < in.levels; l++) {
    const Modulus& m = rs.mod(l);
    const u64* pi = in.res(l);
    u64* po = result.res(l);
    for (u32 i = 0; i < n; i++) {
      u32 j = (static_cast<u64>(i) * elt) & mask;
      u64 v = pi[i];
      if (j >= n) {
        po[j - n] = m.neg(v);
      } else {
        po[j] = v;
      }
    }
  }
  out = std::move(result);
}

void mac_no_reduce(const u64* a, const u64* b, u128* acc, std::size_t count) {
  for (std::size_t i = 0; i < count; i++)
    acc[i] += static_cast<u128>(a[i]) * b[i];
}

void reduce_acc(const u128* acc, const Modulus& q, u64* out, std::size_t count) {
  for (std::size_t i = 0; i < count; i++) out[i] = q.reduce(acc[i]);
}

void serialize_poly(const RnsPoly& p, ByteWriter& w) {
  w.u32v(p.n);
  w.u16v(static_cast<u16>(p.levels));
  w.u8v(p.ntt_form ? 1 : 0);
  w.bytes(p.data.data(), p.data.size() * sizeof(u64));
}

RnsPoly deserialize_poly(ByteReader& r) {
  RnsPoly p;
  p.n = r.u32v();
  p.levels = r.u16v();
  p.ntt_form = r.u8v() != 0;
  if (p.n == 0 || p.n > (1u << 20) || p.levels == 0 || p.levels > 64)
    throw FormatError("implausible ring element header");
  p.data.resize(static_cast<std::size_t>(p.n) * p.levels);
  r.bytes(p.data.data(), p.data.size() * sizeof(u64));
  return p;
}

BatchEncoder::BatchEncoder(u32 n)
    : n_(n), t_(fp::kPrime), tables_(n, t_) {
  if (n < 4) throw ParameterError("batching needs degree >= 4");
  // Row 0: evaluation points psi^(3^i); row 1: psi^(-3^i).
  u32 m = 2 * n;
  std::vector<u32> pos_of_exp(m, UINT32_MAX);
  for (u32 j = 0; j < n; j++) pos_of_exp[tables_.exponent_at(j)] = j;
  slot_to_pos_.resize(n);
  u64 pos = 1;
  for (u32 i = 0; i < n / 2; i++) {
    slot_to_pos_[i] = pos_of_exp[pos];
    slot_to_pos_[i + n / 2] = pos_of_exp[m - pos];
    pos = (pos * 3) & (m - 1);
  }
}

RnsPoly BatchEncoder::encode(const fp::SlotVector& v) const {
  if (v.size() > n_) throw CapacityError("too many slots for ring degree");
  std::vector<u64> buf(n_, 0);
  for (std::size_t i = 0; i < v.size(); i++) buf[slot_to_pos_[i]] = t_.reduce(v[i]);
  RnsPoly p(n_, 1, false);
  std::copy(buf.begin(), buf.end(), p.res(0));
  tables_.inverse(p.res(0));
  return p;
}

fp::SlotVector BatchEncoder::decode(const RnsPoly& p) const {
  if (p.n != n_ || p.levels != 1 || p.ntt_form)
    throw ParameterError("decode expects a coefficient-form plaintext");
  std::vector<u64> buf(p.res(0), p.res(0) + n_);
  tables_.forward(buf.data());
  fp::SlotVector v(n_);
  for (u32 i = 0; i < n_; i++) v[i] = buf[slot_to_pos_[i]];
  return v;
}

u32 BatchEncoder::galois_elt_for_step(int step) const {
  u32 h = n_ / 2;
  long long s = static_cast<long long>(step) % h;
  if (s < 0) s += h;
  u32 m = 2 * n_;
  u64 elt = 1;
  for (long long i = 0; i < s; i++) elt = (elt * 3) & (m - 1);
  return static_cast<u32>(elt);
}

fp::SlotVector BatchEncoder::rotate_rows(const fp::SlotVector& v, int step, u32 n) {
  u32 h = n / 2;
  fp::SlotVector in(v);
  in.resize(n, 0);
  fp::SlotVector out(n, 0);
  long long s = static_cast<long long>(step) % h;
  if (s < 0) s += h;
  for (u32 r = 0; r < 2; r++) {
    for (u32 i = 0; i < h; i++) out[r * h + i] = in[r * h + (i + s) % h];
  }
  return out;
}

}  // namespace hhefl
