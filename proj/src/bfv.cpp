#include "hhefl/bfv.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hhefl {

namespace {

// NTT-friendly prime pools, all = 1 (mod 2^15 * 65537): one pool serves every
// supported degree, and q = 1 (mod t) keeps the r_t(q) noise term at 1.
constexpr u64 kPool62[] = {
    0x3ffffffe3ffe8001ULL, 0x3ffffff0bff10001ULL, 0x3fffffe93fe98001ULL,
    0x3fffffddbfde0001ULL, 0x3fffffdbbfdc0001ULL, 0x3fffffda3fda8001ULL,
    0x3fffffd8bfd90001ULL, 0x3fffffd33fd38001ULL, 0x3fffffd13fd18001ULL,
    0x3fffffc2bfc30001ULL, 0x3fffffbc3fbc8001ULL, 0x3fffffb53fb58001ULL,
    0x3fffffaebfaf0001ULL, 0x3fffffad3fad8001ULL, 0x3fffff95bf960001ULL,
    0x3fffff8e3f8e8001ULL};
constexpr u64 kPool54[] = {0x3ffff17fb18001ULL, 0x3fffe87fa88001ULL,
                           0x3fffe1ffa20001ULL};
constexpr u64 kPool55 = 0x7ffffd7f7d8001ULL;
constexpr u64 kPool56 = 0xffffffff000001ULL;

int log2_int(u64 v) { return 63 - __builtin_clzll(v); }

double log2_sum_bits(double a, double b) {
  // log2(2^a + 2^b)
  if (a < b) std::swap(a, b);
  return a + std::log2(1.0 + std::exp2(b - a));
}

constexpr double kLog2T = 16.0000220;  // log2(65537)

}  // namespace

BfvParams BfvParams::from_preset(const std::string& name) {
  BfvParams p;
  p.preset = name;
  if (name == "n4096") {
    p.n = 4096;
    p.data_primes = {kPool54[0]};
    p.special_prime = kPool55;  // 54 + 55 = 109 bits
  } else if (name == "n8192") {
    p.n = 8192;
    p.data_primes = {kPool54[0], kPool54[1], kPool54[2]};
    p.special_prime = kPool56;  // 162 + 56 = 218 bits
  } else if (name == "n16384") {
    p.n = 16384;
    p.data_primes.assign(kPool62, kPool62 + 6);
    p.special_prime = kPool62[6];  // 372 + 62 = 434 <= 438 bits
  } else {
    throw ParameterError("unknown BFV preset: " + name);
  }
  return p;
}

const std::vector<std::string>& BfvParams::preset_names() {
  static const std::vector<std::string> names = {"n4096", "n8192", "n16384"};
  return names;
}

double BfvParams::log2_q() const {
  double s = 0;
  for (u64 p : data_primes) s += std::log2(static_cast<double>(p));
  return s;
}

std::vector<u64> BfvParams::key_primes() const {
  std::vector<u64> v = data_primes;
  v.push_back(special_prime);
  return v;
}

void BfvParams::serialize(ByteWriter& w) const {
  w.u32v(n);
  w.u8v(static_cast<u8>(preset.size()));
  w.bytes(preset.data(), preset.size());
  w.u16v(static_cast<u16>(data_primes.size()));
  for (u64 p : data_primes) w.u64v(p);
  w.u64v(special_prime);
}

BfvParams BfvParams::deserialize(ByteReader& r) {
  BfvParams p;
  p.n = r.u32v();
  u8 len = r.u8v();
  p.preset.resize(len);
  r.bytes(p.preset.data(), len);
  u16 count = r.u16v();
  p.data_primes.resize(count);
  for (auto& v : p.data_primes) v = r.u64v();
  p.special_prime = r.u64v();
  return p;
}

// Exact RNS scale-and-round machinery: mixed-radix digit conversions between
// the data base q and an auxiliary base B large enough to hold the signed
// tensor product and the rounded quotient.
struct BfvContext::ScaleRound {
  const MrcBase* q_mrc = nullptr;  // owned by rq
  MrcBase b_mrc;
  std::size_t nq, nb;
  std::vector<MrcBase::Eval> q_to_aux;   // q digits -> each aux prime
  std::vector<MrcBase::Eval> b_to_q;     // B digits -> each data prime (signed)
  std::vector<u64> h_mod;                // floor(q/2) mod every D level
  std::vector<u64> t_mul, t_mul_shoup;   // t mod every D level
  std::vector<u64> qinv, qinv_shoup;     // q^{-1} mod each aux prime
  Modulus t;

  ScaleRound(const RingSpace& rq, const std::vector<u64>& aux, const Modulus& t_)
      : b_mrc(aux), nq(rq.levels()), nb(aux.size()), t(t_) {
    q_mrc = &rq.mrc();
    for (std::size_t k = 0; k < nb; k++) q_to_aux.push_back(q_mrc->make_eval(b_mrc.mod(k)));
    for (std::size_t j = 0; j < nq; j++) b_to_q.push_back(b_mrc.make_eval(rq.mod(j)));
    // floor(q/2) = (q-1)/2 since q is odd: residue (m-1)*inv(2) with q = 0 mod
    // data primes, and (prod-1)*inv(2) on aux primes.
    for (std::size_t j = 0; j < nq; j++) {
      const Modulus& m = rq.mod(j);
      h_mod.push_back(m.mul(m.value() - 1, m.inv(2)));
      t_mul.push_back(m.reduce(t.value()));
      t_mul_shoup.push_back(m.shoup(t_mul.back()));
    }
    for (std::size_t k = 0; k < nb; k++) {
      const Modulus& m = b_mrc.mod(k);
      u64 q_mod = 1;
      for (std::size_t j = 0; j < nq; j++) q_mod = m.mul(q_mod, m.reduce(rq.mod(j).value()));
      h_mod.push_back(m.mul(m.sub(q_mod, 1), m.inv(2)));
      t_mul.push_back(m.reduce(t.value()));
      t_mul_shoup.push_back(m.shoup(t_mul.back()));
      u64 iv = m.inv(q_mod);
      qinv.push_back(iv);
      qinv_shoup.push_back(m.shoup(iv));
    }
  }

  // Extend residues of one coefficient from q to the aux primes (value in
  // [0, q) taken as the true integer).
  void extend_coeff(const u64* digits, u64* aux_out) const {
    for (std::size_t k = 0; k < nb; k++)
      aux_out[k] = q_mrc->eval_digits(digits, q_to_aux[k]);
  }
};

BfvContext::BfvContext(const BfvParams& params) : params_(params), t_(fp::kPrime) {
  if (params.n < 4 || params.data_primes.empty() || params.special_prime == 0)
    throw ParameterError("invalid BFV parameters");
  rq_ = std::make_unique<RingSpace>(params.n, params.data_primes);
  rqs_ = std::make_unique<RingSpace>(params.n, params.key_primes());
  encoder_ = std::make_unique<BatchEncoder>(params.n);

  // Auxiliary base sizing: hold the signed tensor product (1 + log2 n + 2|q|
  // bits, of which |q| already comes from q) and the signed rounded quotient
  // (t * n * q plus slack).
  double bits_q = rq_->log2_q();
  double need_aux = std::max(1.0 + log2_int(params.n) + bits_q,
                             2.0 + kLog2T + log2_int(params.n) + bits_q) +
                    2.0;
  std::vector<u64> aux;
  double have = 0;
  std::vector<u64> used = params.key_primes();
  for (u64 p : kPool62) {
    if (have >= need_aux) break;
    if (std::find(used.begin(), used.end(), p) != used.end()) continue;
    aux.push_back(p);
    have += std::log2(static_cast<double>(p));
  }
  if (have < need_aux) throw ParameterError("prime pool exhausted for aux base");
  std::vector<u64> d_primes = params.data_primes;
  d_primes.insert(d_primes.end(), aux.begin(), aux.end());
  rd_ = std::make_unique<RingSpace>(params.n, d_primes);

  delta_.resize(rq_->levels());
  delta_shoup_.resize(rq_->levels());
  // delta = floor(q/t) = (q - r)/t with r = q mod t, so delta = -r * t^{-1}
  // mod each data prime.
  u64 r_mod_t = 1;
  for (u64 p : params.data_primes) r_mod_t = t_.mul(r_mod_t, t_.reduce(p));
  for (std::size_t j = 0; j < rq_->levels(); j++) {
    const Modulus& m = rq_->mod(j);
    u64 tinv = m.inv(m.reduce(t_.value()));
    delta_[j] = m.mul(m.neg(m.reduce(r_mod_t)), tinv);
    delta_shoup_[j] = m.shoup(delta_[j]);
  }

  sr_ = std::make_shared<const ScaleRound>(*rq_, aux, t_);
}

BfvContext::~BfvContext() = default;

BfvEngine::BfvEngine(std::shared_ptr<const BfvContext> ctx) : ctx_(std::move(ctx)) {
  if (!ctx_) throw ParameterError("null BFV context");
}

void BfvEngine::check_ct(const BfvCiphertext& a) const {
  if (a.comps.empty() || a.comps.size() > 3)
    throw ParameterError("ciphertext component count must be 2 or 3");
  for (const auto& c : a.comps) {
    if (c.n != ctx_->degree() || c.levels != ctx_->levels() || c.ntt_form)
      throw ParameterError("ciphertext does not match context parameters");
  }
}

RnsPoly BfvEngine::sample_uniform_q(SeedRng& rng, const RingSpace& rs) const {
  // Independent per-residue uniforms are exactly uniform over R_q by CRT.
  RnsPoly p(rs.degree(), static_cast<u32>(rs.levels()), false);
  for (u32 l = 0; l < p.levels; l++) {
    u64* d = p.res(l);
    for (u32 i = 0; i < p.n; i++) d[i] = rng.uniform(rs.mod(l).value());
  }
  return p;
}

RnsPoly BfvEngine::sample_cbd(SeedRng& rng, const RingSpace& rs) const {
  // Centered binomial, 21+21 bits: variance 10.5, sigma ~ 3.24.
  u32 n = rs.degree();
  std::vector<u8> buf(static_cast<std::size_t>(n) * 6);
  rng.fill(buf.data(), buf.size());
  RnsPoly p(n, static_cast<u32>(rs.levels()), false);
  for (u32 i = 0; i < n; i++) {
    u64 bits = 0;
    for (int b = 0; b < 6; b++) bits |= static_cast<u64>(buf[i * 6 + b]) << (8 * b);
    int e = __builtin_popcountll(bits & ((u64{1} << 21) - 1)) -
            __builtin_popcountll((bits >> 21) & ((u64{1} << 21) - 1));
    for (u32 l = 0; l < p.levels; l++) {
      const Modulus& m = rs.mod(l);
      p.res(l)[i] = e >= 0 ? static_cast<u64>(e) : m.value() - static_cast<u64>(-e);
    }
  }
  return p;
}

RnsPoly BfvEngine::ternary_to_poly(const std::vector<signed char>& t,
                                   const RingSpace& rs) const {
  RnsPoly p(rs.degree(), static_cast<u32>(rs.levels()), false);
  for (u32 l = 0; l < p.levels; l++) {
    const Modulus& m = rs.mod(l);
    u64* d = p.res(l);
    for (u32 i = 0; i < p.n; i++)
      d[i] = t[i] >= 0 ? static_cast<u64>(t[i]) : m.value() - 1;
  }
  return p;
}

KswitchKey BfvEngine::make_kswitch_key(const RnsPoly& target_qs_ntt,
                                       const BfvSecretKey& sk, SeedRng& rng) const {
  const RingSpace& rqs = ctx_->rqs();
  std::size_t L = ctx_->levels();
  KswitchKey k;
  k.digits.resize(L);
  for (std::size_t i = 0; i < L; i++) {
    RnsPoly a = sample_uniform_q(rng, rqs);
    ntt_forward(rqs, a);
    RnsPoly e = sample_cbd(rng, rqs);
    ntt_forward(rqs, e);
    RnsPoly k0;
    poly_mul_ntt(rqs, a, sk.s_qs_ntt, k0);
    poly_add(rqs, k0, e, k0);
    poly_neg(rqs, k0, k0);
    // Embed sp * B_i * target: residue (sp mod q_i) * target on level i only.
    const Modulus& mi = rqs.mod(i);
    u64 sp_mod = mi.reduce(ctx_->params().special_prime);
    u64 sp_shoup = mi.shoup(sp_mod);
    u64* k0i = k0.res(i);
    const u64* ti = target_qs_ntt.res(i);
    for (u32 c = 0; c < k0.n; c++)
      k0i[c] = mi.add(k0i[c], mi.mul_shoup(ti[c], sp_mod, sp_shoup));
    k.digits[i] = {std::move(k0), std::move(a)};
  }
  return k;
}

BfvKeySet BfvEngine::keygen(const std::set<int>& rotation_steps, SeedRng rng) const {
  const RingSpace& rq = ctx_->rq();
  const RingSpace& rqs = ctx_->rqs();
  BfvKeySet ks;

  SeedRng sk_rng = rng.fork("bfv/sk");
  ks.sk.ternary.resize(ctx_->degree());
  for (auto& v : ks.sk.ternary) v = static_cast<signed char>(sk_rng.uniform(3)) - 1;
  ks.sk.s_q_ntt = ternary_to_poly(ks.sk.ternary, rq);
  ntt_forward(rq, ks.sk.s_q_ntt);
  ks.sk.s_qs_ntt = ternary_to_poly(ks.sk.ternary, rqs);
  ntt_forward(rqs, ks.sk.s_qs_ntt);

  SeedRng pk_rng = rng.fork("bfv/pk");
  RnsPoly a = sample_uniform_q(pk_rng, rq);
  ntt_forward(rq, a);
  RnsPoly e = sample_cbd(pk_rng, rq);
  ntt_forward(rq, e);
  RnsPoly pk0;
  poly_mul_ntt(rq, a, ks.sk.s_q_ntt, pk0);
  poly_add(rq, pk0, e, pk0);
  poly_neg(rq, pk0, pk0);
  ks.pk.pk0_ntt = std::move(pk0);
  ks.pk.pk1_ntt = std::move(a);

  SeedRng relin_rng = rng.fork("bfv/relin");
  RnsPoly s2;
  poly_mul_ntt(rqs, ks.sk.s_qs_ntt, ks.sk.s_qs_ntt, s2);
  ks.relin.key = make_kswitch_key(s2, ks.sk, relin_rng);

  ks.galois.steps = rotation_steps;
  RnsPoly s_coeff = ternary_to_poly(ks.sk.ternary, rqs);
  for (int step : rotation_steps) {
    u32 elt = ctx_->encoder().galois_elt_for_step(step);
    if (elt == 1 || ks.galois.by_elt.count(elt)) continue;
    RnsPoly s_g;
    apply_galois_coeff(rqs, s_coeff, elt, s_g);
    ntt_forward(rqs, s_g);
    SeedRng g_rng = rng.fork("bfv/galois", elt);
    ks.galois.by_elt.emplace(elt, make_kswitch_key(s_g, ks.sk, g_rng));
  }
  return ks;
}

// Budget bookkeeping: budget = headroom - estimated noise bits. The
// constants are calibrated against measured noise (see test_bfv) and sit a
// fraction of a bit above observed growth so the estimate stays a lower
// bound on the measured budget.
namespace est {
constexpr double kFreshOffset = 4.8;    // fresh noise = 0.5 log2 n + this
constexpr double kMulOffset = 13.8;     // ct*ct = t * sqrt(n) * this margin
constexpr double kPlainMulOffset = 7.8; // * plaintext slot norm
constexpr double kMaskCost = 0.3;       // 0/1 plaintexts barely grow noise
constexpr double kKswitchNoise = 13.8;  // additive key-switch floor, bits
constexpr double kPlainAddNoise = 2.0;
}  // namespace est

double BfvEngine::headroom_bits() const { return ctx_->log2_q() - kLog2T - 1.0; }

double BfvEngine::fresh_budget_estimate() const {
  return headroom_bits() - (0.5 * log2_int(ctx_->degree()) + est::kFreshOffset);
}

double BfvEngine::combine_noise_add(double budget_a, double budget_b) const {
  double h = headroom_bits();
  return h - log2_sum_bits(h - budget_a, h - budget_b);
}

BfvCiphertext BfvEngine::encrypt(const fp::SlotVector& v, const BfvPublicKey& pk,
                                 SeedRng rng) const {
  const RingSpace& rq = ctx_->rq();
  RnsPoly m = ctx_->encoder().encode(v);

  std::vector<signed char> u(ctx_->degree());
  SeedRng u_rng = rng.fork("bfv/enc/u");
  for (auto& x : u) x = static_cast<signed char>(u_rng.uniform(3)) - 1;
  RnsPoly u_poly = ternary_to_poly(u, rq);
  ntt_forward(rq, u_poly);

  SeedRng e_rng = rng.fork("bfv/enc/e");
  RnsPoly e0 = sample_cbd(e_rng, rq);
  RnsPoly e1 = sample_cbd(e_rng, rq);

  RnsPoly c0, c1;
  poly_mul_ntt(rq, pk.pk0_ntt, u_poly, c0);
  ntt_inverse(rq, c0);
  poly_add(rq, c0, e0, c0);
  poly_mul_ntt(rq, pk.pk1_ntt, u_poly, c1);
  ntt_inverse(rq, c1);
  poly_add(rq, c1, e1, c1);

  const u64* mc = m.res(0);
  for (std::size_t j = 0; j < ctx_->levels(); j++) {
    const Modulus& mod = rq.mod(j);
    u64 dj = ctx_->delta()[j], djs = ctx_->delta_shoup()[j];
    u64* d = c0.res(j);
    for (u32 i = 0; i < c0.n; i++) d[i] = mod.add(d[i], mod.mul_shoup(mc[i], dj, djs));
  }

  BfvCiphertext ct;
  ct.comps.push_back(std::move(c0));
  ct.comps.push_back(std::move(c1));
  ct.budget_bits = fresh_budget_estimate();
  return ct;
}

RnsPoly BfvEngine::decrypt_to_plain(const BfvCiphertext& ct, const BfvSecretKey& sk) const {
  const RingSpace& rq = ctx_->rq();
  RnsPoly acc = ct.comps[0];
  ntt_forward(rq, acc);
  RnsPoly c1 = ct.comps[1];
  ntt_forward(rq, c1);
  RnsPoly term;
  poly_mul_ntt(rq, c1, sk.s_q_ntt, term);
  poly_add(rq, acc, term, acc);
  if (ct.comps.size() == 3) {
    RnsPoly s2;
    poly_mul_ntt(rq, sk.s_q_ntt, sk.s_q_ntt, s2);
    RnsPoly c2 = ct.comps[2];
    ntt_forward(rq, c2);
    poly_mul_ntt(rq, c2, s2, term);
    poly_add(rq, acc, term, acc);
  }
  ntt_inverse(rq, acc);
  return acc;  // v = c0 + c1 s (+ c2 s^2) mod q, coefficient form
}

fp::SlotVector BfvEngine::decrypt_raw(const BfvCiphertext& ct, const BfvSecretKey& sk) const {
  check_ct(ct);
  const auto& sr = ctx_->scale_round();
  const MrcBase& qm = *sr.q_mrc;
  std::size_t L = ctx_->levels();
  RnsPoly v = decrypt_to_plain(ct, sk);
  u32 n = ctx_->degree();

  // m = floor((t*v + floor(q/2)) / q) mod t, evaluated through one aux prime.
  const Modulus& b0 = sr.b_mrc.mod(0);
  const Modulus& t = sr.t;
  u64 t_b0 = b0.reduce(t.value());
  u64 t_b0_shoup = b0.shoup(t_b0);
  u64 h_b0 = sr.h_mod[L];  // aux level 0 holds floor(q/2) mod b0
  RnsPoly m_plain(n, 1, false);
  std::vector<u64> res(L), digits(L), yres(L);
  for (u32 i = 0; i < n; i++) {
    for (std::size_t j = 0; j < L; j++) res[j] = v.res(j)[i];
    qm.to_digits(res.data(), digits.data());
    u64 v_b0 = qm.eval_digits(digits.data(), sr.q_to_aux[0]);
    u64 y_b0 = b0.add(b0.mul_shoup(v_b0, t_b0, t_b0_shoup), h_b0);
    for (std::size_t j = 0; j < L; j++) {
      const Modulus& mj = ctx_->rq().mod(j);
      yres[j] = mj.add(mj.mul_shoup(res[j], sr.t_mul[j], sr.t_mul_shoup[j]), sr.h_mod[j]);
    }
    qm.to_digits(yres.data(), digits.data());
    u64 cap_y_b0 = qm.eval_digits(digits.data(), sr.q_to_aux[0]);
    u64 u = b0.mul_shoup(b0.sub(y_b0, cap_y_b0), sr.qinv[0], sr.qinv_shoup[0]);
    m_plain.res(0)[i] = u >= t.value() ? u - t.value() : u;
  }
  return ctx_->encoder().decode(m_plain);
}

fp::SlotVector BfvEngine::decrypt(const BfvCiphertext& ct, const BfvSecretKey& sk) const {
  if (ct.budget_bits <= 0.0)
    throw NoiseBudgetError("noise budget estimate exhausted; decryption integrity lost");
  return decrypt_raw(ct, sk);
}

double BfvEngine::noise_budget(const BfvCiphertext& ct, const BfvSecretKey& sk) const {
  check_ct(ct);
  const auto& sr = ctx_->scale_round();
  const MrcBase& qm = *sr.q_mrc;
  std::size_t L = ctx_->levels();
  u32 n = ctx_->degree();
  RnsPoly v = decrypt_to_plain(ct, sk);

  // Re-encode the decoded message and measure e = v - delta*m.
  fp::SlotVector slots = decrypt_raw(ct, sk);
  RnsPoly m = ctx_->encoder().encode(slots);
  const u64* mc = m.res(0);

  double max_log2 = -1.0;
  std::vector<u64> res(L), digits(L), neg(L);
  for (u32 i = 0; i < n; i++) {
    for (std::size_t j = 0; j < L; j++) {
      const Modulus& mj = ctx_->rq().mod(j);
      u64 dm = mj.mul_shoup(mc[i], ctx_->delta()[j], ctx_->delta_shoup()[j]);
      res[j] = mj.sub(v.res(j)[i], dm);
    }
    qm.to_digits(res.data(), digits.data());
    double lg;
    if (qm.digits_negative(digits.data())) {
      for (std::size_t j = 0; j < L; j++) neg[j] = ctx_->rq().mod(j).neg(res[j]);
      qm.to_digits(neg.data(), digits.data());
    }
    lg = qm.digits_log2(digits.data());
    max_log2 = std::max(max_log2, lg);
  }
  // Within half a bit of the q/2t bound decryption is already unreliable;
  // report that as exhausted.
  double headroom = ctx_->log2_q() - kLog2T - 1.0;
  return std::max(0.0, headroom - max_log2 - 0.5);
}

BfvCiphertext BfvEngine::add(const BfvCiphertext& a, const BfvCiphertext& b) const {
  check_ct(a);
  check_ct(b);
  const RingSpace& rq = ctx_->rq();
  const BfvCiphertext& big = a.size() >= b.size() ? a : b;
  const BfvCiphertext& small = a.size() >= b.size() ? b : a;
  BfvCiphertext out = big;
  for (std::size_t i = 0; i < small.size(); i++)
    poly_add(rq, out.comps[i], small.comps[i], out.comps[i]);
  out.budget_bits = combine_noise_add(a.budget_bits, b.budget_bits);
  return out;
}

BfvCiphertext BfvEngine::negate(const BfvCiphertext& a) const {
  check_ct(a);
  BfvCiphertext out = a;
  for (auto& c : out.comps) poly_neg(ctx_->rq(), c, c);
  return out;
}

BfvCiphertext BfvEngine::plain_add(const BfvCiphertext& a, const fp::SlotVector& v) const {
  check_ct(a);
  RnsPoly m = ctx_->encoder().encode(v);
  const u64* mc = m.res(0);
  BfvCiphertext out = a;
  for (std::size_t j = 0; j < ctx_->levels(); j++) {
    const Modulus& mod = ctx_->rq().mod(j);
    u64 dj = ctx_->delta()[j], djs = ctx_->delta_shoup()[j];
    u64* d = out.comps[0].res(j);
    for (u32 i = 0; i < out.comps[0].n; i++)
      d[i] = mod.add(d[i], mod.mul_shoup(mc[i], dj, djs));
  }
  out.budget_bits = combine_noise_add(a.budget_bits, headroom_bits() - est::kPlainAddNoise);
  return out;
}

PlainOperand BfvEngine::make_plain_operand(const fp::SlotVector& v) const {
  PlainOperand p;
  RnsPoly m = ctx_->encoder().encode(v);
  const u64* mc = m.res(0);
  u64 t = fp::kPrime;
  double max_c = 0.0;
  for (u64 x : v) {
    u64 centered = std::min(x, t - x);
    max_c = std::max(max_c, static_cast<double>(centered));
  }
  RnsPoly lifted(ctx_->degree(), static_cast<u32>(ctx_->levels()), false);
  for (std::size_t j = 0; j < ctx_->levels(); j++)
    std::copy(mc, mc + ctx_->degree(), lifted.res(j));
  ntt_forward(ctx_->rq(), lifted);
  p.poly_ntt = std::move(lifted);
  p.max_centered = max_c;
  return p;
}

BfvCiphertext BfvEngine::plain_mul(const BfvCiphertext& a, const fp::SlotVector& v) const {
  return plain_mul(a, make_plain_operand(v));
}

double BfvEngine::estimate_after_plain_mul(double budget, double max_centered) const {
  double cost = max_centered <= 1.0 ? est::kMaskCost
                                    : std::log2(max_centered) + est::kPlainMulOffset;
  return budget - cost;
}

BfvCiphertext BfvEngine::plain_mul(const BfvCiphertext& a, const PlainOperand& p) const {
  check_ct(a);
  const RingSpace& rq = ctx_->rq();
  BfvCiphertext out;
  out.comps.reserve(a.size());
  for (const auto& c : a.comps) {
    RnsPoly cn = c;
    ntt_forward(rq, cn);
    RnsPoly prod;
    poly_mul_ntt(rq, cn, p.poly_ntt, prod);
    ntt_inverse(rq, prod);
    out.comps.push_back(std::move(prod));
  }
  out.budget_bits = estimate_after_plain_mul(a.budget_bits, p.max_centered);
  return out;
}

BfvCiphertext BfvEngine::mul_relin(const BfvCiphertext& a, const BfvCiphertext& b,
                                   const BfvRelinKey& rk) const {
  check_ct(a);
  check_ct(b);
  if (a.size() != 2 || b.size() != 2)
    throw ParameterError("mul_relin expects size-2 ciphertexts");
  const RingSpace& rd = ctx_->rd();
  const auto& sr = ctx_->scale_round();
  const MrcBase& qm = *sr.q_mrc;
  std::size_t L = ctx_->levels();
  std::size_t LD = rd.levels();
  std::size_t K = LD - L;
  u32 n = ctx_->degree();

  // Extend the four input polys to the mul base D = q ++ B and transform.
  std::array<RnsPoly, 4> ext;
  const RnsPoly* src[4] = {&a.comps[0], &a.comps[1], &b.comps[0], &b.comps[1]};
  std::vector<u64> res(L), digits(L);
  for (int p = 0; p < 4; p++) {
    RnsPoly e(n, static_cast<u32>(LD), false);
    for (std::size_t j = 0; j < L; j++)
      std::copy(src[p]->res(j), src[p]->res(j) + n, e.res(j));
    for (u32 i = 0; i < n; i++) {
      for (std::size_t j = 0; j < L; j++) res[j] = src[p]->res(j)[i];
      qm.to_digits(res.data(), digits.data());
      for (std::size_t k = 0; k < K; k++)
        e.res(L + k)[i] = qm.eval_digits(digits.data(), sr.q_to_aux[k]);
    }
    ntt_forward(rd, e);
    ext[p] = std::move(e);
  }

  // Tensor: d0 = a0 b0, d1 = a0 b1 + a1 b0, d2 = a1 b1.
  std::array<RnsPoly, 3> tensor;
  poly_mul_ntt(rd, ext[0], ext[2], tensor[0]);
  {
    RnsPoly t1, t2;
    poly_mul_ntt(rd, ext[0], ext[3], t1);
    poly_mul_ntt(rd, ext[1], ext[2], t2);
    poly_add(rd, t1, t2, tensor[1]);
  }
  poly_mul_ntt(rd, ext[1], ext[3], tensor[2]);
  for (auto& t : tensor) ntt_inverse(rd, t);

  // Scale by t/q with rounding, exactly, back into base q.
  std::array<RnsPoly, 3> scaled;
  std::vector<u64> ydig(L), bres(K), bdig(K);
  for (int p = 0; p < 3; p++) {
    RnsPoly out(n, static_cast<u32>(L), false);
    for (u32 i = 0; i < n; i++) {
      // y = t*x + floor(q/2) over D.
      for (std::size_t j = 0; j < L; j++) {
        const Modulus& mj = ctx_->rq().mod(j);
        res[j] = mj.add(mj.mul_shoup(tensor[p].res(j)[i], sr.t_mul[j], sr.t_mul_shoup[j]),
                        sr.h_mod[j]);
      }
      qm.to_digits(res.data(), ydig.data());
      for (std::size_t k = 0; k < K; k++) {
        const Modulus& mb = sr.b_mrc.mod(k);
        u64 y_b = mb.add(
            mb.mul_shoup(tensor[p].res(L + k)[i], sr.t_mul[L + k], sr.t_mul_shoup[L + k]),
            sr.h_mod[L + k]);
        // u = (y - (y mod q)) / q on each aux prime.
        u64 cap = qm.eval_digits(ydig.data(), sr.q_to_aux[k]);
        bres[k] = mb.mul_shoup(mb.sub(y_b, cap), sr.qinv[k], sr.qinv_shoup[k]);
      }
      sr.b_mrc.to_digits(bres.data(), bdig.data());
      for (std::size_t j = 0; j < L; j++)
        out.res(j)[i] = sr.b_mrc.eval_digits_signed(bdig.data(), sr.b_to_q[j]);
    }
    scaled[p] = std::move(out);
  }

  // Relinearize the quadratic component.
  RnsPoly r0, r1;
  apply_kswitch(scaled[2], rk.key, r0, r1);
  BfvCiphertext out;
  out.comps.resize(2);
  poly_add(ctx_->rq(), scaled[0], r0, out.comps[0]);
  poly_add(ctx_->rq(), scaled[1], r1, out.comps[1]);
  double cost = kLog2T + 0.5 * log2_int(ctx_->degree()) + est::kMulOffset;
  double b_mul = std::min(a.budget_bits, b.budget_bits) - cost;
  out.budget_bits = combine_noise_add(b_mul, headroom_bits() - est::kKswitchNoise);
  return out;
}

void BfvEngine::apply_kswitch(const RnsPoly& poly, const KswitchKey& k, RnsPoly& out0,
                              RnsPoly& out1) const {
  const RingSpace& rqs = ctx_->rqs();
  std::size_t L = ctx_->levels();
  std::size_t Ls = L + 1;
  u32 n = ctx_->degree();
  if (poly.ntt_form || poly.levels != L) throw ParameterError("kswitch input mismatch");

  RnsPoly acc0(n, static_cast<u32>(Ls), true), acc1(n, static_cast<u32>(Ls), true);
  std::vector<u128> lazy0(n), lazy1(n);
  std::vector<u64> digit(n);
  for (std::size_t j = 0; j < Ls; j++) {
    const Modulus& mj = rqs.mod(j);
    std::fill(lazy0.begin(), lazy0.end(), u128{0});
    std::fill(lazy1.begin(), lazy1.end(), u128{0});
    for (std::size_t i = 0; i < L; i++) {
      const u64* d = poly.res(i);
      for (u32 c = 0; c < n; c++) digit[c] = mj.reduce(d[c]);
      rqs.ntt(j).forward(digit.data());
      mac_no_reduce(digit.data(), k.digits[i][0].res(j), lazy0.data(), n);
      mac_no_reduce(digit.data(), k.digits[i][1].res(j), lazy1.data(), n);
    }
    reduce_acc(lazy0.data(), mj, acc0.res(j), n);
    reduce_acc(lazy1.data(), mj, acc1.res(j), n);
  }
  ntt_inverse(rqs, acc0);
  ntt_inverse(rqs, acc1);

  // Divide by the special prime with centered rounding.
  u64 sp = ctx_->params().special_prime;
  u64 half_sp = sp >> 1;
  out0 = RnsPoly(n, static_cast<u32>(L), false);
  out1 = RnsPoly(n, static_cast<u32>(L), false);
  for (std::size_t j = 0; j < L; j++) {
    const Modulus& mj = ctx_->rq().mod(j);
    u64 spinv = mj.inv(mj.reduce(sp));
    u64 spinv_shoup = mj.shoup(spinv);
    const u64* a0sp = acc0.res(L);
    const u64* a1sp = acc1.res(L);
    const u64* a0 = acc0.res(j);
    const u64* a1 = acc1.res(j);
    u64* o0 = out0.res(j);
    u64* o1 = out1.res(j);
    for (u32 c = 0; c < n; c++) {
      u64 v0 = a0sp[c] > half_sp ? mj.neg(mj.reduce(sp - a0sp[c])) : mj.reduce(a0sp[c]);
      u64 v1 = a1sp[c] > half_sp ? mj.neg(mj.reduce(sp - a1sp[c])) : mj.reduce(a1sp[c]);
      o0[c] = mj.mul_shoup(mj.sub(a0[c], v0), spinv, spinv_shoup);
      o1[c] = mj.mul_shoup(mj.sub(a1[c], v1), spinv, spinv_shoup);
    }
  }
}

BfvCiphertext BfvEngine::rotate(const BfvCiphertext& a, int step,
                                const BfvGaloisKeys& gk) const {
  check_ct(a);
  if (a.size() != 2) throw ParameterError("rotate expects size-2 ciphertext");
  u32 elt = ctx_->encoder().galois_elt_for_step(step);
  if (elt == 1) return a;
  auto it = gk.by_elt.find(elt);
  if (it == gk.by_elt.end())
    throw MissingKeyError("no rotation key for step " + std::to_string(step));
  const RingSpace& rq = ctx_->rq();
  RnsPoly c0g, c1g;
  apply_galois_coeff(rq, a.comps[0], elt, c0g);
  apply_galois_coeff(rq, a.comps[1], elt, c1g);
  RnsPoly k0, k1;
  apply_kswitch(c1g, it->second, k0, k1);
  BfvCiphertext out;
  out.comps.resize(2);
  poly_add(rq, c0g, k0, out.comps[0]);
  out.comps[1] = std::move(k1);
  // Key-switch noise is additive; it only matters once the budget nears the
  // key-switch floor.
  out.budget_bits = combine_noise_add(a.budget_bits, headroom_bits() - est::kKswitchNoise);
  return out;
}

void write_container_header(ByteWriter& w, ObjType type) {
  w.bytes("HHEF", 4);
  w.u8v(1);  // version
  w.u8v(static_cast<u8>(type));
}

ObjType read_container_header(ByteReader& r) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "HHEF", 4) != 0) throw FormatError("bad magic, not an HHEF object");
  u8 version = r.u8v();
  if (version != 1) throw FormatError("unsupported HHEF version");
  return static_cast<ObjType>(r.u8v());
}

void serialize_ciphertext(const BfvCiphertext& ct, ByteWriter& w) {
  w.u8v(static_cast<u8>(ct.comps.size()));
  w.f64v(ct.budget_bits);
  for (const auto& c : ct.comps) serialize_poly(c, w);
}

BfvCiphertext deserialize_ciphertext(ByteReader& r) {
  BfvCiphertext ct;
  u8 count = r.u8v();
  if (count < 2 || count > 3) throw FormatError("ciphertext component count");
  ct.budget_bits = r.f64v();
  for (u8 i = 0; i < count; i++) ct.comps.push_back(deserialize_poly(r));
  return ct;
}

void serialize_public_key(const BfvPublicKey& pk, ByteWriter& w) {
  serialize_poly(pk.pk0_ntt, w);
  serialize_poly(pk.pk1_ntt, w);
}

BfvPublicKey deserialize_public_key(ByteReader& r) {
  BfvPublicKey pk;
  pk.pk0_ntt = deserialize_poly(r);
  pk.pk1_ntt = deserialize_poly(r);
  return pk;
}

void serialize_secret_key(const BfvSecretKey& sk, ByteWriter& w) {
  w.u32v(static_cast<u32>(sk.ternary.size()));
  w.bytes(sk.ternary.data(), sk.ternary.size());
}

BfvSecretKey deserialize_secret_key(ByteReader& r, const BfvContext& ctx) {
  BfvSecretKey sk;
  u32 n = r.u32v();
  if (n != ctx.degree()) throw FormatError("secret key degree mismatch");
  sk.ternary.resize(n);
  r.bytes(sk.ternary.data(), n);
  RnsPoly s(ctx.degree(), static_cast<u32>(ctx.levels()), false);
  RnsPoly ss(ctx.degree(), static_cast<u32>(ctx.rqs().levels()), false);
  for (u32 l = 0; l < s.levels; l++) {
    const Modulus& m = ctx.rq().mod(l);
    for (u32 i = 0; i < n; i++)
      s.res(l)[i] = sk.ternary[i] >= 0 ? sk.ternary[i] : m.value() - 1;
  }
  for (u32 l = 0; l < ss.levels; l++) {
    const Modulus& m = ctx.rqs().mod(l);
    for (u32 i = 0; i < n; i++)
      ss.res(l)[i] = sk.ternary[i] >= 0 ? sk.ternary[i] : m.value() - 1;
  }
  ntt_forward(ctx.rq(), s);
  ntt_forward(ctx.rqs(), ss);
  sk.s_q_ntt = std::move(s);
  sk.s_qs_ntt = std::move(ss);
  return sk;
}

void serialize_kswitch(const KswitchKey& k, ByteWriter& w) {
  w.u16v(static_cast<u16>(k.digits.size()));
  for (const auto& d : k.digits) {
    serialize_poly(d[0], w);
    serialize_poly(d[1], w);
  }
}

KswitchKey deserialize_kswitch(ByteReader& r) {
  KswitchKey k;
  u16 count = r.u16v();
  k.digits.resize(count);
  for (auto& d : k.digits) {
    d[0] = deserialize_poly(r);
    d[1] = deserialize_poly(r);
  }
  return k;
}

void serialize_relin_key(const BfvRelinKey& rk, ByteWriter& w) { serialize_kswitch(rk.key, w); }

BfvRelinKey deserialize_relin_key(ByteReader& r) {
  BfvRelinKey rk;
  rk.key = deserialize_kswitch(r);
  return rk;
}

void serialize_galois_keys(const BfvGaloisKeys& gk, ByteWriter& w) {
  w.u16v(static_cast<u16>(gk.steps.size()));
  for (int s : gk.steps) w.u32v(static_cast<u32>(s));
  w.u16v(static_cast<u16>(gk.by_elt.size()));
  for (const auto& [elt, key] : gk.by_elt) {
    w.u32v(elt);
    serialize_kswitch(key, w);
  }
}

BfvGaloisKeys deserialize_galois_keys(ByteReader& r) {
  BfvGaloisKeys gk;
  u16 steps = r.u16v();
  for (u16 i = 0; i < steps; i++) gk.steps.insert(static_cast<int>(r.u32v()));
  u16 count = r.u16v();
  for (u16 i = 0; i < count; i++) {
    u32 elt = r.u32v();
    gk.by_elt.emplace(elt, deserialize_kswitch(r));
  }
  return gk;
}

}  // namespace hhefl
