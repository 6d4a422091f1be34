#include "hhefl/transcipher.hpp"

#include <chrono>
#include <cmath>
#include <omp.h>

namespace hhefl {

namespace {

u32 isqrt_ceil(u32 v) {
  u32 r = static_cast<u32>(std::ceil(std::sqrt(static_cast<double>(v))));
  while (r * r < v) r++;
  return r;
}

fp::SlotVector window_mask(u32 n, u32 lo, u32 hi) {
  fp::SlotVector m(n, 0);
  for (u32 i = lo; i < hi; i++) m[i] = 1;
  return m;
}

}  // namespace

std::set<int> HesdContext::required_rotation_steps(const pasta::Variant& v) {
  u32 dim = 2 * v.t;
  u32 n1 = isqrt_ceil(dim);
  u32 n2 = (dim + n1 - 1) / n1;
  std::set<int> steps;
  for (u32 b = 1; b < n1; b++) steps.insert(static_cast<int>(b));
  for (u32 g = 1; g < n2; g++) steps.insert(static_cast<int>(g * n1));
  steps.insert(-static_cast<int>(dim));
  steps.insert(static_cast<int>(v.t));
  steps.insert(-static_cast<int>(v.t));
  steps.insert(-1);
  return steps;
}

HesdContext::HesdContext(std::shared_ptr<const BfvContext> ctx,
                         const pasta::Variant& variant, BfvRelinKey relin,
                         BfvGaloisKeys galois)
    : ctx_(std::move(ctx)),
      eng_(ctx_),
      variant_(variant),
      relin_(std::move(relin)),
      galois_(std::move(galois)) {
  u32 dim = 2 * variant_.t;
  if (4ULL * variant_.t > ctx_->degree() / 2)
    throw ParameterError("2t state (with replication) must fit one slot row");
  n1_ = isqrt_ceil(dim);
  n2_ = (dim + n1_ - 1) / n1_;
  for (int s : required_rotation_steps(variant_)) {
    u32 elt = ctx_->encoder().galois_elt_for_step(s);
    if (elt != 1 && !galois_.by_elt.count(elt))
      throw MissingKeyError("rotation key set does not cover step " + std::to_string(s));
  }
  u32 n = ctx_->degree();
  clear_above_2t_ = eng_.make_plain_operand(window_mask(n, 0, dim));
  auto fm = window_mask(n, 0, dim);
  fm[0] = 0;
  fm[variant_.t] = 0;
  feistel_mask_ = eng_.make_plain_operand(fm);
  keep_first_t_ = eng_.make_plain_operand(window_mask(n, 0, variant_.t));
}

void HesdContext::set_encrypted_key(const BfvCiphertext& sk_he) {
  if (sk_he.size() != 2) throw ParameterError("encrypted key must be a size-2 ciphertext");
  key_ = std::make_shared<const BfvCiphertext>(sk_he);
}

void HesdContext::check_budget(const BfvCiphertext& state, const char* where) const {
  if (state.budget_bits <= 0.0)
    throw NoiseBudgetError(std::string("noise budget exhausted at ") + where);
}

BfvCiphertext HesdContext::affine_he(const BfvCiphertext& state,
                                     const pasta::LayerMaterial& layer,
                                     int layer_index) const {
  const u32 t = variant_.t;
  const u32 dim = 2 * t;
  const RingSpace& rq = ctx_->rq();
  const u32 n = ctx_->degree();
  const std::size_t levels = ctx_->levels();

  // Replicate the state so diagonal indexing wraps mod 2t.
  BfvCiphertext y = eng_.add(state, eng_.rotate(state, -static_cast<int>(dim), galois_));

  // Baby-step rotations, kept in NTT form for the diagonal accumulation.
  std::vector<BfvCiphertext> baby(n1_);
  std::vector<std::array<RnsPoly, 2>> baby_ntt(n1_);
  baby[0] = y;
  for (u32 b = 1; b < n1_; b++) baby[b] = eng_.rotate(y, static_cast<int>(b), galois_);
  for (u32 b = 0; b < n1_; b++) {
    baby_ntt[b][0] = baby[b].comps[0];
    baby_ntt[b][1] = baby[b].comps[1];
    ntt_forward(rq, baby_ntt[b][0]);
    ntt_forward(rq, baby_ntt[b][1]);
  }

  // Block-diagonal 2t x 2t matrix; diagonal k as a slot vector.
  auto diagonal = [&](u32 k) {
    fp::SlotVector d(n, 0);
    for (u32 i = 0; i < dim; i++) {
      u32 j = (i + k) % dim;
      if (i < t && j < t) {
        d[i] = layer.mat_l[static_cast<std::size_t>(i) * t + j];
      } else if (i >= t && j >= t) {
        d[i] = layer.mat_r[static_cast<std::size_t>(i - t) * t + (j - t)];
      }
    }
    return d;
  };

  BfvCiphertext acc;
  std::vector<u128> lazy0(n), lazy1(n);
  RnsPoly sum0(n, static_cast<u32>(levels), true), sum1(n, static_cast<u32>(levels), true);
  for (u32 g = 0; g < n2_; g++) {
    double inner_budget = 0.0;
    bool first_term = true;
    // Lazy 128-bit accumulation: up to n1 <= 16 products of 62-bit residues
    // stay below 2^128.
    for (std::size_t l = 0; l < levels; l++) {
      std::fill(lazy0.begin(), lazy0.end(), u128{0});
      std::fill(lazy1.begin(), lazy1.end(), u128{0});
      double level_budget = 0.0;
      for (u32 b = 0; b < n1_; b++) {
        u32 k = g * n1_ + b;
        if (k >= dim) break;
        auto d = BatchEncoder::rotate_rows(diagonal(k), -static_cast<int>(g * n1_), n);
        PlainOperand op = eng_.make_plain_operand(d);
        mac_no_reduce(baby_ntt[b][0].res(l), op.poly_ntt.res(l), lazy0.data(), n);
        mac_no_reduce(baby_ntt[b][1].res(l), op.poly_ntt.res(l), lazy1.data(), n);
        if (l == 0) {
          double term =
              eng_.estimate_after_plain_mul(baby[b].budget_bits, op.max_centered);
          level_budget = first_term ? term : eng_.combine_noise_add(level_budget, term);
          first_term = false;
        }
      }
      if (l == 0) inner_budget = level_budget;
      reduce_acc(lazy0.data(), rq.mod(l), sum0.res(l), n);
      reduce_acc(lazy1.data(), rq.mod(l), sum1.res(l), n);
    }
    BfvCiphertext inner;
    inner.comps.resize(2);
    inner.comps[0] = sum0;
    inner.comps[1] = sum1;
    ntt_inverse(rq, inner.comps[0]);
    ntt_inverse(rq, inner.comps[1]);
    inner.budget_bits = inner_budget;
    if (g == 0) {
      acc = std::move(inner);
    } else {
      acc = eng_.add(acc, eng_.rotate(inner, static_cast<int>(g * n1_), galois_));
    }
  }

  // Constants, mix s' = 2s + rot_t(s) + rot_-t(s), then slot hygiene.
  fp::SlotVector consts(n, 0);
  for (u32 i = 0; i < t; i++) {
    consts[i] = layer.c_l[i];
    consts[t + i] = layer.c_r[i];
  }
  acc = eng_.plain_add(acc, consts);
  BfvCiphertext mixed = eng_.add(eng_.add(acc, acc),
                                 eng_.add(eng_.rotate(acc, static_cast<int>(t), galois_),
                                          eng_.rotate(acc, -static_cast<int>(t), galois_)));
  BfvCiphertext out = eng_.plain_mul(mixed, clear_above_2t_);
  check_budget(out, ("affine layer " + std::to_string(layer_index)).c_str());
  return out;
}

BfvCiphertext HesdContext::feistel_he(const BfvCiphertext& state) const {
  BfvCiphertext shifted = eng_.rotate(state, -1, galois_);
  BfvCiphertext sq = eng_.mul_relin(shifted, shifted, relin_);
  sq = eng_.plain_mul(sq, feistel_mask_);
  return eng_.add(state, sq);
}

BfvCiphertext HesdContext::cube_he(const BfvCiphertext& state) const {
  BfvCiphertext sq = eng_.mul_relin(state, state, relin_);
  return eng_.mul_relin(sq, state, relin_);
}

BfvCiphertext HesdContext::he_keystream(const pasta::BlockNonce& nonce) const {
  if (!key_) throw MissingKeyError("no encrypted key loaded");
  pasta::RoundMaterial material = pasta::derive_round_material(nonce, variant_);
  BfvCiphertext s = *key_;
  for (u32 j = 0; j < variant_.r; j++) {
    s = affine_he(s, material.layers[j], static_cast<int>(j));
    if (j + 1 < variant_.r) {
      s = feistel_he(s);
      check_budget(s, ("feistel round " + std::to_string(j)).c_str());
    } else {
      s = cube_he(s);
      check_budget(s, "cube layer");
    }
  }
  s = affine_he(s, material.layers[variant_.r], static_cast<int>(variant_.r));
  s = eng_.plain_mul(s, keep_first_t_);
  check_budget(s, "output truncation");
  return s;
}

TranscipheredChunk HesdContext::hesd_block(const pasta::SymCiphertextChunk& chunk,
                                           u64 nonce_hi, u64 nonce_lo) const {
  if (chunk.payload.size() != variant_.t)
    throw CapacityError("chunk must hold exactly t elements");
  auto start = std::chrono::steady_clock::now();
  BfvCiphertext ks = he_keystream(pasta::BlockNonce{nonce_hi, nonce_lo, chunk.counter});
  fp::SlotVector payload(ctx_->degree(), 0);
  for (u32 i = 0; i < variant_.t; i++) payload[i] = chunk.payload[i];
  BfvCiphertext out = eng_.plain_add(eng_.negate(ks), payload);
  TranscipheredChunk result;
  result.ct = std::move(out);
  result.counter = chunk.counter;
  result.eval_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return result;
}

std::vector<TranscipheredChunk> HesdContext::hesd_chunks(
    const std::vector<pasta::SymCiphertextChunk>& chunks, u64 nonce_hi, u64 nonce_lo,
    int threads) const {
  for (std::size_t i = 0; i < chunks.size(); i++) {
    if (chunks[i].counter != chunks[0].counter + i)
      throw ProtocolError("chunk counters must be consecutive");
  }
  if (threads <= 0) threads = omp_get_max_threads();
  std::vector<TranscipheredChunk> out(chunks.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (std::size_t i = 0; i < chunks.size(); i++) {
    try {
      out[i] = hesd_block(chunks[i], nonce_hi, nonce_lo);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<TranscipheredChunk> HesdContext::hesd_chunks_serial(
    const std::vector<pasta::SymCiphertextChunk>& chunks, u64 nonce_hi,
    u64 nonce_lo) const {
  return hesd_chunks(chunks, nonce_hi, nonce_lo, 1);
}

}  // namespace hhefl
