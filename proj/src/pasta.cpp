#include "hhefl/pasta.hpp"

#include "hhefl/shake.hpp"

namespace hhefl::pasta {

namespace {

constexpr u64 p = fp::kPrime;

u64 sample_field(Shake& xof) {
  // 17-bit draws, rejecting >= p, keep the sampler uniform.
  for (;;) {
    u64 v = xof.squeeze_bits(17);
    if (v < p) return v;
  }
}

// Uniform first row (leading element nonzero), then shift-and-feed.
std::vector<u64> sample_matrix(Shake& xof, u32 t) {
  std::vector<u64> mat(static_cast<std::size_t>(t) * t);
  do {
    mat[0] = sample_field(xof);
  } while (mat[0] == 0);
  for (u32 j = 1; j < t; j++) mat[j] = sample_field(xof);
  for (u32 i = 1; i < t; i++) {
    u64 feed = mat[(i - 1) * t + t - 1];
    for (u32 j = 0; j < t; j++) {
      u64 v = fp::mul(mat[j], feed);
      if (j > 0) v = fp::add(v, mat[(i - 1) * t + j - 1]);
      mat[i * t + j] = v;
    }
  }
  return mat;
}

std::vector<u64> sample_constants(Shake& xof, u32 t) {
  std::vector<u64> c(t);
  for (auto& v : c) v = sample_field(xof);
  return c;
}

}  // namespace

Variant Variant::by_name(const std::string& name) {
  if (name == "pasta3") return pasta3();
  if (name == "pasta4") return pasta4();
  throw ParameterError("unknown PASTA variant: " + name);
}

Key random_key(const Variant& v, SeedRng& rng) {
  Key k(2 * v.t);
  for (auto& x : k) x = rng.uniform(p);
  return k;
}

RoundMaterial derive_round_material(const BlockNonce& nonce, const Variant& v) {
  Shake xof(Shake::Kind::Shake128);
  xof.absorb("PASTA");
  xof.absorb_u64(nonce.nonce_hi);
  xof.absorb_u64(nonce.nonce_lo);
  xof.absorb_u64(nonce.counter);
  RoundMaterial m;
  m.layers.resize(v.r + 1);
  for (auto& layer : m.layers) {
    layer.mat_l = sample_matrix(xof, v.t);
    layer.mat_r = sample_matrix(xof, v.t);
    layer.c_l = sample_constants(xof, v.t);
    layer.c_r = sample_constants(xof, v.t);
  }
  return m;
}

void mix(std::vector<u64>& state) {
  u32 t = static_cast<u32>(state.size() / 2);
  for (u32 i = 0; i < t; i++) {
    u64 l = state[i], r = state[t + i];
    u64 s = fp::add(l, r);
    state[i] = fp::add(l, s);
    state[t + i] = fp::add(r, s);
  }
}

std::vector<u64> affine_layer(const std::vector<u64>& state, const LayerMaterial& m) {
  u32 t = static_cast<u32>(m.c_l.size());
  if (state.size() != 2 * static_cast<std::size_t>(t))
    throw ParameterError("affine layer: state size mismatch");
  std::vector<u64> out(2 * t);
  for (u32 i = 0; i < t; i++) {
    u64 acc_l = 0, acc_r = 0;
    const u64* row_l = m.mat_l.data() + static_cast<std::size_t>(i) * t;
    const u64* row_r = m.mat_r.data() + static_cast<std::size_t>(i) * t;
    for (u32 j = 0; j < t; j++) {
      acc_l = (acc_l + row_l[j] * state[j]) % p;
      acc_r = (acc_r + row_r[j] * state[t + j]) % p;
    }
    out[i] = fp::add(acc_l, m.c_l[i]);
    out[t + i] = fp::add(acc_r, m.c_r[i]);
  }
  mix(out);
  return out;
}

std::vector<u64> sbox_feistel(const std::vector<u64>& half) {
  std::vector<u64> out(half.size());
  if (half.empty()) return out;
  out[0] = half[0];
  for (std::size_t i = 1; i < half.size(); i++)
    out[i] = fp::add(half[i], fp::mul(half[i - 1], half[i - 1]));
  return out;
}

std::vector<u64> sbox_cube(const std::vector<u64>& half) {
  std::vector<u64> out(half.size());
  for (std::size_t i = 0; i < half.size(); i++)
    out[i] = fp::mul(fp::mul(half[i], half[i]), half[i]);
  return out;
}

std::vector<u64> keystream_block(const Key& key, const BlockNonce& nonce, const Variant& v) {
  if (key.size() != 2 * static_cast<std::size_t>(v.t))
    throw ParameterError("PASTA key must hold 2t elements");
  RoundMaterial m = derive_round_material(nonce, v);
  std::vector<u64> state = key;
  for (u32 j = 0; j < v.r; j++) {
    state = affine_layer(state, m.layers[j]);
    std::vector<u64> left(state.begin(), state.begin() + v.t);
    std::vector<u64> right(state.begin() + v.t, state.end());
    if (j + 1 < v.r) {
      left = sbox_feistel(left);
      right = sbox_feistel(right);
    } else {
      left = sbox_cube(left);
      right = sbox_cube(right);
    }
    std::copy(left.begin(), left.end(), state.begin());
    std::copy(right.begin(), right.end(), state.begin() + v.t);
  }
  state = affine_layer(state, m.layers[v.r]);
  return std::vector<u64>(state.begin(), state.begin() + v.t);
}

void SymCiphertextChunk::serialize(ByteWriter& w) const {
  w.u64v(counter);
  for (u64 v : payload) w.u64v(v);
}

SymCiphertextChunk SymCiphertextChunk::deserialize(ByteReader& r, u32 t) {
  SymCiphertextChunk c;
  c.counter = r.u64v();
  c.payload.resize(t);
  for (auto& v : c.payload) v = r.u64v();
  return c;
}

SymCiphertextChunk sym_encrypt(const std::vector<u64>& chunk, const Key& key,
                               const BlockNonce& nonce, const Variant& v) {
  if (chunk.size() != v.t) throw CapacityError("chunk must hold exactly t elements");
  auto ks = keystream_block(key, nonce, v);
  SymCiphertextChunk out;
  out.counter = nonce.counter;
  out.payload.resize(v.t);
  for (u32 i = 0; i < v.t; i++) out.payload[i] = fp::add(chunk[i], ks[i]);
  return out;
}

std::vector<u64> sym_decrypt(const SymCiphertextChunk& c, const Key& key, u64 nonce_hi,
                             u64 nonce_lo, const Variant& v) {
  if (c.payload.size() != v.t) throw CapacityError("chunk must hold exactly t elements");
  auto ks = keystream_block(key, BlockNonce{nonce_hi, nonce_lo, c.counter}, v);
  std::vector<u64> m(v.t);
  for (u32 i = 0; i < v.t; i++) m[i] = fp::sub(c.payload[i], ks[i]);
  return m;
}

}  // namespace hhefl::pasta
