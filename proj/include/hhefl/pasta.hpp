#pragma once

#include <string>
#include <vector>

#include "hhefl/common.hpp"
#include "hhefl/fp.hpp"

namespace hhefl {

class SeedRng;

namespace pasta {

// Stream cipher over F_p with XOF-derived affine layers, a Feistel square
// S-box and a final cube S-box. Two standard instances.
struct Variant {
  u32 t = 0;  // block size in field elements; the state holds 2t
  u32 r = 0;  // round count
  std::string name;

  static Variant pasta3() { return {128, 3, "pasta3"}; }
  static Variant pasta4() { return {32, 4, "pasta4"}; }
  static Variant by_name(const std::string& name);
  bool operator==(const Variant& o) const = default;
};

// 2t field elements; left half k_L, right half k_R.
using Key = std::vector<u64>;

Key random_key(const Variant& v, SeedRng& rng);

struct BlockNonce {
  u64 nonce_hi = 0;  // protocol schedule: round index
  u64 nonce_lo = 0;  // protocol schedule: client id
  u64 counter = 0;   // chunk index
};

inline BlockNonce make_nonce(u64 round, u64 client_id, u64 counter) {
  return BlockNonce{round, client_id, counter};
}

// Per affine layer j in [0, r]: two t x t matrices (row-major) and two
// constant vectors, all over F_p.
struct LayerMaterial {
  std::vector<u64> mat_l, mat_r;
  std::vector<u64> c_l, c_r;
};

struct RoundMaterial {
  std::vector<LayerMaterial> layers;  // r + 1 entries
};

// Deterministic function of (nonce, counter): SHAKE128 seeded with
// "PASTA" || nonce || counter, field elements by rejection on 17-bit draws.
// Matrices: uniform first row with nonzero leading element, then the
// shift-and-feed recurrence row_i[j] = first[j]*row_{i-1}[t-1] + row_{i-1}[j-1].
RoundMaterial derive_round_material(const BlockNonce& nonce, const Variant& v);

// state: 2t elements -> M_L*L + c_L, M_R*R + c_R, then mix.
std::vector<u64> affine_layer(const std::vector<u64>& state, const LayerMaterial& m);

// (y_L, y_R) -> (2y_L + y_R, y_L + 2y_R) element-wise.
void mix(std::vector<u64>& state);

// x'_0 = x_0; x'_i = x_i + x_{i-1}^2, one half at a time.
std::vector<u64> sbox_feistel(const std::vector<u64>& half);
// x -> x^3 (bijective on F_p since gcd(3, p-1) = 1).
std::vector<u64> sbox_cube(const std::vector<u64>& half);

// Keystream for one block: t elements.
std::vector<u64> keystream_block(const Key& key, const BlockNonce& nonce, const Variant& v);

struct SymCiphertextChunk {
  u64 counter = 0;
  std::vector<u64> payload;  // exactly t masked elements

  void serialize(ByteWriter& w) const;
  static SymCiphertextChunk deserialize(ByteReader& r, u32 t);
};

// c = m + K, m = c - K (mod p). Chunk length must be exactly t.
SymCiphertextChunk sym_encrypt(const std::vector<u64>& chunk, const Key& key,
                               const BlockNonce& nonce, const Variant& v);
std::vector<u64> sym_decrypt(const SymCiphertextChunk& c, const Key& key, u64 nonce_hi,
                             u64 nonce_lo, const Variant& v);

}  // namespace pasta
}  // namespace hhefl
