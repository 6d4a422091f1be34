#pragma once

#include <memory>
#include <set>
#include <vector>

#include "hhefl/bfv.hpp"
#include "hhefl/pasta.hpp"

namespace hhefl {

// One transciphered chunk: slots [0, t) carry the decrypted values, every
// other slot decrypts to zero.
struct TranscipheredChunk {
  BfvCiphertext ct;
  u64 counter = 0;
  double eval_ms = 0.0;
};

// Homomorphic evaluation of the stream cipher's decryption circuit. The
// context is bound to one client's encrypted key at a time; contexts for
// different clients are independent. All evaluation state is immutable after
// set_encrypted_key, so chunks may be processed concurrently.
class HesdContext {
 public:
  HesdContext(std::shared_ptr<const BfvContext> ctx, const pasta::Variant& variant,
              BfvRelinKey relin, BfvGaloisKeys galois);

  // Every rotation step the evaluation plan needs: the baby-step/giant-step
  // set for the 2t-diagonal method, the replication step -2t, the mixing
  // steps +-t, and the Feistel shift -1.
  static std::set<int> required_rotation_steps(const pasta::Variant& variant);

  const pasta::Variant& variant() const { return variant_; }
  const BfvContext& bfv() const { return *ctx_; }

  void set_encrypted_key(const BfvCiphertext& sk_he);
  bool has_key() const { return static_cast<bool>(key_); }

  // Evaluates the keystream for (nonce, counter) under the loaded key.
  // Decrypts to keystream_block(...) in slots [0, t), zero elsewhere.
  BfvCiphertext he_keystream(const pasta::BlockNonce& nonce) const;

  // m_HE = encode(c) - keystream: decrypts to the symmetric plaintext.
  TranscipheredChunk hesd_block(const pasta::SymCiphertextChunk& chunk, u64 nonce_hi,
                                u64 nonce_lo) const;

  // Order-preserving map of hesd_block over consecutive-counter chunks.
  // threads = 0 uses every available core; 1 is the serial reference.
  std::vector<TranscipheredChunk> hesd_chunks(
      const std::vector<pasta::SymCiphertextChunk>& chunks, u64 nonce_hi, u64 nonce_lo,
      int threads = 0) const;
  std::vector<TranscipheredChunk> hesd_chunks_serial(
      const std::vector<pasta::SymCiphertextChunk>& chunks, u64 nonce_hi,
      u64 nonce_lo) const;

 private:
  BfvCiphertext affine_he(const BfvCiphertext& state, const pasta::LayerMaterial& layer,
                          int layer_index) const;
  BfvCiphertext feistel_he(const BfvCiphertext& state) const;
  BfvCiphertext cube_he(const BfvCiphertext& state) const;
  void check_budget(const BfvCiphertext& state, const char* where) const;

  std::shared_ptr<const BfvContext> ctx_;
  BfvEngine eng_;
  pasta::Variant variant_;
  BfvRelinKey relin_;
  BfvGaloisKeys galois_;
  u32 n1_, n2_;  // baby-step/giant-step split over 2t diagonals
  PlainOperand clear_above_2t_, feistel_mask_, keep_first_t_;
  std::shared_ptr<const BfvCiphertext> key_;
};

}  // namespace hhefl
