#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hhefl/fp.hpp"
#include "hhefl/ring.hpp"
#include "hhefl/shake.hpp"

namespace hhefl {

// Parameter presets pin the coefficient-modulus budget per degree to the
// standard 128-bit lattice security table: 4096 -> 109 bits, 8192 -> 218,
// 16384 -> 438 (special key-switching prime included in the budget).
struct BfvParams {
  u32 n = 0;
  std::string preset;
  std::vector<u64> data_primes;
  u64 special_prime = 0;

  static BfvParams from_preset(const std::string& name);  // n4096|n8192|n16384
  static const std::vector<std::string>& preset_names();

  double log2_q() const;
  std::vector<u64> key_primes() const;  // data ++ special

  void serialize(ByteWriter& w) const;
  static BfvParams deserialize(ByteReader& r);
  bool operator==(const BfvParams& o) const = default;
};

// Everything precomputed for one parameter set: ring spaces for the data
// base q, the key base q*sp, and the extended multiplication base q*B, plus
// the batching encoder and the RNS scale-and-round machinery.
class BfvContext {
 public:
  explicit BfvContext(const BfvParams& params);
  ~BfvContext();

  const BfvParams& params() const { return params_; }
  u32 degree() const { return params_.n; }
  std::size_t levels() const { return rq_->levels(); }
  const RingSpace& rq() const { return *rq_; }    // ciphertext base q
  const RingSpace& rqs() const { return *rqs_; }  // key base q ++ sp
  const RingSpace& rd() const { return *rd_; }    // mul base q ++ aux
  const BatchEncoder& encoder() const { return *encoder_; }
  const Modulus& plain_modulus() const { return t_; }

  // delta = floor(q/t) as residues mod each data prime.
  const std::vector<u64>& delta() const { return delta_; }
  const std::vector<u64>& delta_shoup() const { return delta_shoup_; }

  double log2_q() const { return rq_->log2_q(); }
  std::size_t aux_count() const { return rd_->levels() - rq_->levels(); }

  // Internal helpers shared by engine routines.
  struct ScaleRound;  // defined in bfv.cpp
  const ScaleRound& scale_round() const { return *sr_; }

 private:
  BfvParams params_;
  Modulus t_;
  std::unique_ptr<RingSpace> rq_, rqs_, rd_;
  std::unique_ptr<BatchEncoder> encoder_;
  std::vector<u64> delta_, delta_shoup_;
  std::shared_ptr<const ScaleRound> sr_;
};

struct BfvSecretKey {
  std::vector<signed char> ternary;  // n entries in {-1,0,1}
  RnsPoly s_q_ntt;                   // secret over q, NTT form
  RnsPoly s_qs_ntt;                  // secret over q*sp, NTT form
};

struct BfvPublicKey {
  RnsPoly pk0_ntt, pk1_ntt;  // over q, NTT form
};

// Key-switching key: one (k0, k1) pair over q*sp per decomposition digit.
struct KswitchKey {
  std::vector<std::array<RnsPoly, 2>> digits;
};

struct BfvRelinKey {
  KswitchKey key;  // target s^2
};

struct BfvGaloisKeys {
  std::map<u32, KswitchKey> by_elt;  // galois element -> key
  std::set<int> steps;               // declared rotation steps
};

struct BfvCiphertext {
  std::vector<RnsPoly> comps;  // 2 (or 3 pre-relinearization) polys over q
  double budget_bits = 0.0;    // conservative running estimate

  std::size_t size() const { return comps.size(); }
};

struct BfvKeySet {
  BfvPublicKey pk;
  BfvSecretKey sk;
  BfvRelinKey relin;
  BfvGaloisKeys galois;
};

// Plaintext prepared for repeated multiplication: NTT form over q plus the
// largest centered slot magnitude (drives the noise estimate).
struct PlainOperand {
  RnsPoly poly_ntt;
  double max_centered = 0.0;
};

class BfvEngine {
 public:
  explicit BfvEngine(std::shared_ptr<const BfvContext> ctx);

  const BfvContext& context() const { return *ctx_; }
  std::shared_ptr<const BfvContext> context_ptr() const { return ctx_; }

  // Deterministic under the caller's rng; rotation keys are generated for
  // exactly the declared steps.
  BfvKeySet keygen(const std::set<int>& rotation_steps, SeedRng rng) const;

  BfvCiphertext encrypt(const fp::SlotVector& v, const BfvPublicKey& pk, SeedRng rng) const;
  // Checks the running budget estimate; throws NoiseBudgetError at <= 0.
  fp::SlotVector decrypt(const BfvCiphertext& ct, const BfvSecretKey& sk) const;
  // No estimate check: diagnostics and forced-exhaustion probes.
  fp::SlotVector decrypt_raw(const BfvCiphertext& ct, const BfvSecretKey& sk) const;

  BfvCiphertext add(const BfvCiphertext& a, const BfvCiphertext& b) const;
  BfvCiphertext negate(const BfvCiphertext& a) const;
  BfvCiphertext plain_add(const BfvCiphertext& a, const fp::SlotVector& v) const;
  BfvCiphertext plain_mul(const BfvCiphertext& a, const fp::SlotVector& v) const;
  BfvCiphertext plain_mul(const BfvCiphertext& a, const PlainOperand& p) const;
  BfvCiphertext mul_relin(const BfvCiphertext& a, const BfvCiphertext& b,
                          const BfvRelinKey& rk) const;
  BfvCiphertext rotate(const BfvCiphertext& a, int step, const BfvGaloisKeys& gk) const;

  PlainOperand make_plain_operand(const fp::SlotVector& v) const;

  // Measured invariant-noise headroom in bits (needs the secret key).
  double noise_budget(const BfvCiphertext& ct, const BfvSecretKey& sk) const;

  double fresh_budget_estimate() const;
  double headroom_bits() const;
  double combine_noise_add(double budget_a, double budget_b) const;
  double estimate_after_plain_mul(double budget, double max_centered) const;

 private:
  RnsPoly sample_uniform_q(SeedRng& rng, const RingSpace& rs) const;
  RnsPoly sample_cbd(SeedRng& rng, const RingSpace& rs) const;
  RnsPoly ternary_to_poly(const std::vector<signed char>& t, const RingSpace& rs) const;
  KswitchKey make_kswitch_key(const RnsPoly& target_qs_ntt, const BfvSecretKey& sk,
                              SeedRng& rng) const;
  // Switches `poly` (coeff form over q) to the secret key, returning the two
  // output components in coeff form over q.
  void apply_kswitch(const RnsPoly& poly, const KswitchKey& k, RnsPoly& out0,
                     RnsPoly& out1) const;
  RnsPoly decrypt_to_plain(const BfvCiphertext& ct, const BfvSecretKey& sk) const;
  void check_ct(const BfvCiphertext& a) const;

  std::shared_ptr<const BfvContext> ctx_;
};

// File container: magic "HHEF", version, object type, payload.
enum class ObjType : u8 {
  Params = 1,
  PublicKey = 2,
  SecretKey = 3,
  RelinKey = 4,
  GaloisKeys = 5,
  Ciphertext = 6,
  ServerShare = 7,
  ClientShare = 8,
};

void write_container_header(ByteWriter& w, ObjType type);
ObjType read_container_header(ByteReader& r);

void serialize_ciphertext(const BfvCiphertext& ct, ByteWriter& w);
BfvCiphertext deserialize_ciphertext(ByteReader& r);
void serialize_public_key(const BfvPublicKey& pk, ByteWriter& w);
BfvPublicKey deserialize_public_key(ByteReader& r);
void serialize_secret_key(const BfvSecretKey& sk, ByteWriter& w);
BfvSecretKey deserialize_secret_key(ByteReader& r, const BfvContext& ctx);
void serialize_kswitch(const KswitchKey& k, ByteWriter& w);
KswitchKey deserialize_kswitch(ByteReader& r);
void serialize_relin_key(const BfvRelinKey& rk, ByteWriter& w);
BfvRelinKey deserialize_relin_key(ByteReader& r);
void serialize_galois_keys(const BfvGaloisKeys& gk, ByteWriter& w);
BfvGaloisKeys deserialize_galois_keys(ByteReader& r);

}  // namespace hhefl
