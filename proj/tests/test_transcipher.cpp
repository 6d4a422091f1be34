#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hhefl/transcipher.hpp"

using namespace hhefl;
using namespace hhefl::pasta;

namespace {

std::shared_ptr<const BfvContext> ctx16384() {
  static auto ctx = std::make_shared<const BfvContext>(BfvParams::from_preset("n16384"));
  return ctx;
}

SeedRng rng_for(const std::string& d) { return SeedRng(SeedRng::expand_seed(0x7E5D), d); }

struct Fixture {
  Variant v;
  BfvEngine eng;
  BfvKeySet ks;
  HesdContext hesd;

  explicit Fixture(const Variant& variant, const std::string& seed_domain)
      : v(variant),
        eng(ctx16384()),
        ks(eng.keygen(HesdContext::required_rotation_steps(variant), rng_for(seed_domain))),
        hesd(ctx16384(), variant, ks.relin, ks.galois) {}

  BfvCiphertext encrypt_key(const Key& k, u64 stream) {
    fp::SlotVector slots(k.begin(), k.end());
    return eng.encrypt(slots, ks.pk, rng_for("enc-key").fork("s", stream));
  }
};

Variant tiny() { return Variant{4, 3, "tiny4"}; }

}  // namespace

TEST_CASE("he_keystream matches the plaintext keystream (tiny variant)") {
  Fixture f(tiny(), "kg-tiny");
  auto rng = rng_for("tiny-data");
  for (int trial = 0; trial < 4; trial++) {
    Key k = random_key(f.v, rng);
    f.hesd.set_encrypted_key(f.encrypt_key(k, trial));
    BlockNonce nonce = make_nonce(trial, 17, trial * 5);
    auto ct = f.hesd.he_keystream(nonce);
    auto slots = f.eng.decrypt(ct, f.ks.sk);
    auto expect = keystream_block(k, nonce, f.v);
    for (u32 i = 0; i < f.v.t; i++) REQUIRE(slots[i] == expect[i]);
    // every slot past t decrypts to zero
    for (u32 i = f.v.t; i < ctx16384()->degree(); i++) REQUIRE(slots[i] == 0);
  }
}

TEST_CASE("hesd_block inverts sym_encrypt and leaves budget") {
  Fixture f(tiny(), "kg-tiny2");
  auto rng = rng_for("block-data");
  Key k = random_key(f.v, rng);
  f.hesd.set_encrypted_key(f.encrypt_key(k, 0));
  for (int trial = 0; trial < 3; trial++) {
    std::vector<u64> m(f.v.t);
    for (auto& x : m) x = rng.uniform(fp::kPrime);
    auto chunk = sym_encrypt(m, k, make_nonce(1, 2, trial), f.v);
    auto out = f.hesd.hesd_block(chunk, 1, 2);
    auto slots = f.eng.decrypt(out.ct, f.ks.sk);
    for (u32 i = 0; i < f.v.t; i++) REQUIRE(slots[i] == m[i]);
    for (u32 i = f.v.t; i < 4 * f.v.t; i++) REQUIRE(slots[i] == 0);
    CHECK(out.counter == chunk.counter);
    CHECK(out.eval_ms > 0.0);
    // measured headroom stays positive after a full block evaluation
    CHECK(f.eng.noise_budget(out.ct, f.ks.sk) > 0.0);
  }
  // all-zero payload decrypts to all zeros
  std::vector<u64> zeros(f.v.t, 0);
  auto chunk = sym_encrypt(zeros, k, make_nonce(1, 2, 9), f.v);
  auto slots = f.eng.decrypt(f.hesd.hesd_block(chunk, 1, 2).ct, f.ks.sk);
  for (u32 i = 0; i < 8 * f.v.t; i++) REQUIRE(slots[i] == 0);
}

TEST_CASE("key switching between two clients keeps plaintexts separate") {
  Fixture f(tiny(), "kg-switch");
  auto rng = rng_for("switch-data");
  Key ka = random_key(f.v, rng);
  Key kb = random_key(f.v, rng);
  std::vector<u64> ma(f.v.t), mb(f.v.t);
  for (auto& x : ma) x = rng.uniform(fp::kPrime);
  for (auto& x : mb) x = rng.uniform(fp::kPrime);
  auto ca = sym_encrypt(ma, ka, make_nonce(1, 100, 0), f.v);
  auto cb = sym_encrypt(mb, kb, make_nonce(1, 200, 0), f.v);

  f.hesd.set_encrypted_key(f.encrypt_key(ka, 1));
  auto outa = f.hesd.hesd_block(ca, 1, 100);
  f.hesd.set_encrypted_key(f.encrypt_key(kb, 2));
  auto outb = f.hesd.hesd_block(cb, 1, 200);

  auto sa = f.eng.decrypt(outa.ct, f.ks.sk);
  auto sb = f.eng.decrypt(outb.ct, f.ks.sk);
  for (u32 i = 0; i < f.v.t; i++) {
    REQUIRE(sa[i] == ma[i]);
    REQUIRE(sb[i] == mb[i]);
  }
  // re-setting the same key is idempotent
  auto ekb = f.encrypt_key(kb, 3);
  f.hesd.set_encrypted_key(ekb);
  auto again1 = f.eng.decrypt(f.hesd.hesd_block(cb, 1, 200).ct, f.ks.sk);
  f.hesd.set_encrypted_key(ekb);
  auto again2 = f.eng.decrypt(f.hesd.hesd_block(cb, 1, 200).ct, f.ks.sk);
  CHECK(again1 == again2);
}

TEST_CASE("hesd_chunks: order, counters, emptiness, parallel equals serial") {
  Fixture f(tiny(), "kg-chunks");
  auto rng = rng_for("chunks-data");
  Key k = random_key(f.v, rng);
  f.hesd.set_encrypted_key(f.encrypt_key(k, 0));

  std::vector<std::vector<u64>> plains;
  std::vector<SymCiphertextChunk> chunks;
  for (u64 c = 0; c < 3; c++) {
    std::vector<u64> m(f.v.t);
    for (auto& x : m) x = rng.uniform(fp::kPrime);
    plains.push_back(m);
    chunks.push_back(sym_encrypt(m, k, make_nonce(4, 5, c), f.v));
  }
  auto serial = f.hesd.hesd_chunks_serial(chunks, 4, 5);
  auto parallel = f.hesd.hesd_chunks(chunks, 4, 5, 2);
  REQUIRE(serial.size() == 3);
  REQUIRE(parallel.size() == 3);
  for (std::size_t i = 0; i < 3; i++) {
    auto s = f.eng.decrypt(serial[i].ct, f.ks.sk);
    for (u32 j = 0; j < f.v.t; j++) REQUIRE(s[j] == plains[i][j]);
    // OpenMP and serial paths must agree bit-exactly
    REQUIRE(serial[i].ct.comps == parallel[i].ct.comps);
  }

  CHECK(f.hesd.hesd_chunks({}, 4, 5).empty());

  auto gap = chunks;
  gap[2].counter = 7;
  CHECK_THROWS_AS(f.hesd.hesd_chunks(gap, 4, 5), ProtocolError);
}

TEST_CASE("pasta4 oracle equivalence (production variant)") {
  Fixture f(Variant::pasta4(), "kg-p4");
  auto rng = rng_for("p4-data");
  Key k = random_key(f.v, rng);
  f.hesd.set_encrypted_key(f.encrypt_key(k, 0));
  std::vector<u64> m(f.v.t);
  for (auto& x : m) x = rng.uniform(fp::kPrime);
  auto chunk = sym_encrypt(m, k, make_nonce(3, 9, 0), f.v);
  auto out = f.hesd.hesd_block(chunk, 3, 9);
  auto slots = f.eng.decrypt(out.ct, f.ks.sk);
  for (u32 i = 0; i < f.v.t; i++) REQUIRE(slots[i] == m[i]);
  double left = f.eng.noise_budget(out.ct, f.ks.sk);
  CHECK(left > 0.0);
  MESSAGE("pasta4 block: ", out.eval_ms, " ms, leftover budget ", left, " bits");
}

TEST_CASE("context validates keys and state") {
  auto v = tiny();
  BfvEngine eng(ctx16384());
  auto steps = HesdContext::required_rotation_steps(v);
  // required steps include the replication, mixing, and feistel shifts
  CHECK(steps.count(-static_cast<int>(2 * v.t)) == 1);
  CHECK(steps.count(static_cast<int>(v.t)) == 1);
  CHECK(steps.count(-static_cast<int>(v.t)) == 1);
  CHECK(steps.count(-1) == 1);

  auto ks = eng.keygen({1}, rng_for("kg-missing"));
  CHECK_THROWS_AS(HesdContext(ctx16384(), v, ks.relin, ks.galois), MissingKeyError);

  auto full = eng.keygen(steps, rng_for("kg-full"));
  HesdContext ctx(ctx16384(), v, full.relin, full.galois);
  CHECK_THROWS_AS(ctx.he_keystream(make_nonce(0, 0, 0)), MissingKeyError);
}
