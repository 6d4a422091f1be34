#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hhefl/bfv.hpp"

using namespace hhefl;

namespace {

std::shared_ptr<const BfvContext> ctx4096() {
  static auto ctx = std::make_shared<const BfvContext>(BfvParams::from_preset("n4096"));
  return ctx;
}

// Smallest preset whose headroom supports ct-ct multiplication.
std::shared_ptr<const BfvContext> ctx8192() {
  static auto ctx = std::make_shared<const BfvContext>(BfvParams::from_preset("n8192"));
  return ctx;
}

SeedRng rng_for(const std::string& d, u64 stream = 0) {
  return SeedRng(SeedRng::expand_seed(0xBF0BF), d, stream);
}

fp::SlotVector random_slots(SeedRng& rng, u32 n) {
  fp::SlotVector v(n);
  for (auto& x : v) x = rng.uniform(fp::kPrime);
  return v;
}

}  // namespace

TEST_CASE("keygen + encrypt/decrypt roundtrip") {
  BfvEngine eng(ctx4096());
  auto ks = eng.keygen({1, -1}, rng_for("kg"));
  auto rng = rng_for("roundtrip");
  for (int trial = 0; trial < 100; trial++) {
    auto v = random_slots(rng, eng.context().degree());
    auto ct = eng.encrypt(v, ks.pk, rng.fork("enc", trial));
    REQUIRE(eng.decrypt(ct, ks.sk) == v);
  }
}

TEST_CASE("keygen is deterministic under a seed") {
  BfvEngine eng(ctx4096());
  auto a = eng.keygen({1}, rng_for("det"));
  auto b = eng.keygen({1}, rng_for("det"));
  CHECK(a.sk.ternary == b.sk.ternary);
  CHECK(a.pk.pk0_ntt == b.pk.pk0_ntt);
  CHECK(a.relin.key.digits[0][0] == b.relin.key.digits[0][0]);
}

TEST_CASE("encryption is randomized") {
  BfvEngine eng(ctx4096());
  auto ks = eng.keygen({}, rng_for("rand"));
  fp::SlotVector v(16, 42);
  auto c1 = eng.encrypt(v, ks.pk, rng_for("enc", 1));
  auto c2 = eng.encrypt(v, ks.pk, rng_for("enc", 2));
  CHECK(c1.comps[0] != c2.comps[0]);
  CHECK(eng.decrypt(c1, ks.sk) == eng.decrypt(c2, ks.sk));
}

TEST_CASE("homomorphic add / plain ops match field arithmetic") {
  BfvEngine eng(ctx4096());
  auto ks = eng.keygen({}, rng_for("hom"));
  auto rng = rng_for("hom-data");
  u32 n = eng.context().degree();
  for (int trial = 0; trial < 20; trial++) {
    auto u = random_slots(rng, n);
    auto v = random_slots(rng, n);
    auto eu = eng.encrypt(u, ks.pk, rng.fork("e1", trial));
    auto ev = eng.encrypt(v, ks.pk, rng.fork("e2", trial));

    auto sum = eng.decrypt(eng.add(eu, ev), ks.sk);
    auto padd = eng.decrypt(eng.plain_add(eu, v), ks.sk);
    auto pmul = eng.decrypt(eng.plain_mul(eu, v), ks.sk);
    auto negd = eng.decrypt(eng.negate(eu), ks.sk);
    for (u32 i = 0; i < n; i++) {
      REQUIRE(sum[i] == fp::add(u[i], v[i]));
      REQUIRE(padd[i] == fp::add(u[i], v[i]));
      REQUIRE(pmul[i] == fp::mul(u[i], v[i]));
      REQUIRE(negd[i] == fp::neg(u[i]));
    }
  }
  // plain_mul by all-ones is the identity.
  auto u = random_slots(rng, n);
  auto eu = eng.encrypt(u, ks.pk, rng.fork("ones"));
  CHECK(eng.decrypt(eng.plain_mul(eu, fp::SlotVector(n, 1)), ks.sk) == u);
  // broadcast scalar multiply (the aggregation weighting path)
  auto scaled = eng.decrypt(eng.plain_mul(eu, fp::SlotVector(n, 7)), ks.sk);
  for (u32 i = 0; i < n; i++) REQUIRE(scaled[i] == fp::mul(u[i], 7));
}

TEST_CASE("ciphertext multiplication with relinearization") {
  BfvEngine eng(ctx8192());
  auto ks = eng.keygen({}, rng_for("mul"));
  auto rng = rng_for("mul-data");
  u32 n = eng.context().degree();
  for (int trial = 0; trial < 10; trial++) {
    auto u = random_slots(rng, n);
    auto v = random_slots(rng, n);
    auto eu = eng.encrypt(u, ks.pk, rng.fork("e1", trial));
    auto ev = eng.encrypt(v, ks.pk, rng.fork("e2", trial));
    auto prod = eng.mul_relin(eu, ev, ks.relin);
    CHECK(prod.size() == 2);
    auto got = eng.decrypt(prod, ks.sk);
    for (u32 i = 0; i < n; i++) REQUIRE(got[i] == fp::mul(u[i], v[i]));
  }
  // multiply by an encryption of ones is the identity
  auto u = random_slots(rng, n);
  auto eu = eng.encrypt(u, ks.pk, rng.fork("x"));
  auto eones = eng.encrypt(fp::SlotVector(n, 1), ks.pk, rng.fork("o"));
  CHECK(eng.decrypt(eng.mul_relin(eu, eones, ks.relin), ks.sk) == u);
}

TEST_CASE("rotations match the plaintext oracle") {
  BfvEngine eng(ctx4096());
  auto ks = eng.keygen({1, -1, 5, -5}, rng_for("rot"));
  auto rng = rng_for("rot-data");
  u32 n = eng.context().degree();
  auto v = random_slots(rng, n);
  auto ev = eng.encrypt(v, ks.pk, rng.fork("e"));
  for (int step : {1, -1, 5, -5}) {
    auto got = eng.decrypt(eng.rotate(ev, step, ks.galois), ks.sk);
    REQUIRE(got == BatchEncoder::rotate_rows(v, step, n));
  }
  // rotate by 0 is the identity without needing a key
  CHECK(eng.decrypt(eng.rotate(ev, 0, ks.galois), ks.sk) == v);
  // inverse rotations cancel
  auto back = eng.rotate(eng.rotate(ev, 5, ks.galois), -5, ks.galois);
  CHECK(eng.decrypt(back, ks.sk) == v);
  // undeclared step
  CHECK_THROWS_AS(eng.rotate(ev, 3, ks.galois), MissingKeyError);

  // spec example: [a,b,c,0,...] rotated by 1 -> [b,c,0,...,a] per row
  fp::SlotVector abc(n, 0);
  abc[0] = 10;
  abc[1] = 20;
  abc[2] = 30;
  auto eabc = eng.encrypt(abc, ks.pk, rng.fork("abc"));
  auto rot = eng.decrypt(eng.rotate(eabc, 1, ks.galois), ks.sk);
  CHECK(rot[0] == 20);
  CHECK(rot[1] == 30);
  CHECK(rot[2] == 0);
  CHECK(rot[n / 2 - 1] == 10);
}

TEST_CASE("noise budget is positive, monotone, and honest") {
  for (const auto& preset : BfvParams::preset_names()) {
    auto ctx = std::make_shared<const BfvContext>(BfvParams::from_preset(preset));
    BfvEngine eng(ctx);
    auto ks = eng.keygen({}, rng_for("nb-" + preset));
    auto rng = rng_for("nb-data");
    auto v = random_slots(rng, ctx->degree());
    auto ct = eng.encrypt(v, ks.pk, rng.fork("e"));
    double fresh = eng.noise_budget(ct, ks.sk);
    CHECK(fresh > 0.0);
    // the running estimate must stay at or below the measured budget
    CHECK(ct.budget_bits <= fresh);
    CHECK(ct.budget_bits > 0.0);

    auto sum = eng.add(ct, ct);
    double after_add = eng.noise_budget(sum, ks.sk);
    CHECK(after_add <= fresh);
    CHECK(fresh - after_add <= 2.0);  // adds are cheap

    if (preset != std::string("n4096")) {
      auto prod = eng.mul_relin(ct, ct, ks.relin);
      double after_mul = eng.noise_budget(prod, ks.sk);
      CHECK(after_mul < fresh);
      CHECK(prod.budget_bits <= after_mul);
    }
  }
}

TEST_CASE("forced exhaustion: measured budget zero implies decryption mismatch") {
  auto ctx = ctx8192();
  BfvEngine eng(ctx);
  auto ks = eng.keygen({}, rng_for("exhaust"));
  auto rng = rng_for("exhaust-data");
  auto v = random_slots(rng, ctx->degree());
  auto ct = eng.encrypt(v, ks.pk, rng.fork("e"));
  auto plain = v;
  int depth = 0;
  // Square until the measured budget collapses; then the plaintext must differ.
  while (eng.noise_budget(ct, ks.sk) > 0.0 && depth < 16) {
    ct = eng.mul_relin(ct, ct, ks.relin);
    for (auto& x : plain) x = fp::mul(x, x);
    depth++;
  }
  REQUIRE(depth < 16);
  CHECK(eng.noise_budget(ct, ks.sk) == 0.0);
  CHECK(eng.decrypt_raw(ct, ks.sk) != plain);
  // the conservative estimate must have hit zero no later than the truth
  CHECK(ct.budget_bits <= 0.0);
  CHECK_THROWS_AS(eng.decrypt(ct, ks.sk), NoiseBudgetError);
}

TEST_CASE("empirical multiplication depth per preset") {
  // The n16384 preset must cover the symmetric cipher's multiplicative depth
  // (5 ct-ct levels); smaller presets are probes only.
  struct Probe {
    const char* preset;
    int min_depth;
  };
  for (auto [preset, min_depth] : {Probe{"n8192", 1}, Probe{"n16384", 5}}) {
    auto ctx = std::make_shared<const BfvContext>(BfvParams::from_preset(preset));
    BfvEngine eng(ctx);
    auto ks = eng.keygen({}, rng_for(std::string("depth-") + preset));
    auto rng = rng_for("depth-data");
    fp::SlotVector v(ctx->degree(), 2);
    auto ct = eng.encrypt(v, ks.pk, rng.fork("e"));
    fp::SlotVector plain = v;
    int depth = 0;
    while (depth < min_depth) {
      ct = eng.mul_relin(ct, ct, ks.relin);
      for (auto& x : plain) x = fp::mul(x, x);
      depth++;
      REQUIRE(eng.decrypt_raw(ct, ks.sk) == plain);
      REQUIRE(eng.noise_budget(ct, ks.sk) > 0.0);
    }
  }
}

TEST_CASE("key and ciphertext serialization round-trips bit-exactly") {
  auto ctx = ctx4096();
  BfvEngine eng(ctx);
  auto ks = eng.keygen({1, -1}, rng_for("ser"));
  auto rng = rng_for("ser-data");
  auto v = random_slots(rng, ctx->degree());
  auto ct = eng.encrypt(v, ks.pk, rng.fork("e"));

  ByteWriter w;
  write_container_header(w, ObjType::Ciphertext);
  serialize_ciphertext(ct, w);
  ByteReader r(w.data());
  CHECK(read_container_header(r) == ObjType::Ciphertext);
  auto ct2 = deserialize_ciphertext(r);
  CHECK(ct.comps == ct2.comps);
  CHECK(r.done());

  ByteWriter wk;
  serialize_public_key(ks.pk, wk);
  serialize_secret_key(ks.sk, wk);
  serialize_relin_key(ks.relin, wk);
  serialize_galois_keys(ks.galois, wk);
  ByteReader rk(wk.data());
  auto pk2 = deserialize_public_key(rk);
  auto sk2 = deserialize_secret_key(rk, *ctx);
  auto rl2 = deserialize_relin_key(rk);
  auto gk2 = deserialize_galois_keys(rk);
  CHECK(rk.done());
  CHECK(pk2.pk0_ntt == ks.pk.pk0_ntt);
  CHECK(sk2.ternary == ks.sk.ternary);
  CHECK(sk2.s_qs_ntt == ks.sk.s_qs_ntt);
  CHECK(rl2.key.digits.size() == ks.relin.key.digits.size());
  CHECK(gk2.steps == ks.galois.steps);
  // the reread secret key still decrypts
  CHECK(eng.decrypt(ct2, sk2) == v);
}

TEST_CASE("unknown preset is a parameter error") {
  CHECK_THROWS_AS(BfvParams::from_preset("n1024"), ParameterError);
}
