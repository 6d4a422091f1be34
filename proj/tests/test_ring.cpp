#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hhefl/fp.hpp"
#include "hhefl/ring.hpp"
#include "hhefl/shake.hpp"
#include "oracles.hpp"

using namespace hhefl;

namespace {

SeedRng test_rng(const std::string& domain) {
  return SeedRng(SeedRng::expand_seed(0xF1E1D), domain);
}

RnsPoly random_poly(const RingSpace& rs, SeedRng& rng) {
  RnsPoly p(rs.degree(), static_cast<u32>(rs.levels()), false);
  for (u32 l = 0; l < p.levels; l++) {
    u64* r = p.res(l);
    for (u32 i = 0; i < p.n; i++) r[i] = rng.uniform(rs.mod(l).value());
  }
  return p;
}

}  // namespace

TEST_CASE("field ops mod 65537") {
  CHECK(fp::add(65536, 1) == 0);
  CHECK(fp::pow(2, 3) == 8);
  CHECK(fp::sub(0, 1) == 65536);
  auto rng = test_rng("fp");
  for (int i = 0; i < 100; i++) {
    u64 x = rng.uniform(fp::kPrime);
    CHECK(fp::mul(x, 1) == x);
    if (x != 0) CHECK(fp::mul(x, fp::inv(x)) == 1);
  }
  // Fermat exponent sanity for the field size.
  CHECK(fp::pow(3, fp::kPrime - 1) == 1);
}

TEST_CASE("ntt forward/inverse roundtrip") {
  auto rng = test_rng("ntt");
  for (u32 n : {16u, 64u, 1024u}) {
    RingSpace rs(n, {0x3fffffffffff0001ULL, 65537ULL});
    for (int trial = 0; trial < 100; trial++) {
      RnsPoly a = random_poly(rs, rng);
      RnsPoly b = a;
      ntt_forward(rs, b);
      CHECK(b.ntt_form);
      ntt_inverse(rs, b);
      REQUIRE(b == a);
    }
    RnsPoly zero(n, static_cast<u32>(rs.levels()), false);
    RnsPoly z2 = zero;
    ntt_forward(rs, z2);
    ntt_inverse(rs, z2);
    CHECK(z2 == zero);
  }
}

TEST_CASE("ntt rejects wrong-domain input and bad modulus") {
  RingSpace rs(16, {65537ULL});
  RnsPoly a(16, 1, false);
  ntt_forward(rs, a);
  CHECK_THROWS_AS(ntt_forward(rs, a), ParameterError);
  ntt_inverse(rs, a);
  CHECK_THROWS_AS(ntt_inverse(rs, a), ParameterError);
  // 7681 = 1 + 512*15: supports 2N = 512 but not 2N = 32768.
  CHECK_THROWS_AS(RingSpace(16384, {7681ULL}), ParameterError);
}

TEST_CASE("ring_mul matches schoolbook oracle") {
  auto rng = test_rng("ringmul");
  for (u32 n : {16u, 32u}) {
    RingSpace rs(n, {0x3fffffffffff0001ULL});
    u64 q = rs.mod(0).value();
    for (int trial = 0; trial < 1000; trial++) {
      RnsPoly a = random_poly(rs, rng);
      RnsPoly b = random_poly(rs, rng);
      RnsPoly c = ring_mul(rs, a, b);
      std::vector<u64> va(a.res(0), a.res(0) + n);
      std::vector<u64> vb(b.res(0), b.res(0) + n);
      auto expect = oracle::negacyclic_schoolbook(va, vb, q);
      for (u32 i = 0; i < n; i++) REQUIRE(c.res(0)[i] == expect[i]);
    }

    // X * X^(n-1) = X^n = -1: negacyclic wrap.
    RnsPoly x(n, 1, false), xn1(n, 1, false);
    x.res(0)[1] = 1;
    xn1.res(0)[n - 1] = 1;
    RnsPoly w = ring_mul(rs, x, xn1);
    CHECK(w.res(0)[0] == q - 1);
    for (u32 i = 1; i < n; i++) CHECK(w.res(0)[i] == 0);

    // Multiplicative identity.
    RnsPoly one(n, 1, false);
    one.res(0)[0] = 1;
    RnsPoly a = random_poly(rs, rng);
    CHECK(ring_mul(rs, a, one) == a);
  }
}

TEST_CASE("mrc digits reconstruct values and detect sign") {
  std::vector<u64> primes = {0x3fffffffffff0001ULL, 0x3ffffffffffe8001ULL,
                             0x3fffffffffe80001ULL};
  MrcBase base(primes);
  auto rng = test_rng("mrc");
  Modulus target(0xfffffffff78001ULL);
  auto ev = base.make_eval(target);
  for (int trial = 0; trial < 200; trial++) {
    // Small values round-trip exactly through digits.
    u64 v = rng.next_u64() >> 1;
    std::vector<u64> res(primes.size()), digits(primes.size());
    for (std::size_t i = 0; i < primes.size(); i++) res[i] = base.mod(i).reduce(v);
    base.to_digits(res.data(), digits.data());
    CHECK(base.digits_negative(digits.data()) == false);
    CHECK(base.eval_digits(digits.data(), ev) == target.reduce(v));
    // -v must evaluate (signed) to target - v.
    for (std::size_t i = 0; i < primes.size(); i++) res[i] = base.mod(i).neg(res[i]);
    base.to_digits(res.data(), digits.data());
    if (v != 0) {
      CHECK(base.digits_negative(digits.data()) == true);
      CHECK(base.eval_digits_signed(digits.data(), ev) == target.sub(0, target.reduce(v)));
    }
  }
}

TEST_CASE("batch encode/decode is the identity") {
  for (u32 n : {16u, 4096u}) {
    BatchEncoder enc(n);
    auto rng = test_rng("batch");
    for (int trial = 0; trial < 20; trial++) {
      fp::SlotVector v(n);
      for (auto& x : v) x = rng.uniform(fp::kPrime);
      CHECK(enc.decode(enc.encode(v)) == v);
    }
    fp::SlotVector zeros(n, 0);
    RnsPoly zp = enc.encode(zeros);
    for (u32 i = 0; i < n; i++) CHECK(zp.res(0)[i] == 0);
    fp::SlotVector small = {1, 2, 3};
    auto dec = enc.decode(enc.encode(small));
    CHECK(dec[0] == 1);
    CHECK(dec[3] == 0);
    fp::SlotVector too_big(n + 1, 0);
    CHECK_THROWS_AS(enc.encode(too_big), CapacityError);
  }
}

TEST_CASE("batching is a slot-wise ring isomorphism") {
  u32 n = 64;
  BatchEncoder enc(n);
  RingSpace rs(n, {fp::kPrime});
  auto rng = test_rng("batch-iso");
  for (int trial = 0; trial < 1000; trial++) {
    fp::SlotVector u(n), v(n);
    for (auto& x : u) x = rng.uniform(fp::kPrime);
    for (auto& x : v) x = rng.uniform(fp::kPrime);
    RnsPoly pu = enc.encode(u), pv = enc.encode(v);
    RnsPoly sum;
    poly_add(rs, pu, pv, sum);
    auto dsum = enc.decode(sum);
    RnsPoly prod = ring_mul(rs, pu, pv);
    auto dprod = enc.decode(prod);
    for (u32 i = 0; i < n; i++) {
      REQUIRE(dsum[i] == fp::add(u[i], v[i]));
      REQUIRE(dprod[i] == fp::mul(u[i], v[i]));
    }
  }
}

TEST_CASE("galois substitution rotates rows") {
  u32 n = 16;
  BatchEncoder enc(n);
  RingSpace rs(n, {fp::kPrime});
  fp::SlotVector v(n);
  for (u32 i = 0; i < n; i++) v[i] = i + 1;
  for (int step : {1, 2, 3, -1, -3, 0, 7}) {
    RnsPoly p = enc.encode(v);
    RnsPoly rotated;
    apply_galois_coeff(rs, p, enc.galois_elt_for_step(step), rotated);
    auto got = enc.decode(rotated);
    auto expect = BatchEncoder::rotate_rows(v, step, n);
    CHECK(got == expect);
  }
}

TEST_CASE("poly serialization is bit-exact") {
  RingSpace rs(32, {0x3fffffffffff0001ULL, 65537ULL});
  auto rng = test_rng("ser");
  RnsPoly a = random_poly(rs, rng);
  ByteWriter w;
  serialize_poly(a, w);
  ByteReader r(w.data());
  RnsPoly b = deserialize_poly(r);
  CHECK(a == b);
  CHECK(r.done());
}

TEST_CASE("shake128 known answer") {
  // SHAKE128(""), first 16 bytes: 7f9c2ba4e88f827d616045507605853e.
  Shake x(Shake::Kind::Shake128);
  u8 out[16];
  x.squeeze(out, 16);
  const u8 expect[16] = {0x7f, 0x9c, 0x2b, 0xa4, 0xe8, 0x8f, 0x82, 0x7d,
                         0x61, 0x60, 0x45, 0x50, 0x76, 0x05, 0x85, 0x3e};
  for (int i = 0; i < 16; i++) CHECK(out[i] == expect[i]);
}

TEST_CASE("seeded rng reproduces and separates domains") {
  auto a1 = SeedRng(SeedRng::expand_seed(7), "x");
  auto a2 = SeedRng(SeedRng::expand_seed(7), "x");
  auto b = SeedRng(SeedRng::expand_seed(7), "y");
  CHECK(a1.next_u64() == a2.next_u64());
  CHECK(a1.next_u64() != b.next_u64());
  auto rng = test_rng("bounds");
  for (int i = 0; i < 1000; i++) CHECK(rng.uniform(97) < 97);
}
