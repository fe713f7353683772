#include <set>

#include <gtest/gtest.h>

#include "integrity/integrity.hpp"

namespace oope::integ {
namespace {

const MacParams& params() {
  static Rng rng = Rng::from_seed(1, "integrity-test");
  static const MacParams p = generate_params(512, 160, rng);
  return p;
}

const hom::PrivateKey& key() {
  static Rng rng = Rng::from_seed(2, "integrity-test");
  static const hom::PrivateKey sk = hom::keygen(256, rng, {.allow_test_sizes = true});
  return sk;
}

TEST(Params, GeneratedGroupIsValid) {
  const auto& p = params();
  EXPECT_EQ(mpz_sizeinbase(p.p.get_mpz_t(), 2), 512u);
  EXPECT_EQ(mpz_sizeinbase(p.q.get_mpz_t(), 2), 160u);
  EXPECT_TRUE(validate_params(p));
  MacParams broken = p;
  broken.h = 1;
  EXPECT_FALSE(validate_params(broken));
}

TEST(Params, ProductionSize) {
  Rng rng = Rng::from_seed(3, "integrity-test");
  MacParams p = generate_params(2048, 256, rng);
  EXPECT_EQ(mpz_sizeinbase(p.p.get_mpz_t(), 2), 2048u);
  EXPECT_EQ(mpz_sizeinbase(p.q.get_mpz_t(), 2), 256u);
  EXPECT_TRUE(validate_params(p));
}

TEST(Params, SerializationRoundTrip) {
  MacParams back = MacParams::parse(params().serialize());
  EXPECT_EQ(back.p, params().p);
  EXPECT_EQ(back.h, params().h);
}

TEST(DlMac, ZeroOffset) {
  Rng rng = Rng::from_seed(4, "dl");
  mpz_class x = rng.below(mpz_class(1) << 32);
  mpz_class mac = dl_mac_make(x, params());
  EXPECT_TRUE(dl_mac_verify(mac, 0, mac, params()));
}

TEST(DlMac, HonestRounds) {
  Rng rng = Rng::from_seed(5, "dl");
  for (int i = 0; i < 100; ++i) {
    mpz_class x = rng.below(mpz_class(1) << 32);
    mpz_class r = rng.below(mpz_class(1) << 64);
    EXPECT_TRUE(dl_mac_verify(dl_mac_make(x, params()), r, dl_response(x + r, params()), params()));
  }
}

TEST(DlMac, SubstitutedNodeFails) {
  Rng rng = Rng::from_seed(6, "dl");
  for (int i = 0; i < 100; ++i) {
    mpz_class x = rng.below(mpz_class(1) << 32);
    mpz_class x2 = rng.below(mpz_class(1) << 32);
    if (x == x2) continue;
    mpz_class r = rng.below(mpz_class(1) << 64);
    EXPECT_FALSE(dl_mac_verify(dl_mac_make(x, params()), r, dl_response(x2 + r, params()), params()));
  }
}

TEST(DlMac, MissingParamsIsUsageError) {
  MacParams none;
  try {
    dl_mac_make(1, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::usage);
  }
  EXPECT_THROW(ped_verify(1, 1, 1, 1, none), Error);
}

TEST(Pedersen, ZeroOffsetsMatchCommitment) {
  mpz_class c = ped_commit_make(25, 12345, params());
  EXPECT_TRUE(ped_verify(c, 0, 0, c, params()));
}

TEST(Pedersen, HonestRoundsAndTamper) {
  Rng rng = Rng::from_seed(7, "ped");
  for (int i = 0; i < 100; ++i) {
    mpz_class x = rng.below(mpz_class(1) << 32);
    mpz_class a = rng.below(params().q);
    mpz_class r = rng.below(mpz_class(1) << 64), r2 = rng.below(mpz_class(1) << 64);
    mpz_class c = ped_commit_make(x, a, params());
    EXPECT_TRUE(ped_verify(c, r, r2, ped_response(x + r, a + r2, params()), params()));
    EXPECT_FALSE(ped_verify(c, r, r2, ped_response(x + 1 + r, a + r2, params()), params()));
    EXPECT_FALSE(ped_verify(c, r, r2, ped_response(x + r, a + 1 + r2, params()), params()));
  }
}

TEST(Pedersen, CommitmentsToFixedValueAreDistinct) {
  Rng rng = Rng::from_seed(8, "ped");
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) seen.insert(ped_commit_make(7, rng.below(params().q), params()).get_str(16));
  EXPECT_EQ(seen.size(), 200u);
}

TEST(Tag, SchemesPopulateExpectedFields) {
  Rng rng = Rng::from_seed(9, "tag");
  const auto& pk = key().public_key();
  EXPECT_EQ(make_tag(Scheme::off, 5, params(), pk, rng), NodeTag{});
  NodeTag dl = make_tag(Scheme::dlmac, 5, params(), pk, rng);
  EXPECT_EQ(*dl.dl_mac, dl_mac_make(5, params()));
  NodeTag ped = make_tag(Scheme::pedersen, 5, params(), pk, rng);
  ASSERT_TRUE(ped.ped_commit && ped.ped_a);
  mpz_class a = key().decrypt(*ped.ped_a);
  EXPECT_EQ(*ped.ped_commit, ped_commit_make(5, a, params()));
}

TEST(Scheme, ParseNames) {
  EXPECT_EQ(parse_scheme("pedersen"), Scheme::pedersen);
  EXPECT_EQ(scheme_name(Scheme::dlmac), "dlmac");
  EXPECT_THROW(parse_scheme("hmac"), Error);
}

}  // namespace
}  // namespace oope::integ
