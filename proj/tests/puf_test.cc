/*
 *
 * Copyright 2026 The trctee Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "trctee/puf.h"

#include <gtest/gtest.h>

#include <random>
#include <set>

namespace trctee {
namespace {

Key32 SeedOf(uint8_t base) {
  Key32 k;
  for (int i = 0; i < 32; ++i) k[i] = uint8_t(base + i);
  return k;
}

TEST(Puf, Deterministic) {
  PufDevice d(SeedOf(0));
  PufChallenge c{1, 2, 3, 4};
  EXPECT_EQ(d.Respond(c), d.Respond(c));
}

TEST(Puf, FixedVectorUnderTestSeed) {
  // HMAC-SHA256(seed = 00..1f, "trctee-sram-puf" || 00000000), computed with
  // Python's hmac module.
  PufDevice d(SeedOf(0));
  EXPECT_EQ(ToHex(d.Respond(kAutoChallenge)),
            "32c8f5e396d92484717c53f2c36d2f16a62201fc78a01242d8681fa41c5c9db1");
}

TEST(Puf, DistinctSeedsDisagreeOnEnrolledChallenges) {
  std::vector<PufDevice> devices;
  for (uint8_t s = 0; s < 16; ++s) devices.emplace_back(SeedOf(s * 7 + 1));
  Drbg rng(1, "puf-test");
  CrpStore crps = *EnrollCrps(devices[0], 64, rng);
  std::set<PufResponse> seen;
  for (const auto& r : crps.records()) {
    for (const auto& d : devices) {
      EXPECT_TRUE(seen.insert(d.Respond(r.challenge)).second);
    }
  }
}

TEST(CrpStore, EnrollOne) {
  PufDevice d(SeedOf(3));
  Drbg rng(2, "t");
  EXPECT_EQ(EnrollCrps(d, 1, rng)->size(), 1u);
}

TEST(CrpStore, EnrollHundredDistinctAndFaithful) {
  PufDevice d(SeedOf(3));
  Drbg rng(2, "t");
  CrpStore s = *EnrollCrps(d, 100, rng);
  std::set<PufChallenge> cs;
  for (const auto& r : s.records()) {
    cs.insert(r.challenge);
    EXPECT_NE(r.challenge, kAutoChallenge);
    EXPECT_EQ(d.Respond(r.challenge), r.response);
    EXPECT_FALSE(r.used);
  }
  EXPECT_EQ(cs.size(), 100u);
}

TEST(CrpStore, TakeUnusedThenExhausted) {
  PufDevice d(SeedOf(4));
  Drbg rng(3, "t");
  CrpStore s = *EnrollCrps(d, 1, rng);
  auto first = s.TakeUnused();
  ASSERT_TRUE(first.ok());
  EXPECT_EQ(first->challenge, s.records()[0].challenge);
  EXPECT_EQ(s.TakeUnused().status().code(), ErrorCode::kExhausted);
  CrpStore empty(CrpOwner::kUser);
  EXPECT_EQ(empty.TakeUnused().status().code(), ErrorCode::kExhausted);
}

TEST(CrpStore, NTakesGiveNDistinct) {
  PufDevice d(SeedOf(5));
  Drbg rng(4, "t");
  CrpStore s = *EnrollCrps(d, 50, rng);
  std::set<PufChallenge> got;
  for (int i = 0; i < 50; ++i) got.insert(s.TakeUnused()->challenge);
  EXPECT_EQ(got.size(), 50u);
  EXPECT_EQ(s.unused_count(), 0u);
}

TEST(CrpStore, TakeChallenge) {
  PufDevice d(SeedOf(6));
  Drbg rng(5, "t");
  CrpStore s = *EnrollCrps(d, 5, rng);
  PufChallenge c = s.records()[3].challenge;
  EXPECT_TRUE(s.TakeChallenge(c).ok());
  EXPECT_EQ(s.TakeChallenge(c).status().code(), ErrorCode::kAlreadyUsed);
  EXPECT_EQ(s.TakeChallenge({9, 9, 9, 9}).status().code(),
            ErrorCode::kNotFound);
}

TEST(CrpStore, DuplicateAddRejected) {
  CrpStore s(CrpOwner::kTtp);
  EXPECT_TRUE(s.Add({{1, 1, 1, 1}, {}, false}).ok());
  EXPECT_EQ(s.Add({{1, 1, 1, 1}, {}, false}).code(),
            ErrorCode::kInvalidArgument);
}

TEST(CrpStore, SplitIsDisjoint) {
  PufDevice d(SeedOf(7));
  Drbg rng(6, "t");
  CrpStore pool = *EnrollCrps(d, 40, rng);
  CrpStore a = *pool.SplitUnused(10, CrpOwner::kUser);
  CrpStore b = *pool.SplitUnused(10, CrpOwner::kUser);
  std::set<PufChallenge> all;
  for (const auto* s : {&pool, &a, &b}) {
    for (const auto& r : s->records())
      EXPECT_TRUE(all.insert(r.challenge).second);
  }
  EXPECT_EQ(all.size(), 40u);
}

TEST(CrpStore, SerializeRoundTripKeepsUsedFlags) {
  PufDevice d(SeedOf(8));
  Drbg rng(7, "t");
  CrpStore s = *EnrollCrps(d, 10, rng);
  (void)s.TakeUnused();
  (void)s.TakeUnused();
  auto back = CrpStore::Parse(s.Serialize(), CrpOwner::kUser);
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->records(), s.records());
  EXPECT_EQ(back->unused_count(), 8u);
  EXPECT_FALSE(CrpStore::Parse("zz 00 0\n", CrpOwner::kUser).ok());
}

// Single use across random interleavings of auto and explicit takes.
TEST(CrpStoreProperty, NoChallengeReturnedTwice) {
  std::mt19937_64 mt(11);
  for (int trial = 0; trial < 100; ++trial) {
    PufDevice d(SeedOf(uint8_t(trial)));
    Drbg rng(trial, "t");
    CrpStore s = *EnrollCrps(d, 20, rng);
    std::set<PufChallenge> handed;
    for (int i = 0; i < 40; ++i) {
      StatusOr<CrpRecord> r =
          mt() % 2 ? s.TakeUnused()
                   : s.TakeChallenge(s.records()[mt() % 20].challenge);
      if (r.ok()) EXPECT_TRUE(handed.insert(r->challenge).second);
    }
    EXPECT_EQ(handed.size() + s.unused_count(), 20u);
  }
}

}  // namespace
}  // namespace trctee
