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

#include "trctee/handshake.h"

#include <gtest/gtest.h>

#include "trctee/ttp.h"

namespace trctee {
namespace {

struct Parties {
  Ttp ttp;
  PufDevice puf;
  VtpmBundle bundle;
  DeviceProvisioning prov;

  explicit Parties(uint64_t seed)
      : ttp(Drbg(seed, "ttp"), TtpOptions{64, 16}),
        puf(Drbg(seed, "puf").Array<32>()) {
    ttp.RegisterUser("alice");
    (void)ttp.EnrollDevice("dev", puf, MakeGoldenBootImage(ttp.public_key()));
    bundle = *ttp.EnrollVtpm("alice");
    prov = *ttp.ProvisionUser("alice", "dev");
  }
};

// Where a run stopped, and with what.
struct Outcome {
  Status initiator = Status::Ok();
  Status responder = Status::Ok();
  bool both_established = false;
};

using Mutator = std::function<void(int step, Bytes& msg)>;

// Carries messages between the two state machines. `mutate` sees every
// message in flight; step numbers are 1, 2, 3, 5, 8, 9.
Outcome Shuttle(HandshakeInitiator& init, HandshakeResponder& resp,
                const Mutator& mutate = nullptr) {
  Outcome out;
  Bytes msg = init.Start();
  for (int round = 0; round < 4; ++round) {
    if (mutate) mutate(msg[1], msg);
    auto step = resp.OnMessage(msg);
    out.responder = step.status;
    if (!step.reply) break;
    Bytes reply = *step.reply;
    if (mutate) mutate(reply[1], reply);
    auto next = init.OnMessage(reply);
    if (!next.ok()) {
      out.initiator = next.status();
      break;
    }
    if (!*next) break;
    msg = **next;
  }
  out.both_established = init.established() && resp.established();
  return out;
}

TEST(Handshake, HonestRunAgreesOnKey) {
  Parties p(1);
  Drbg vr(1, "v"), dr(1, "d");
  ResponderMemory mem;
  HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
  HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
  Outcome o = Shuttle(init, resp);
  ASSERT_TRUE(o.both_established)
      << o.initiator.ToString() << o.responder.ToString();
  EXPECT_EQ(init.session().state().sess_key, resp.session().state().sess_key);
  EXPECT_EQ(init.session().state().epoch, 0u);
  EXPECT_EQ(init.session().state().role, SessionRole::kVtpm);
  EXPECT_EQ(resp.session().state().role, SessionRole::kTmm);
  ASSERT_TRUE(init.consumed_crp().has_value());
  EXPECT_EQ(p.prov.crps.unused_count(), 15u);
  EXPECT_EQ(mem.used_challenges.count(init.consumed_crp()->challenge), 1u);
  EXPECT_EQ(resp.peer_key(), p.bundle.tpm_key.public_key);
}

TEST(Handshake, BadCert) {
  Parties p(2);
  p.bundle.cert.signature[5] ^= 0x01;
  Drbg vr(1, "v"), dr(1, "d");
  ResponderMemory mem;
  HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
  HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
  Outcome o = Shuttle(init, resp);
  EXPECT_FALSE(init.established());
  EXPECT_EQ(o.responder.code(), ErrorCode::kBadCert);
  EXPECT_EQ(p.prov.crps.unused_count(), 16u);
}

TEST(Handshake, MaliciousDeviceIsPufMismatch) {
  Parties p(3);
  PufDevice fake(Drbg(99, "other").Array<32>());
  Drbg vr(1, "v"), dr(1, "d");
  ResponderMemory mem;
  HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
  HandshakeResponder resp("dev", p.ttp.public_key(), fake, dr, mem);
  Outcome o = Shuttle(init, resp);
  EXPECT_FALSE(init.established());
  EXPECT_EQ(o.initiator.code(), ErrorCode::kPufMismatch);
}

TEST(Handshake, ReplayedHelloIsStaleNonce) {
  Parties p(4);
  Drbg vr(1, "v"), dr(1, "d");
  ResponderMemory mem;
  HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
  HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
  Bytes m1;
  Shuttle(init, resp, [&](int step, Bytes& m) {
    if (step == 1) m1 = m;
  });
  HandshakeResponder again("dev", p.ttp.public_key(), p.puf, dr, mem);
  auto step = again.OnMessage(m1);
  EXPECT_EQ(step.status.code(), ErrorCode::kStaleNonce);
}

TEST(Handshake, ReusedChallengeIsAlreadyUsed) {
  Parties p(5);
  CrpStore stale_copy = p.prov.crps;
  Drbg vr(1, "v"), dr(1, "d"), vr2(2, "v");
  ResponderMemory mem;
  HandshakeInitiator first(p.bundle, "dev", p.prov.crps, vr);
  HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
  ASSERT_TRUE(Shuttle(first, resp).both_established);
  HandshakeInitiator second(p.bundle, "dev", stale_copy, vr2);
  HandshakeResponder resp2("dev", p.ttp.public_key(), p.puf, dr, mem);
  Outcome o = Shuttle(second, resp2);
  EXPECT_EQ(o.responder.code(), ErrorCode::kAlreadyUsed);
  EXPECT_FALSE(second.established());
}

TEST(Handshake, WrongDeviceId) {
  Parties p(6);
  Drbg vr(1, "v"), dr(1, "d");
  ResponderMemory mem;
  HandshakeInitiator init(p.bundle, "other-device", p.prov.crps, vr);
  HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
  EXPECT_EQ(Shuttle(init, resp).initiator.code(), ErrorCode::kUnknownDevice);
}

TEST(Handshake, NoCrpsLeft) {
  Parties p(7);
  while (p.prov.crps.TakeUnused().ok()) {
  }
  Drbg vr(1, "v"), dr(1, "d");
  ResponderMemory mem;
  HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
  HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
  EXPECT_EQ(Shuttle(init, resp).initiator.code(), ErrorCode::kCrpExhausted);
}

TEST(Handshake, AbortRecordFormat) {
  Bytes a = EncodeHandshakeAbort(ErrorCode::kBadCert);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0], 0xFF);
  EXPECT_EQ(a[1], kHandshakeAbort);
}

// Transcript binding: corrupting any byte of any message in flight means no
// session is established with matching keys.
TEST(HandshakeProperty, AnyCorruptedByteBreaksTheRun) {
  for (int target : {1, 2, 3, 5, 8, 9}) {
    for (std::size_t pos = 2;; ++pos) {
      Parties p(10);
      Drbg vr(1, "v"), dr(1, "d");
      ResponderMemory mem;
      HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
      HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
      bool hit = false;
      Outcome o = Shuttle(init, resp, [&](int step, Bytes& m) {
        if (step == target && pos < m.size()) {
          m[pos] ^= 0x01;
          hit = true;
        }
      });
      if (!hit) break;
      EXPECT_FALSE(o.both_established)
          << "message " << target << " byte " << pos;
      if (init.established() && resp.established()) {
        EXPECT_NE(init.session().state().sess_key,
                  resp.session().state().sess_key);
      }
    }
  }
}

// Fresh seeds, fresh keys; every run consumes exactly one CRP.
TEST(HandshakeProperty, KeyAgreementAcrossSeeds) {
  std::set<Key32> keys;
  for (uint64_t seed = 100; seed < 160; ++seed) {
    Parties p(seed);
    Drbg vr(seed, "v"), dr(seed, "d");
    ResponderMemory mem;
    HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
    HandshakeResponder resp("dev", p.ttp.public_key(), p.puf, dr, mem);
    ASSERT_TRUE(Shuttle(init, resp).both_established);
    EXPECT_EQ(init.session().state().sess_key, resp.session().state().sess_key);
    EXPECT_TRUE(keys.insert(init.session().state().sess_key).second);
    EXPECT_EQ(p.prov.crps.unused_count(), 15u);
  }
}

TEST(Handshake, StalledChannelTimesOut) {
  Parties p(11);
  Drbg vr(1, "v");
  HandshakeInitiator init(p.bundle, "dev", p.prov.crps, vr);
  auto [a, b] = MakeInProcessChannelPair();
  Status s = RunInitiatorHandshake(*a, init, Millis(50));
  EXPECT_EQ(s.code(), ErrorCode::kTimeout);
}

}  // namespace
}  // namespace trctee
