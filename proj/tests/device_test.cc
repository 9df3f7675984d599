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

#include "trctee/device.h"

#include <gtest/gtest.h>

#include <random>

#include "oracle/oracle.h"
#include "testbed.h"
#include "trctee/link.h"

namespace trctee {
namespace {

const Kernel& K(const std::string& name) {
  static KernelRegistry reg = KernelRegistry::Builtin();
  return *reg.Find(name);
}

Bytes Random(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = uint8_t(rng());
  return b;
}

// Straight triple loop; the reference for matmul8.
Bytes BruteForceMatmul(const Bytes& a, const Bytes& b) {
  Bytes out;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      uint32_t acc = 0;
      for (int k = 0; k < 8; ++k) acc += uint32_t(a[i * 8 + k]) * b[k * 8 + j];
      for (int s = 24; s >= 0; s -= 8) out.push_back(uint8_t(acc >> s));
    }
  }
  return out;
}

TEST(Kernels, BuiltinNames) {
  auto names = KernelRegistry::Builtin().names();
  EXPECT_EQ(names,
            (std::vector<std::string>{"add-constant", "matmul8", "xor"}));
  EXPECT_EQ(KernelRegistry::Builtin().Find("fft"), nullptr);
}

TEST(Kernels, Matmul8MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    Bytes a = Random(rng, 64), b = Random(rng, 64);
    auto out = K("matmul8")(b, a);
    ASSERT_TRUE(out.ok());
    EXPECT_EQ(*out, BruteForceMatmul(a, b)) << "case " << i;
  }
}

TEST(Kernels, Matmul8RejectsShapes) {
  EXPECT_EQ(K("matmul8")(Bytes(64), Bytes(63)).status().code(),
            ErrorCode::kKernelFault);
  EXPECT_EQ(K("matmul8")(Bytes(10), Bytes(64)).status().code(),
            ErrorCode::kKernelFault);
}

TEST(Kernels, XorAndAddConstant) {
  EXPECT_EQ(*K("xor")(Bytes{0x0f, 0xf0}, Bytes{0xff, 0xff}),
            (Bytes{0xf0, 0x0f}));
  EXPECT_EQ(K("xor")(Bytes{1}, Bytes{1, 2}).status().code(),
            ErrorCode::kKernelFault);
  EXPECT_EQ(*K("add-constant")(Bytes{0x01}, Bytes{0x00, 0xff}),
            (Bytes{0x01, 0x00}));
  EXPECT_EQ(K("add-constant")(Bytes{}, Bytes{1}).status().code(),
            ErrorCode::kKernelFault);
}

TEST(Kernels, Purity) {
  std::mt19937_64 rng(2);
  for (const char* name : {"xor", "add-constant", "matmul8"}) {
    for (int i = 0; i < 50; ++i) {
      std::size_t n = std::string(name) == "matmul8" ? 64 : 1 + rng() % 40;
      Bytes in = Random(rng, n);
      Bytes params =
          std::string(name) == "add-constant" ? Random(rng, 1) : Random(rng, n);
      auto first = K(name)(params, in);
      auto second = K(name)(params, in);
      ASSERT_TRUE(first.ok());
      EXPECT_EQ(*first, *second);
    }
  }
}

TEST(IpImage, EncodeDecode) {
  IpImage img{"xor", {1, 2, 3}};
  Bytes e = img.Encode();
  EXPECT_EQ(Bytes(e.begin(), e.begin() + 4), (Bytes{'T', 'I', 'P', 'B'}));
  EXPECT_EQ(e.size(), 4 + 1 + 3 + 4 + 3u);
  EXPECT_EQ(*IpImage::Decode(e), img);
  e.push_back(0);
  EXPECT_EQ(IpImage::Decode(e).status().code(), ErrorCode::kBadImage);
  EXPECT_EQ(IpImage::Decode(Bytes{'X'}).status().code(), ErrorCode::kBadImage);
}

TEST(Bitstream, EncryptDecryptAndTamper) {
  Key32 key = Drbg(3, "k").Array<32>();
  AeadNonce nonce = Drbg(3, "n").Array<12>();
  Bytes plain = IpImage{"xor", {9, 9}}.Encode();
  EncryptedBitstream blob = EncryptBitstream(key, 5, plain, nonce);
  Bytes file = blob.Encode();
  EXPECT_EQ(Bytes(file.begin(), file.begin() + 4), (Bytes{'T', 'E', 'B', '1'}));
  auto decoded = EncryptedBitstream::Decode(file);
  ASSERT_TRUE(decoded.ok());
  EXPECT_EQ(*decoded, blob);
  EXPECT_EQ(*DecryptBitstream(key, *decoded), plain);
  for (std::size_t i = 0; i < file.size(); ++i) {
    Bytes m = file;
    m[i] ^= 0x01;
    auto d = EncryptedBitstream::Decode(m);
    if (!d.ok()) continue;
    EXPECT_FALSE(DecryptBitstream(key, *d).ok()) << "byte " << i;
  }
  // Bound to its slot number.
  EncryptedBitstream moved = blob;
  moved.ip_num = 6;
  EXPECT_EQ(DecryptBitstream(key, moved).status().code(),
            ErrorCode::kAuthFailure);
}

TEST(FileStore, PutGetAndNames) {
  auto dir = testing::TempDir("filestore");
  FileStore store(dir / "ree");
  EXPECT_EQ(FileStore::BitstreamName(7), "ip_00007.teb");
  EXPECT_FALSE(store.Exists("a"));
  ASSERT_TRUE(store.Put("a", Bytes{1, 2, 0, 3}).ok());
  EXPECT_TRUE(store.Exists("a"));
  EXPECT_EQ(*store.Get("a"), (Bytes{1, 2, 0, 3}));
  EXPECT_FALSE(store.Get("missing").ok());
  std::filesystem::remove_all(dir);
}

TEST(BinHash, IsReferenceSha3) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    Bytes b = Random(rng, rng() % 500);
    EXPECT_EQ(oracle::D48(BinHash(b)), oracle::Sha3_384(b));
  }
  Digest48 h = BinHash(Bytes{1});
  oracle::Bytes rec = {0x01, 0x02};
  rec.insert(rec.end(), h.begin(), h.end());
  EXPECT_EQ(oracle::D48(DeployRecordDigest(0x0102, h)), oracle::Sha384(rec));
}

TEST(Device, BootRequiresFsblKey) {
  auto dir = testing::TempDir("device-boot");
  FpgaSocDevice dev("d", PufDevice(Key32{}), dir, Drbg(1, "d"));
  BootImage img = MakeGoldenBootImage(PublicKey{});
  img.components[0] = Bytes{'x'};
  EXPECT_FALSE(dev.Boot(img).ok());
  EXPECT_FALSE(dev.booted());
  ASSERT_TRUE(dev.Boot(MakeGoldenBootImage(PublicKey{})).ok());
  EXPECT_TRUE(dev.booted());
  EXPECT_EQ(dev.boot_events().size(), 8u);
  std::filesystem::remove_all(dir);
}

// The REE agent only ever holds opaque records. Whatever it forwards, the
// TMM's configuration memory changes only through a sealed deploy.
TEST(Device, AgentCannotDeploy) {
  testing::Testbed bed;
  ASSERT_TRUE(bed.Connect().ok());
  std::mt19937_64 rng(5);
  auto session = *bed.tmm().session_state();
  for (int i = 0; i < 500; ++i) {
    Bytes rec;
    switch (i % 3) {
      case 0:
        rec = Random(rng, rng() % 120);
        break;
      case 1: {
        SessionState forged = session;
        forged.role = SessionRole::kVtpm;
        forged.sess_key = Drbg(i, "guess").Array<32>();
        forged.send_counter = session.recv_counter + rng() % 5;
        SecureSession s(forged);
        ByteWriter body;
        body.U16(uint16_t(rng() % 4));
        rec =
            s.SealControl(EncodeRequest(AppType::kDeployRequest, body.bytes()))
                ->Encode();
        break;
      }
      default:
        rec = Random(rng, 1 + rng() % 80);
        rec[0] = 0xFF;  // handshake marker
    }
    auto replies = bed.device().agent().Forward(rec);
    ASSERT_TRUE(replies.ok());
    EXPECT_EQ(bed.tmm().config_memory().size(), 0u);
  }
  // The legitimate session still works afterwards.
  auto ticket = bed.user().PrepareDeploy(1, IpImage{"xor", {1}});
  ASSERT_TRUE(ticket.ok());
  EXPECT_EQ(bed.user().Deploy(*ticket).response.response_code, 0u);
  EXPECT_EQ(bed.tmm().config_memory().size(), 1u);
}

TEST(Device, AgentClosed) {
  testing::Testbed bed;
  bed.device().agent().Close();
  EXPECT_EQ(bed.device().agent().Forward(Bytes{1}).status().code(),
            ErrorCode::kTransportClosed);
}

TEST(Device, AlertCarriesCounterAndCode) {
  Alert a{ErrorCode::kAuthFailure, 42};
  Bytes e = EncodeAlert(a);
  ASSERT_EQ(e.size(), 11u);
  EXPECT_EQ(e[0], 0xFE);
  auto d = DecodeAlert(e);
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->code, ErrorCode::kAuthFailure);
  EXPECT_EQ(d->counter, 42u);
  EXPECT_FALSE(DecodeAlert(Bytes{0xFE, 0}).has_value());
}

}  // namespace
}  // namespace trctee
