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

// The oracles are checked against published vectors first, then against the
// library over random inputs.

#include "oracle/oracle.h"

#include <gtest/gtest.h>

#include <random>

#include "trctee/crypto.h"

namespace {

using oracle::Hex;
using oracle::Str;
using oracle::ToHex;

TEST(OracleSha384, KnownVectors) {
  EXPECT_EQ(ToHex(oracle::Sha384(Str(""))),
            "38b060a751ac96384cd9327eb1b1e36a21fdb71114be07434c0cc7bf63f6e1da"
            "274edebfe76f65fbd51ad2f14898b95b");
  EXPECT_EQ(ToHex(oracle::Sha384(Str("abc"))),
            "cb00753f45a35e8bb5a03d699ac65007272c32ab0eded1631a8b605a43ff5bed"
            "8086072ba1e7cc2358baeca134c825a7");
  EXPECT_EQ(
      ToHex(oracle::Sha384(
          Str("abcdefghbcdefghicdefghijdefghijkefghijklfghijklmghijklmnhijklmno"
              "ijklmnopjklmnopqklmnopqrlmnopqrsmnopqrstnopqrstu"))),
      "09330c33f71147e83d192fc782cd1b4753111b173b3b05d22fa08086e3b0f712"
      "fcc7c71a557e2db966c3e9fa91746039");
  std::string million(1000000, 'a');
  EXPECT_EQ(ToHex(oracle::Sha384(Str(million))),
            "9d0e1809716474cb086e834e310a4a1ced149e9c00f248527972cec5704c2a5b"
            "07b8b3dc38ecc4ebae97ddd87f3d8985");
}

TEST(OracleSha3_384, KnownVectors) {
  EXPECT_EQ(ToHex(oracle::Sha3_384(Str(""))),
            "0c63a75b845e4f7d01107d852e4c2485c51a50aaaa94fc61995e71bbee983a2a"
            "c3713831264adb47fb6bd1e058d5f004");
  EXPECT_EQ(ToHex(oracle::Sha3_384(Str("abc"))),
            "ec01498288516fc926459f58e2c6ad8df9b473cb0fc08c2596da7cf0e49be4b2"
            "98d88cea927ac7f539f1edf228376d25");
  EXPECT_EQ(ToHex(oracle::Sha3_384(Str(
                "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))),
            "991c665755eb3a4b6bbdfb75c78a492e8c56a22c5c4d7e429bfdbc32b9d4ad5a"
            "a04a1f076e62fea19eef51acd0657c22");
  std::string million(1000000, 'a');
  EXPECT_EQ(ToHex(oracle::Sha3_384(Str(million))),
            "eee9e24d78c1855337983451df97c8ad9eedf256c6334f8e948d252d5e0e7684"
            "7aa0774ddb90a842190d2c558b4b8340");
}

TEST(OracleHmacSha384, Rfc4231) {
  oracle::Bytes key(20, 0x0b);
  EXPECT_EQ(ToHex(oracle::HmacSha384(key, Str("Hi There"))),
            "afd03944d84895626b0825f4ab46907f15f9dadbe4101ec682aa034c7cebc59c"
            "faea9ea9076ede7f4af152e8b2fa9cb6");
  EXPECT_EQ(ToHex(oracle::HmacSha384(Str("Jefe"),
                                     Str("what do ya want for nothing?"))),
            "af45d2e376484031617f78d2b58a6b1b9c7ef464f5a01b47e42ec3736322445e"
            "8e2240ca5e69e2c78b3239ecfab21649");
  // Key longer than the block size.
  oracle::Bytes long_key(131, 0xaa);
  EXPECT_EQ(ToHex(oracle::HmacSha384(
                long_key,
                Str("Test Using Larger Than Block-Size Key - Hash Key First"))),
            "4ece084485813e9088d2c63a041bc5b44f9ef1012a2b588f3cd11f05033ac4c6"
            "0c2ef6ab4030fe8296248df163f44952");
}

TEST(OracleHkdfSha384, Rfc5869ShapeWithSha384) {
  oracle::Bytes ikm(22, 0x0b);
  oracle::Bytes salt, info;
  for (int i = 0; i < 13; ++i) salt.push_back(uint8_t(i));
  for (int i = 0xf0; i < 0xfa; ++i) info.push_back(uint8_t(i));
  EXPECT_EQ(ToHex(oracle::HkdfSha384(salt, ikm, info, 42)),
            "9b5097a86038b805309076a44b3a9f38063e25b516dcbf369f394cfab43685f7"
            "48b6457763e4f0204fc5");
}

TEST(OracleVsLibrary, RandomInputsAgree) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    oracle::Bytes data(rng() % 400);
    for (auto& b : data) b = uint8_t(rng());
    oracle::Bytes key(rng() % 200);
    for (auto& b : key) b = uint8_t(rng());
    auto lib384 = trctee::Sha384(data);
    auto lib3 = trctee::Sha3_384(data);
    auto libmac = trctee::HmacSha384(key, data);
    EXPECT_EQ(ToHex(oracle::Sha384(data)), trctee::ToHex(lib384));
    EXPECT_EQ(ToHex(oracle::Sha3_384(data)), trctee::ToHex(lib3));
    EXPECT_EQ(ToHex(oracle::HmacSha384(key, data)), trctee::ToHex(libmac));
    std::size_t n = 1 + rng() % 100;
    EXPECT_EQ(ToHex(oracle::HkdfSha384(key, data, Str("info"), n)),
              trctee::ToHex(
                  trctee::HkdfSha384(key, data, trctee::AsBytes("info"), n)));
  }
}

}  // namespace
