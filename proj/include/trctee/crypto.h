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

#ifndef TRCTEE_CRYPTO_H_
#define TRCTEE_CRYPTO_H_

#include <cstdint>
#include <optional>
#include <string_view>

#include "trctee/bytes.h"
#include "trctee/status.h"

namespace trctee {

enum class HashAlg { kSha256, kSha384, kSha3_384 };

// Accepts "SHA-256", "SHA-384", "SHA3-384" (case-insensitive, dash optional).
StatusOr<HashAlg> ParseHashAlg(std::string_view name);
std::string_view HashAlgName(HashAlg alg);
std::size_t DigestSize(HashAlg alg);

Bytes Hash(HashAlg alg, ByteSpan data);
ByteArray<32> Sha256(ByteSpan data);
Digest48 Sha384(ByteSpan data);
Digest48 Sha3_384(ByteSpan data);

ByteArray<32> HmacSha256(ByteSpan key, ByteSpan data);
Digest48 HmacSha384(ByteSpan key, ByteSpan data);

// RFC 5869 extract-then-expand over SHA-384. This is the fixed KDF used for
// session keys, rekeying and the deployment key.
Bytes HkdfSha384(ByteSpan salt, ByteSpan ikm, ByteSpan info,
                 std::size_t length);
Key32 HkdfSha384Key(ByteSpan salt, ByteSpan ikm, ByteSpan info);

bool ConstantTimeEqual(ByteSpan a, ByteSpan b);

// ChaCha20-Poly1305 (IETF variant).
inline constexpr std::size_t kAeadKeySize = 32;
inline constexpr std::size_t kAeadNonceSize = 12;
inline constexpr std::size_t kAeadTagSize = 16;
using AeadNonce = ByteArray<kAeadNonceSize>;

// Returns ciphertext followed by the 16-byte tag.
Bytes AeadSeal(const Key32& key, const AeadNonce& nonce, ByteSpan ad,
               ByteSpan plaintext);
StatusOr<Bytes> AeadOpen(const Key32& key, const AeadNonce& nonce, ByteSpan ad,
                         ByteSpan ciphertext_and_tag);

// Ed25519.
inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kSignatureSize = 64;
using PublicKey = ByteArray<kPublicKeySize>;
using Signature = ByteArray<kSignatureSize>;

struct SigningKeyPair {
  PublicKey public_key{};
  ByteArray<64> secret_key{};
};

SigningKeyPair SigningKeyPairFromSeed(const Key32& seed);
Signature Sign(const SigningKeyPair& key, ByteSpan message);
bool Verify(const PublicKey& public_key, ByteSpan message,
            const Signature& signature);

// Anonymous public-key encryption to the holder of an Ed25519 key: ephemeral
// X25519 against the birationally mapped recipient key, HKDF, then AEAD.
// The ephemeral secret comes from `ephemeral_seed` so runs are reproducible.
// Output is ephemeral_pk(32) || ciphertext || tag(16).
inline constexpr std::size_t kSealedBoxOverhead = 32 + kAeadTagSize;
StatusOr<Bytes> SealToSigningKey(const PublicKey& recipient, ByteSpan plaintext,
                                 const Key32& ephemeral_seed);
StatusOr<Bytes> OpenWithSigningKey(const SigningKeyPair& recipient,
                                   ByteSpan sealed);

// Deterministic random bit generator: HMAC-SHA256 in counter mode keyed from a
// 64-bit seed and a domain label. Forked children are independent streams.
class Drbg {
 public:
  Drbg(uint64_t seed, std::string_view label);
  static Drbg FromEntropy(std::string_view label);

  void Fill(std::span<uint8_t> out);
  Bytes Generate(std::size_t n);
  uint32_t NextU32();

  template <std::size_t N>
  ByteArray<N> Array() {
    ByteArray<N> out;
    Fill(out);
    return out;
  }

  Drbg Fork(std::string_view label);

  // Seed this stream was built from; nullopt in fresh-entropy mode.
  std::optional<uint64_t> seed() const { return seed_; }

 private:
  Drbg(const ByteArray<32>& key, std::optional<uint64_t> seed)
      : key_(key), seed_(seed) {}

  ByteArray<32> key_;
  std::optional<uint64_t> seed_;
  uint64_t counter_ = 0;
  ByteArray<32> block_{};
  std::size_t block_used_ = 32;
};

}  // namespace trctee

#endif  // TRCTEE_CRYPTO_H_
