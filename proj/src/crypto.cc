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

#include "trctee/crypto.h"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>
#include <sodium.h>

#include <algorithm>
#include <cctype>
#include <memory>
#include <stdexcept>
#include <string>

namespace trctee {
namespace {

void EnsureSodium() {
  static const int init = sodium_init();
  if (init < 0) throw std::runtime_error("libsodium initialization failed");
}

const EVP_MD* EvpFor(HashAlg alg) {
  switch (alg) {
    case HashAlg::kSha256:
      return EVP_sha256();
    case HashAlg::kSha384:
      return EVP_sha384();
    case HashAlg::kSha3_384:
      return EVP_sha3_384();
  }
  return nullptr;
}

void EvpDigest(HashAlg alg, ByteSpan data, uint8_t* out) {
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out, &len, EvpFor(alg), nullptr) !=
      1) {
    throw std::runtime_error("EVP_Digest failed");
  }
}

}  // namespace

StatusOr<HashAlg> ParseHashAlg(std::string_view name) {
  std::string norm;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    norm.push_back(
        static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (norm == "SHA256") return HashAlg::kSha256;
  if (norm == "SHA384") return HashAlg::kSha384;
  if (norm == "SHA3384") return HashAlg::kSha3_384;
  return MakeError(ErrorCode::kUnsupportedAlg, std::string(name));
}

std::string_view HashAlgName(HashAlg alg) {
  switch (alg) {
    case HashAlg::kSha256:
      return "SHA-256";
    case HashAlg::kSha384:
      return "SHA-384";
    case HashAlg::kSha3_384:
      return "SHA3-384";
  }
  return "?";
}

std::size_t DigestSize(HashAlg alg) {
  return alg == HashAlg::kSha256 ? 32 : 48;
}

Bytes Hash(HashAlg alg, ByteSpan data) {
  Bytes out(DigestSize(alg));
  EvpDigest(alg, data, out.data());
  return out;
}

ByteArray<32> Sha256(ByteSpan data) {
  ByteArray<32> out;
  EvpDigest(HashAlg::kSha256, data, out.data());
  return out;
}

Digest48 Sha384(ByteSpan data) {
  Digest48 out;
  EvpDigest(HashAlg::kSha384, data, out.data());
  return out;
}

Digest48 Sha3_384(ByteSpan data) {
  Digest48 out;
  EvpDigest(HashAlg::kSha3_384, data, out.data());
  return out;
}

ByteArray<32> HmacSha256(ByteSpan key, ByteSpan data) {
  ByteArray<32> out;
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(),
       data.size(), out.data(), &len);
  return out;
}

Digest48 HmacSha384(ByteSpan key, ByteSpan data) {
  Digest48 out;
  unsigned int len = 0;
  HMAC(EVP_sha384(), key.data(), static_cast<int>(key.size()), data.data(),
       data.size(), out.data(), &len);
  return out;
}

Bytes HkdfSha384(ByteSpan salt, ByteSpan ikm, ByteSpan info,
                 std::size_t length) {
  std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)> ctx(
      EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr), &EVP_PKEY_CTX_free);
  // OpenSSL rejects a zero-length salt pointer; RFC 5869 treats an empty salt
  // as HashLen zero bytes, which is what HMAC does with an empty key anyway.
  static const uint8_t kZero[48] = {};
  ByteSpan effective_salt = salt.empty() ? ByteSpan(kZero, 48) : salt;
  Bytes out(length);
  std::size_t out_len = length;
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
      EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha384()) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), effective_salt.data(),
                                  static_cast<int>(effective_salt.size())) <=
          0 ||
      EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ikm.data(),
                                 static_cast<int>(ikm.size())) <= 0 ||
      EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(),
                                  static_cast<int>(info.size())) <= 0 ||
      EVP_PKEY_derive(ctx.get(), out.data(), &out_len) <= 0) {
    throw std::runtime_error("HKDF-SHA384 derivation failed");
  }
  return out;
}

Key32 HkdfSha384Key(ByteSpan salt, ByteSpan ikm, ByteSpan info) {
  Bytes raw = HkdfSha384(salt, ikm, info, 32);
  Key32 key;
  std::copy(raw.begin(), raw.end(), key.begin());
  return key;
}

bool ConstantTimeEqual(ByteSpan a, ByteSpan b) {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

Bytes AeadSeal(const Key32& key, const AeadNonce& nonce, ByteSpan ad,
               ByteSpan plaintext) {
  EnsureSodium();
  Bytes out(plaintext.size() + kAeadTagSize);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(
      out.data(), &out_len, plaintext.data(), plaintext.size(), ad.data(),
      ad.size(), nullptr, nonce.data(), key.data());
  out.resize(out_len);
  return out;
}

StatusOr<Bytes> AeadOpen(const Key32& key, const AeadNonce& nonce, ByteSpan ad,
                         ByteSpan ciphertext_and_tag) {
  EnsureSodium();
  if (ciphertext_and_tag.size() < kAeadTagSize) {
    return MakeError(ErrorCode::kAuthFailure, "ciphertext shorter than tag");
  }
  Bytes out(ciphertext_and_tag.size() - kAeadTagSize);
  unsigned long long out_len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(
          out.data(), &out_len, nullptr, ciphertext_and_tag.data(),
          ciphertext_and_tag.size(), ad.data(), ad.size(), nonce.data(),
          key.data()) != 0) {
    return MakeError(ErrorCode::kAuthFailure, "AEAD tag verification failed");
  }
  out.resize(out_len);
  return out;
}

SigningKeyPair SigningKeyPairFromSeed(const Key32& seed) {
  EnsureSodium();
  SigningKeyPair kp;
  crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(),
                           seed.data());
  return kp;
}

Signature Sign(const SigningKeyPair& key, ByteSpan message) {
  EnsureSodium();
  Signature sig;
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       key.secret_key.data());
  return sig;
}

bool Verify(const PublicKey& public_key, ByteSpan message,
            const Signature& signature) {
  EnsureSodium();
  return crypto_sign_verify_detached(signature.data(), message.data(),
                                     message.size(), public_key.data()) == 0;
}

namespace {

constexpr std::string_view kSealedBoxInfo = "trctee-sealed-box";

Key32 SealedBoxKey(ByteSpan shared, ByteSpan ephemeral_pk,
                   ByteSpan recipient_x) {
  ByteWriter ikm;
  ikm.Raw(shared).Raw(ephemeral_pk).Raw(recipient_x);
  return HkdfSha384Key({}, ikm.bytes(), AsBytes(kSealedBoxInfo));
}

}  // namespace

StatusOr<Bytes> SealToSigningKey(const PublicKey& recipient, ByteSpan plaintext,
                                 const Key32& ephemeral_seed) {
  EnsureSodium();
  ByteArray<32> recipient_x;
  if (crypto_sign_ed25519_pk_to_curve25519(recipient_x.data(),
                                           recipient.data()) != 0) {
    return MakeError(ErrorCode::kInvalidArgument, "recipient key not on curve");
  }
  ByteArray<32> eph_pk, eph_sk, shared;
  crypto_box_seed_keypair(eph_pk.data(), eph_sk.data(), ephemeral_seed.data());
  if (crypto_scalarmult(shared.data(), eph_sk.data(), recipient_x.data()) !=
      0) {
    return MakeError(ErrorCode::kInvalidArgument, "degenerate shared secret");
  }
  Key32 key = SealedBoxKey(shared, eph_pk, recipient_x);
  sodium_memzero(eph_sk.data(), eph_sk.size());
  sodium_memzero(shared.data(), shared.size());
  ByteWriter out;
  out.Raw(eph_pk).Raw(AeadSeal(key, AeadNonce{}, eph_pk, plaintext));
  return std::move(out).Take();
}

StatusOr<Bytes> OpenWithSigningKey(const SigningKeyPair& recipient,
                                   ByteSpan sealed) {
  EnsureSodium();
  if (sealed.size() < kSealedBoxOverhead) {
    return MakeError(ErrorCode::kAuthFailure, "sealed box too short");
  }
  ByteArray<32> recipient_x, recipient_x_sk, shared;
  if (crypto_sign_ed25519_pk_to_curve25519(recipient_x.data(),
                                           recipient.public_key.data()) != 0 ||
      crypto_sign_ed25519_sk_to_curve25519(recipient_x_sk.data(),
                                           recipient.secret_key.data()) != 0) {
    return MakeError(ErrorCode::kInvalidArgument, "bad recipient key");
  }
  ByteSpan eph_pk = sealed.first(32);
  if (crypto_scalarmult(shared.data(), recipient_x_sk.data(), eph_pk.data()) !=
      0) {
    return MakeError(ErrorCode::kAuthFailure, "degenerate ephemeral key");
  }
  Key32 key = SealedBoxKey(shared, eph_pk, recipient_x);
  sodium_memzero(recipient_x_sk.data(), recipient_x_sk.size());
  return AeadOpen(key, AeadNonce{}, eph_pk, sealed.subspan(32));
}

Drbg::Drbg(uint64_t seed, std::string_view label) : seed_(seed) {
  ByteWriter material;
  material.Str("trctee-drbg").U64(seed).Str(label);
  key_ = Sha256(material.bytes());
}

Drbg Drbg::FromEntropy(std::string_view label) {
  EnsureSodium();
  ByteWriter material;
  ByteArray<32> entropy;
  randombytes_buf(entropy.data(), entropy.size());
  material.Raw(entropy).Str(label);
  return Drbg(Sha256(material.bytes()), std::nullopt);
}

void Drbg::Fill(std::span<uint8_t> out) {
  for (uint8_t& b : out) {
    if (block_used_ == block_.size()) {
      ByteWriter ctr;
      ctr.U64(counter_++);
      block_ = HmacSha256(key_, ctr.bytes());
      block_used_ = 0;
    }
    b = block_[block_used_++];
  }
}

Bytes Drbg::Generate(std::size_t n) {
  Bytes out(n);
  Fill(out);
  return out;
}

uint32_t Drbg::NextU32() {
  ByteArray<4> raw = Array<4>();
  return (uint32_t{raw[0]} << 24) | (uint32_t{raw[1]} << 16) |
         (uint32_t{raw[2]} << 8) | raw[3];
}

Drbg Drbg::Fork(std::string_view label) {
  ByteWriter material;
  material.Str("fork").Raw(Array<32>()).Str(label);
  return Drbg(HmacSha256(key_, material.bytes()), seed_);
}

}  // namespace trctee
