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

#ifndef TRCTEE_TTP_H_
#define TRCTEE_TTP_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trctee/boot.h"
#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/puf.h"
#include "trctee/status.h"

namespace trctee {

// Ca(PK_TPM): binds a vTPM public key to its owner, signed by SK_TTP.
// Wire layout: version(1) || user_id_len(2) || user_id || PK_TPM(32) ||
// sig(64).
struct Certificate {
  static constexpr uint8_t kVersion = 1;

  uint8_t version = kVersion;
  std::string user_id;
  PublicKey pk_tpm{};
  Signature signature{};

  Bytes Encode() const;
  static StatusOr<Certificate> Decode(ByteSpan bytes);

  // Canonical bytes covered by the signature.
  Bytes SignedPayload() const;

  bool operator==(const Certificate&) const = default;
};

Certificate IssueCertificate(const SigningKeyPair& ttp_key, std::string user_id,
                             const PublicKey& pk_tpm);

// BadCert if the signature does not verify under `pk_ttp`.
Status VerifyCertificate(const Certificate& cert, const PublicKey& pk_ttp);

struct DeviceRecord {
  std::string device_id;
  CrpStore crp_store{CrpOwner::kTtp};
  GoldenManifest golden_manifest;
};

// What the TTP hands the user at vTPM enrollment.
struct VtpmBundle {
  std::string user_id;
  SigningKeyPair tpm_key;
  Certificate cert;
  PublicKey pk_ttp{};

  std::string Serialize() const;
  static StatusOr<VtpmBundle> Parse(std::string_view text);
};

// What the user receives at device launch.
struct DeviceProvisioning {
  std::string device_id;
  GoldenManifest golden_manifest;
  CrpStore crps{CrpOwner::kUser};
};

struct TtpOptions {
  std::size_t enrollment_pool = 256;
  std::size_t provision_slice = 64;
};

class Ttp {
 public:
  explicit Ttp(Drbg rng, TtpOptions options = {});

  const PublicKey& public_key() const { return identity_.public_key; }
  const TtpOptions& options() const { return options_; }

  // Users are registered out of band; this is the trusted local call.
  void RegisterUser(const std::string& user_id);
  bool IsRegistered(const std::string& user_id) const;

  StatusOr<const DeviceRecord*> EnrollDevice(const std::string& device_id,
                                             const PufDevice& device,
                                             const BootImage& boot_image);
  const DeviceRecord* FindDevice(const std::string& device_id) const;

  StatusOr<VtpmBundle> EnrollVtpm(const std::string& user_id);

  // Moves `count` (default: options().provision_slice) unused CRPs from the
  // TTP-held pool to the returned user store.
  StatusOr<DeviceProvisioning> ProvisionUser(
      const std::string& user_id, const std::string& device_id,
      std::optional<std::size_t> count = std::nullopt);

  StatusOr<Certificate> LookupCert(const PublicKey& pk_tpm) const;

  // Test hook standing in for an attacker with write access to the database.
  bool TamperStoredCert(const PublicKey& pk_tpm, std::size_t bit);

  // Registry file, versioned line-text layout; see README.
  Status Save(const std::filesystem::path& path) const;
  static StatusOr<Ttp> Load(const std::filesystem::path& path, Drbg rng);

 private:
  Ttp(Drbg rng, TtpOptions options, const Key32& identity_seed);

  Drbg rng_;
  TtpOptions options_;
  Key32 identity_seed_;
  SigningKeyPair identity_;
  std::set<std::string> users_;
  std::map<std::string, DeviceRecord> devices_;
  std::map<PublicKey, Certificate> certs_;
};

}  // namespace trctee

#endif  // TRCTEE_TTP_H_
