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

#include "trctee/ttp.h"

#include <sstream>

namespace trctee {
namespace {

constexpr std::string_view kCertDomain = "trctee-cert";
constexpr std::string_view kRegistryHeader = "TRCTEE-REGISTRY 1";
constexpr std::string_view kBundleHeader = "TRCTEE-VTPM-BUNDLE 1";

}  // namespace

Bytes Certificate::Encode() const {
  ByteWriter w;
  w.U8(version)
      .U16(static_cast<uint16_t>(user_id.size()))
      .Str(user_id)
      .Raw(pk_tpm)
      .Raw(signature);
  return std::move(w).Take();
}

StatusOr<Certificate> Certificate::Decode(ByteSpan bytes) {
  ByteReader r(bytes);
  Certificate cert;
  auto version = r.U8();
  auto len = r.U16();
  if (!version || !len) return MakeError(ErrorCode::kBadCert, "truncated");
  if (*version != kVersion) {
    return MakeError(ErrorCode::kBadCert, "unsupported certificate version");
  }
  cert.version = *version;
  auto uid = r.Raw(*len);
  auto pk = r.Array<kPublicKeySize>();
  auto sig = r.Array<kSignatureSize>();
  if (!uid || !pk || !sig || !r.done()) {
    return MakeError(ErrorCode::kBadCert, "malformed certificate");
  }
  cert.user_id.assign(uid->begin(), uid->end());
  cert.pk_tpm = *pk;
  cert.signature = *sig;
  return cert;
}

Bytes Certificate::SignedPayload() const {
  ByteWriter w;
  w.Str(kCertDomain)
      .U8(version)
      .U16(static_cast<uint16_t>(user_id.size()))
      .Str(user_id)
      .Raw(pk_tpm);
  return std::move(w).Take();
}

Certificate IssueCertificate(const SigningKeyPair& ttp_key, std::string user_id,
                             const PublicKey& pk_tpm) {
  Certificate cert;
  cert.user_id = std::move(user_id);
  cert.pk_tpm = pk_tpm;
  cert.signature = Sign(ttp_key, cert.SignedPayload());
  return cert;
}

Status VerifyCertificate(const Certificate& cert, const PublicKey& pk_ttp) {
  if (cert.version != Certificate::kVersion ||
      !Verify(pk_ttp, cert.SignedPayload(), cert.signature)) {
    return MakeError(ErrorCode::kBadCert, "certificate for '" + cert.user_id +
                                              "' does not verify under PK_TTP");
  }
  return Status::Ok();
}

std::string VtpmBundle::Serialize() const {
  std::ostringstream out;
  out << kBundleHeader << '\n'
      << "user " << user_id << '\n'
      << "pk-tpm " << ToHex(tpm_key.public_key) << '\n'
      << "sk-tpm " << ToHex(tpm_key.secret_key) << '\n'
      << "cert " << ToHex(cert.Encode()) << '\n'
      << "pk-ttp " << ToHex(pk_ttp) << '\n';
  return out.str();
}

StatusOr<VtpmBundle> VtpmBundle::Parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kBundleHeader) {
    return MakeError(ErrorCode::kParseError, "not a vTPM bundle");
  }
  VtpmBundle b;
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    auto sp = line.find(' ');
    if (sp == std::string::npos) continue;
    fields[line.substr(0, sp)] = line.substr(sp + 1);
  }
  for (const char* key : {"user", "pk-tpm", "sk-tpm", "cert", "pk-ttp"}) {
    if (fields.count(key) == 0) {
      return MakeError(ErrorCode::kParseError,
                       std::string("bundle missing ") + key);
    }
  }
  b.user_id = fields["user"];
  TRCTEE_ASSIGN_OR_RETURN(b.tpm_key.public_key,
                          ArrayFromHex<32>(fields["pk-tpm"]));
  TRCTEE_ASSIGN_OR_RETURN(b.tpm_key.secret_key,
                          ArrayFromHex<64>(fields["sk-tpm"]));
  TRCTEE_ASSIGN_OR_RETURN(Bytes cert_raw, FromHex(fields["cert"]));
  TRCTEE_ASSIGN_OR_RETURN(b.cert, Certificate::Decode(cert_raw));
  TRCTEE_ASSIGN_OR_RETURN(b.pk_ttp, ArrayFromHex<32>(fields["pk-ttp"]));
  return b;
}

Ttp::Ttp(Drbg rng, TtpOptions options)
    : rng_(std::move(rng)),
      options_(options),
      identity_seed_(rng_.Array<32>()),
      identity_(SigningKeyPairFromSeed(identity_seed_)) {}

Ttp::Ttp(Drbg rng, TtpOptions options, const Key32& identity_seed)
    : rng_(std::move(rng)),
      options_(options),
      identity_seed_(identity_seed),
      identity_(SigningKeyPairFromSeed(identity_seed)) {}

void Ttp::RegisterUser(const std::string& user_id) { users_.insert(user_id); }

bool Ttp::IsRegistered(const std::string& user_id) const {
  return users_.count(user_id) != 0;
}

StatusOr<const DeviceRecord*> Ttp::EnrollDevice(const std::string& device_id,
                                                const PufDevice& device,
                                                const BootImage& boot_image) {
  if (device_id.empty() || !IsValidLabel(device_id)) {
    return MakeError(ErrorCode::kInvalidArgument, "bad device id");
  }
  if (devices_.count(device_id) != 0) {
    return MakeError(ErrorCode::kDuplicateDevice, device_id);
  }
  DeviceRecord record;
  record.device_id = device_id;
  record.golden_manifest = MeasureManifest(boot_image);
  TRCTEE_ASSIGN_OR_RETURN(record.crp_store,
                          EnrollCrps(device, options_.enrollment_pool, rng_));
  auto [it, inserted] = devices_.emplace(device_id, std::move(record));
  return &it->second;
}

const DeviceRecord* Ttp::FindDevice(const std::string& device_id) const {
  auto it = devices_.find(device_id);
  return it == devices_.end() ? nullptr : &it->second;
}

StatusOr<VtpmBundle> Ttp::EnrollVtpm(const std::string& user_id) {
  if (!IsRegistered(user_id)) {
    return MakeError(ErrorCode::kUnknownUser, user_id);
  }
  VtpmBundle bundle;
  bundle.user_id = user_id;
  bundle.tpm_key = SigningKeyPairFromSeed(rng_.Array<32>());
  bundle.cert = IssueCertificate(identity_, user_id, bundle.tpm_key.public_key);
  bundle.pk_ttp = identity_.public_key;
  certs_[bundle.tpm_key.public_key] = bundle.cert;
  return bundle;
}

StatusOr<DeviceProvisioning> Ttp::ProvisionUser(
    const std::string& user_id, const std::string& device_id,
    std::optional<std::size_t> count) {
  auto it = devices_.find(device_id);
  if (it == devices_.end()) {
    return MakeError(ErrorCode::kUnknownDevice, device_id);
  }
  if (!IsRegistered(user_id)) {
    return MakeError(ErrorCode::kUnknownUser, user_id);
  }
  DeviceProvisioning out;
  out.device_id = device_id;
  out.golden_manifest = it->second.golden_manifest;
  TRCTEE_ASSIGN_OR_RETURN(
      out.crps, it->second.crp_store.SplitUnused(
                    count.value_or(options_.provision_slice), CrpOwner::kUser));
  return out;
}

StatusOr<Certificate> Ttp::LookupCert(const PublicKey& pk_tpm) const {
  auto it = certs_.find(pk_tpm);
  if (it == certs_.end()) {
    return MakeError(ErrorCode::kNotFound, "no certificate for key");
  }
  return it->second;
}

bool Ttp::TamperStoredCert(const PublicKey& pk_tpm, std::size_t bit) {
  auto it = certs_.find(pk_tpm);
  if (it == certs_.end()) return false;
  it->second.signature[(bit / 8) % kSignatureSize] ^=
      static_cast<uint8_t>(1u << (bit % 8));
  return true;
}

// Layout:
//   TRCTEE-REGISTRY 1
//   identity <hex seed>
//   options <enrollment_pool> <provision_slice>
//   user <id>
//   device <id>
//   manifest <name> <hex>      (x8, follows its device line)
//   crp <hex c> <hex r> <0|1>  (follows its device line)
//   cert <hex encoded certificate>
Status Ttp::Save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << kRegistryHeader << '\n'
      << "identity " << ToHex(identity_seed_) << '\n'
      << "options " << options_.enrollment_pool << ' '
      << options_.provision_slice << '\n';
  for (const auto& u : users_) out << "user " << u << '\n';
  for (const auto& [id, rec] : devices_) {
    out << "device " << id << '\n';
    for (const auto& m : rec.golden_manifest) {
      out << "manifest " << m.name << ' ' << ToHex(m.digest) << '\n';
    }
    for (const auto& c : rec.crp_store.records()) {
      out << "crp " << ToHex(c.challenge) << ' ' << ToHex(c.response) << ' '
          << (c.used ? 1 : 0) << '\n';
    }
  }
  for (const auto& [pk, cert] : certs_) {
    out << "cert " << ToHex(cert.Encode()) << '\n';
  }
  return WriteFileAtomically(path, out.str());
}

StatusOr<Ttp> Ttp::Load(const std::filesystem::path& path, Drbg rng) {
  TRCTEE_ASSIGN_OR_RETURN(std::string text, ReadFileToString(path));
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRegistryHeader) {
    return MakeError(ErrorCode::kParseError, "not a registry file (v1)");
  }
  std::optional<Ttp> ttp;
  DeviceRecord* current = nullptr;
  std::size_t line_no = 1;
  auto fail = [&](const std::string& why) {
    return MakeError(ErrorCode::kParseError,
                     "registry line " + std::to_string(line_no) + ": " + why);
  };
  TtpOptions options;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    if (kind == "identity") {
      std::string hex;
      fields >> hex;
      auto seed = ArrayFromHex<32>(hex);
      if (!seed.ok()) return fail("identity");
      ttp.emplace(Ttp(std::move(rng), options, *seed));
      continue;
    }
    if (kind == "options") {
      if (!(fields >> options.enrollment_pool >> options.provision_slice)) {
        return fail("options");
      }
      if (ttp) ttp->options_ = options;
      continue;
    }
    if (!ttp) return fail("identity line must come first");
    if (kind == "user") {
      std::string id;
      fields >> id;
      ttp->users_.insert(id);
    } else if (kind == "device") {
      std::string id;
      fields >> id;
      DeviceRecord rec;
      rec.device_id = id;
      current = &(ttp->devices_[id] = std::move(rec));
    } else if (kind == "manifest" || kind == "crp") {
      if (current == nullptr) return fail(kind + " before device");
      std::string a, b, used;
      fields >> a >> b;
      if (kind == "manifest") {
        auto d = ArrayFromHex<48>(b);
        if (!d.ok()) return fail("manifest digest");
        current->golden_manifest.push_back(ManifestEntry{a, *d});
      } else {
        fields >> used;
        auto c = ArrayFromHex<kChallengeSize>(a);
        auto r = ArrayFromHex<kPufResponseSize>(b);
        if (!c.ok() || !r.ok()) return fail("crp hex");
        TRCTEE_RETURN_IF_ERROR(
            current->crp_store.Add(CrpRecord{*c, *r, used == "1"}));
      }
    } else if (kind == "cert") {
      std::string hex;
      fields >> hex;
      auto raw = FromHex(hex);
      if (!raw.ok()) return fail("cert hex");
      auto cert = Certificate::Decode(*raw);
      if (!cert.ok()) return fail("cert");
      ttp->certs_[cert->pk_tpm] = *cert;
    } else {
      return fail("unknown record '" + kind + "'");
    }
  }
  if (!ttp)
    return MakeError(ErrorCode::kParseError, "registry has no identity");
  return std::move(*ttp);
}

}  // namespace trctee
