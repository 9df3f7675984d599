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

#ifndef TRCTEE_VTPM_H_
#define TRCTEE_VTPM_H_

// User-side virtual TPM: PCR bank, event log, the standard command subset
// (GetRandom, Hash, PCR_Read, PCR_Extend) and the three extended commands,
// which it carries to the device TMM over the secure session.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/link.h"
#include "trctee/pcr_bank.h"
#include "trctee/puf.h"
#include "trctee/session.h"
#include "trctee/status.h"
#include "trctee/tpm_wire.h"
#include "trctee/transport.h"
#include "trctee/ttp.h"

namespace trctee {

inline constexpr std::size_t kMaxRandomBytes = 64;

// TPM_ALG_ID values used by the standard commands.
namespace alg_id {
inline constexpr uint16_t kSha256 = 0x000B;
inline constexpr uint16_t kSha384 = 0x000C;
inline constexpr uint16_t kSha3_384 = 0x0028;
}  // namespace alg_id

struct VtpmConfig {
  uint64_t rekey_threshold = kDefaultRekeyThreshold;
  Millis timeout{2000};
};

class Vtpm {
 public:
  Vtpm(VtpmBundle identity, DeviceProvisioning provisioning, Drbg rng,
       VtpmConfig config = {});
  Vtpm(const Vtpm&) = delete;
  Vtpm& operator=(const Vtpm&) = delete;

  // Local commands.
  StatusOr<Digest48> PcrExtend(std::size_t index, const Digest48& digest,
                               EventKind kind, std::string label);
  StatusOr<Digest48> PcrRead(std::size_t index) const;
  // BadLength unless 0 < n <= 64.
  StatusOr<Bytes> GetRandom(std::size_t n);
  StatusOr<Bytes> HashData(ByteSpan data, std::string_view alg) const;

  // Decodes one TPM command, executes it, and returns the encoded response.
  // Malformed input yields an error response; it never fails outright.
  Bytes Dispatch(ByteSpan command);

  // Runs the handshake over `channel`, then fetches the device's boot
  // measurements and extends PCR0..PCR7. The channel must outlive the vTPM's
  // use of it.
  Status Connect(Channel& channel);
  bool connected() const { return client_ != nullptr; }

  // Extended command handlers; Dispatch wraps these.
  wire::UpdateResp UpdateKey(const PufChallenge& challenge);
  wire::DeployResp Deploy(uint16_t ip_num);
  wire::InvokeResp Invoke(uint16_t ip_num, ByteSpan input, uint32_t flag);

  const PcrBank& pcrs() const { return pcrs_; }
  const EventLog& log() const { return log_; }
  std::string ExportLog() const { return log_.Export(); }
  const CrpStore& crps() const { return provisioning_.crps; }
  const VtpmBundle& identity() const { return identity_; }
  const DeviceProvisioning& provisioning() const { return provisioning_; }
  // Null before Connect.
  const SecureSession* session() const;
  const Key32& deployment_key() const { return deployment_key_; }
  uint64_t msg_counter() const { return msg_counter_; }
  std::size_t handshakes() const { return handshakes_; }
  std::size_t updates() const { return updates_; }
  const std::set<uint16_t>& deployed() const { return deployed_; }
  // Typed cause of the most recent failed extended command.
  const Status& last_error() const { return last_error_; }
  // Challenge of the most recently consumed CRP.
  const std::optional<PufChallenge>& last_challenge() const {
    return last_challenge_;
  }
  // Seed of the GetRandom generator; nullopt in fresh-entropy mode.
  std::optional<uint64_t> random_seed() const { return random_rng_.seed(); }

 private:
  Status RunUpdate(const PufChallenge& challenge);
  // Rekeys when the send counter has reached the threshold.
  void MaybeAutoRekey();
  Bytes DispatchStandard(const wire::RawCommand& command);
  void Fail(Status status);

  VtpmBundle identity_;
  DeviceProvisioning provisioning_;
  Drbg rng_;
  Drbg random_rng_;
  VtpmConfig config_;

  PcrBank pcrs_;
  EventLog log_;
  std::unique_ptr<SessionClient> client_;
  Key32 deployment_key_{};
  uint64_t msg_counter_ = 0;
  std::size_t handshakes_ = 0;
  std::size_t updates_ = 0;
  std::set<uint16_t> deployed_;
  Status last_error_;
  std::optional<PufChallenge> last_challenge_;
};

}  // namespace trctee

#endif  // TRCTEE_VTPM_H_
