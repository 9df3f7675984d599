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

#ifndef TRCTEE_RUNTIME_H_
#define TRCTEE_RUNTIME_H_

// User-side orchestration of IP deployment and invocation, and the offline
// attestation verifier that replays an exported event log.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trctee/boot.h"
#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/device.h"
#include "trctee/pcr_bank.h"
#include "trctee/status.h"
#include "trctee/tpm_wire.h"
#include "trctee/vtpm.h"

namespace trctee {

enum class Verdict { kVerified, kMismatch };

std::string_view VerdictName(Verdict verdict);

struct DeployTicket {
  uint16_t ip_num = 0;
  // SHA3-384 of the plaintext, computed before upload.
  Digest48 local_plaintext_hash{};
  std::string blob_name;
};

struct DeployOutcome {
  wire::DeployResp response;
  Verdict verdict = Verdict::kMismatch;
};

struct InvocationRecord {
  uint16_t ip_num = 0;
  Digest48 input_digest{};
  Digest48 output_digest{};
  uint32_t flag = 0;
  Verdict verdict = Verdict::kMismatch;
};

struct InvokeOutcome {
  wire::InvokeResp response;
  InvocationRecord record;
};

// What the user expects the vTPM to have recorded in PCR8..PCR10.
struct ExpectedHistory {
  std::vector<Digest48> deploy_records;  // DeployRecordDigest values
  std::vector<Digest48> inputs;          // SHA-384(input)
  std::vector<Digest48> outputs;         // SHA-384(output)

  // Lines: `deploy hex`, `input hex`, `output hex`.
  std::string Serialize() const;
  static StatusOr<ExpectedHistory> Parse(std::string_view text);
};

// Talks TPM commands to the vTPM, and uploads encrypted bitstreams to the
// device's REE file store.
class UserClient {
 public:
  UserClient(Vtpm& vtpm, FileStore& device_store, Drbg rng)
      : vtpm_(vtpm), store_(device_store), rng_(std::move(rng)) {}

  // Hashes and encrypts the image under the deployment key, then uploads it.
  StatusOr<DeployTicket> PrepareDeploy(uint16_t ip_num, const IpImage& image);
  DeployOutcome Deploy(const DeployTicket& ticket);
  InvokeOutcome Invoke(uint16_t ip_num, ByteSpan input, uint32_t flag = 0);
  // Update_CMD; the all-zero challenge lets the vTPM choose.
  wire::UpdateResp UpdateKey(const PufChallenge& challenge = kAutoChallenge);

  // Standard commands, encoded and dispatched like tpm2-tools would.
  StatusOr<Digest48> PcrRead(std::size_t index);
  StatusOr<Bytes> GetRandom(uint16_t n);

  const ExpectedHistory& history() const { return history_; }

 private:
  Vtpm& vtpm_;
  FileStore& store_;
  Drbg rng_;
  ExpectedHistory history_;
};

struct RegisterVerdict {
  std::size_t index = 0;
  Verdict verdict = Verdict::kMismatch;
  Digest48 expected{};
  Digest48 actual{};
};

struct AttestationReport {
  std::vector<RegisterVerdict> registers;  // all 24, in order
  std::vector<std::string> findings;

  bool all_verified() const;
  std::vector<std::size_t> mismatches() const;
  // One `pcr_index verdict expected hex actual hex` line per register.
  std::string MachineLines() const;
  // Summary, findings, then the machine lines.
  std::string ToText() const;
};

// Replays `log_text` from the reset bank and compares every register: 0..7
// against the manifest chain, 8..10 against `history`, 11..23 against reset.
// If `reported` is given (a PCR snapshot taken from the vTPM), registers the
// log does not reproduce are flagged too.
AttestationReport VerifyAttestation(
    std::string_view log_text, const GoldenManifest& manifest,
    const ExpectedHistory& history,
    const std::optional<PcrValues>& reported = std::nullopt);

// Parses a `pcr_index hex` snapshot, one line per register.
std::string SerializePcrSnapshot(const PcrValues& values);
StatusOr<PcrValues> ParsePcrSnapshot(std::string_view text);

}  // namespace trctee

#endif  // TRCTEE_RUNTIME_H_
