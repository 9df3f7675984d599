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

#ifndef TRCTEE_LINK_H_
#define TRCTEE_LINK_H_

// Application messages carried inside sealed frames between the vTPM and the
// TMM, plus the unauthenticated alert record the TMM sends when it cannot
// open a frame.
//
// Request plaintext: type(1) || body.
// Reply plaintext:   type(1) || in_reply_to(8) || status(2) || body.
// Alert record:      0xFE || status(2) || counter(8).

#include <cstdint>
#include <optional>
#include <vector>

#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/pcr_bank.h"
#include "trctee/puf.h"
#include "trctee/session.h"
#include "trctee/status.h"
#include "trctee/transport.h"

namespace trctee {

enum class AppType : uint8_t {
  kBootReportRequest = 0x10,
  kBootReport = 0x11,
  kDeployRequest = 0x20,
  kDeployReply = 0x21,
  kInvokeRequest = 0x30,
  kInvokeReply = 0x31,
  kUpdateRequest = 0x40,
  kUpdateReply = 0x41,
  kUpdateConfirm = 0x42,
  kUpdateDone = 0x43,
};

struct Alert {
  ErrorCode code = ErrorCode::kOk;
  uint64_t counter = 0;
};

Bytes EncodeAlert(const Alert& alert);
std::optional<Alert> DecodeAlert(ByteSpan record);

struct AppRequest {
  AppType type{};
  Bytes body;
};

Bytes EncodeRequest(AppType type, ByteSpan body);
StatusOr<AppRequest> DecodeRequest(ByteSpan plaintext);

struct AppReply {
  AppType type{};
  uint64_t in_reply_to = 0;
  ErrorCode status = ErrorCode::kOk;
  Bytes body;
};

Bytes EncodeReply(const AppReply& reply);
StatusOr<AppReply> DecodeReply(ByteSpan plaintext);

// Boot report: count(1) || { pcr(1) || digest(48) || label_len(1) || label }.
Bytes EncodeBootReport(const std::vector<MeasurementEvent>& events);
StatusOr<std::vector<MeasurementEvent>> DecodeBootReport(ByteSpan body);

// Hash(Bin): SHA3-384 of the plaintext bitstream.
Digest48 BinHash(ByteSpan plaintext);
// SHA-384(ip_num || Hash(Bin)), the value extended into PCR8.
Digest48 DeployRecordDigest(uint16_t ip_num, const Digest48& bin_hash);

struct InvokeRequest {
  uint16_t ip_num = 0;
  uint32_t flag = 0;
  Bytes input;

  Bytes Encode() const;
  static StatusOr<InvokeRequest> Decode(ByteSpan body);
};

// Key update, first message. Signed by SK_TPM; the salt is the vTPM's PCR
// composite at the time of the request.
struct UpdateRequest {
  uint32_t new_epoch = 0;
  PufChallenge challenge{};
  Digest48 salt{};
  ByteArray<16> nonce{};
  Signature signature{};

  Bytes SignedPayload() const;
  Bytes Encode() const;
  static StatusOr<UpdateRequest> Decode(ByteSpan body);
};

struct UpdateReply {
  ByteArray<16> nonce{};
  Digest48 mac{};

  Bytes Encode() const;
  static StatusOr<UpdateReply> Decode(ByteSpan body);
};

// MAC the TMM returns under the freshly derived key.
Digest48 UpdateTmmMac(const Key32& new_key, const UpdateRequest& request,
                      const ByteArray<16>& tmm_nonce);
// MAC the vTPM returns once it has checked the TMM's.
Digest48 UpdateVtpmMac(const Key32& new_key, const UpdateRequest& request,
                       const UpdateReply& reply);

// vTPM end of an established session: seals a request, then waits for the
// reply that names its counter. Replies to earlier requests are dropped;
// any frame that fails to open ends the call with that error.
class SessionClient {
 public:
  SessionClient(Channel& channel, SecureSession session, Millis timeout)
      : channel_(channel), session_(std::move(session)), timeout_(timeout) {}

  const SecureSession& session() const { return session_; }
  Channel& channel() { return channel_; }
  void ReplaceSession(SecureSession session) { session_ = std::move(session); }

  // `control` selects the threshold-exempt seal path. When `reply_session`
  // is given the reply is opened with it instead of the current session.
  StatusOr<AppReply> Call(AppType type, ByteSpan body, bool control = false,
                          SecureSession* reply_session = nullptr);

 private:
  Channel& channel_;
  SecureSession session_;
  Millis timeout_;
};

}  // namespace trctee

#endif  // TRCTEE_LINK_H_
