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

#ifndef TRCTEE_HANDSHAKE_H_
#define TRCTEE_HANDSHAKE_H_

// Mutual authentication between the vTPM (initiator) and the device TMM
// (responder), combining the TTP-issued vTPM certificate with a single-use
// PUF challenge-response pair.
//
//   1  V->D  hello: nonce_v, Ca(PK_TPM)
//   2  D->V  device verifies Ca(PK_TPM) under PK_TTP; replies nonce_d, #DI
//   3  V->D  CRP challenge c, signed with SK_TPM over the transcript
//   4  D     verifies the signature, computes r' = PUF(c)
//   5  D->V  key share k_d sealed to PK_TPM, MAC over transcript keyed by r'
//   6  V     checks the MAC with the stored r, opens k_d
//   7  both  SessKey = KDF(r || k_d || nonce_v || nonce_d)
//   8  V->D  key confirmation
//   9  D->V  key confirmation
//
// Handshake records are 0xFF || step || body. Either side may answer with an
// abort record 0xFF 0xA0 || error code(2).

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/puf.h"
#include "trctee/session.h"
#include "trctee/status.h"
#include "trctee/transport.h"
#include "trctee/ttp.h"

namespace trctee {

using HandshakeNonce = ByteArray<16>;

inline constexpr uint8_t kHandshakeAbort = 0xA0;

Bytes EncodeHandshakeAbort(ErrorCode code);

class HandshakeInitiator {
 public:
  HandshakeInitiator(const VtpmBundle& identity, std::string expected_device_id,
                     CrpStore& crps, Drbg& rng,
                     uint64_t rekey_threshold = kDefaultRekeyThreshold);

  // Message 1.
  Bytes Start();

  // Feeds a record from the device. Returns the next record to send, or
  // nullopt once the handshake is complete.
  StatusOr<std::optional<Bytes>> OnMessage(ByteSpan message);

  bool established() const { return state_ == State::kEstablished; }
  const SecureSession& session() const { return *session_; }
  const std::optional<CrpRecord>& consumed_crp() const { return crp_; }

 private:
  enum class State {
    kIdle,
    kAwaitDeviceHello,
    kAwaitKeyShare,
    kAwaitConfirm,
    kEstablished,
    kFailed
  };

  Status Fail(Status status);

  const VtpmBundle& identity_;
  std::string expected_device_id_;
  CrpStore& crps_;
  Drbg& rng_;
  uint64_t rekey_threshold_;

  State state_ = State::kIdle;
  Bytes transcript_;
  HandshakeNonce nonce_v_{};
  HandshakeNonce nonce_d_{};
  std::optional<CrpRecord> crp_;
  Key32 sess_key_{};
  std::optional<SecureSession> session_;
};

// Device-side state the responder consults across handshakes and rekeys.
struct ResponderMemory {
  std::set<HandshakeNonce> seen_nonces;
  std::set<PufChallenge> used_challenges;
};

class HandshakeResponder {
 public:
  HandshakeResponder(std::string device_id, const PublicKey& pk_ttp,
                     const PufDevice& puf, Drbg& rng, ResponderMemory& memory);

  struct Step {
    std::optional<Bytes> reply;
    Status status;
  };

  // Any failure produces an abort reply and returns the responder to its
  // initial state; a fresh message 1 always restarts the exchange.
  Step OnMessage(ByteSpan message);

  bool established() const { return state_ == State::kEstablished; }
  const SecureSession& session() const { return *session_; }
  // PK_TPM of the authenticated peer.
  const PublicKey& peer_key() const { return peer_cert_.pk_tpm; }
  const Certificate& peer_cert() const { return peer_cert_; }

 private:
  enum class State {
    kAwaitHello,
    kAwaitChallenge,
    kAwaitConfirm,
    kEstablished
  };

  Step Abort(Status status);
  Step OnHello(ByteSpan message);
  Step OnChallenge(ByteSpan message);
  Step OnConfirm(ByteSpan message);

  std::string device_id_;
  PublicKey pk_ttp_;
  const PufDevice& puf_;
  Drbg& rng_;
  ResponderMemory& memory_;

  State state_ = State::kAwaitHello;
  Bytes transcript_;
  Certificate peer_cert_;
  HandshakeNonce nonce_v_{};
  HandshakeNonce nonce_d_{};
  Key32 sess_key_{};
  std::optional<SecureSession> session_;
};

// Drives the initiator over `channel` until established or failed. Records
// that are not handshake records (stale frames, alerts) are skipped.
Status RunInitiatorHandshake(Channel& channel, HandshakeInitiator& initiator,
                             Millis timeout);

}  // namespace trctee

#endif  // TRCTEE_HANDSHAKE_H_
