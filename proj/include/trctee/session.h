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

#ifndef TRCTEE_SESSION_H_
#define TRCTEE_SESSION_H_

#include <cstdint>
#include <optional>

#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/pcr_bank.h"
#include "trctee/puf.h"
#include "trctee/status.h"

namespace trctee {

inline constexpr uint64_t kDefaultRekeyThreshold = 1024;

// epoch(4) || counter(8) || nonce(12), then ciphertext || tag(16).
inline constexpr std::size_t kFrameHeaderSize = 4 + 8 + kAeadNonceSize;
inline constexpr std::size_t kFrameOverhead = kFrameHeaderSize + kAeadTagSize;

// Epochs occupy the low 31 bits so a frame's first byte is always < 0x80;
// the nonce reuses the top bit as the direction flag.
inline constexpr uint32_t kMaxEpoch = 0x7FFFFFFF;

enum class SessionRole { kVtpm, kTmm };

struct Frame {
  uint32_t epoch = 0;
  uint64_t counter = 0;
  AeadNonce nonce{};
  Bytes ciphertext_and_tag;

  Bytes Encode() const;
  static StatusOr<Frame> Decode(ByteSpan bytes);
  bool operator==(const Frame&) const = default;
};

// AEAD nonce for a frame: (epoch | direction << 31) || counter.
AeadNonce FrameNonce(uint32_t epoch, uint64_t counter, SessionRole sender);

struct SessionState {
  Key32 sess_key{};
  uint32_t epoch = 0;
  uint64_t send_counter = 0;
  uint64_t recv_counter = 0;
  uint64_t rekey_threshold = kDefaultRekeyThreshold;
  SessionRole role = SessionRole::kVtpm;
};

// Rejects a zero threshold.
Status ValidateRekeyThreshold(uint64_t threshold);

enum class RekeyTrigger { kCommand, kCounterThreshold };

// One endpoint's view of an established channel.
class SecureSession {
 public:
  explicit SecureSession(SessionState state) : state_(state) {}

  const SessionState& state() const { return state_; }
  SessionRole peer_role() const {
    return state_.role == SessionRole::kVtpm ? SessionRole::kTmm
                                             : SessionRole::kVtpm;
  }

  // Application frames. Fails with RekeyRequired once send_counter has
  // reached the threshold.
  StatusOr<Frame> Seal(ByteSpan plaintext);

  // Key-update traffic, which must flow on the old key after the threshold
  // has been hit. Not subject to the threshold.
  StatusOr<Frame> SealControl(ByteSpan plaintext);

  // WrongEpoch, ReplayDetected (counter not above the last accepted one) or
  // AuthFailure. State is untouched on failure.
  StatusOr<Bytes> Open(const Frame& frame);

  // Reports the counter trigger once send_counter has reached the threshold.
  std::optional<RekeyTrigger> CounterTick() const;

  // Session for the next epoch under `new_key`; counters restart at zero.
  SecureSession NextEpoch(const Key32& new_key) const;

 private:
  StatusOr<Frame> SealImpl(ByteSpan plaintext);

  SessionState state_;
};

// KDF(salt = SHA-384(PCR0..PCR23), ikm = puf_response || old_key,
//     info = "trctee-rekey" || new_epoch) -> 32 bytes, HKDF-SHA384.
Key32 DeriveRekeyKey(const Digest48& pcr_composite,
                     const PufResponse& puf_response, const Key32& old_key,
                     uint32_t new_epoch);

// HKDF-SHA384 over r || k_d || nonce_v || nonce_d with info "trctee-session".
Key32 DeriveSessionKey(const PufResponse& puf_response, const Key32& key_share,
                       const ByteArray<16>& nonce_v,
                       const ByteArray<16>& nonce_d);

// KDF(sess_key, "trctee-deploy").
Key32 DeriveDeploymentKey(const Key32& session_key);

}  // namespace trctee

#endif  // TRCTEE_SESSION_H_
