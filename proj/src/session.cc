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

#include "trctee/session.h"

#include <limits>

namespace trctee {
namespace {

Bytes AssociatedData(uint32_t epoch, uint64_t counter) {
  ByteWriter w(12);
  w.U32(epoch).U64(counter);
  return std::move(w).Take();
}

}  // namespace

Bytes Frame::Encode() const {
  ByteWriter w(kFrameHeaderSize + ciphertext_and_tag.size());
  w.U32(epoch).U64(counter).Raw(nonce).Raw(ciphertext_and_tag);
  return std::move(w).Take();
}

StatusOr<Frame> Frame::Decode(ByteSpan bytes) {
  if (bytes.size() < kFrameOverhead) {
    return MakeError(ErrorCode::kAuthFailure, "frame shorter than overhead");
  }
  ByteReader r(bytes);
  Frame f;
  f.epoch = *r.U32();
  f.counter = *r.U64();
  f.nonce = *r.Array<kAeadNonceSize>();
  f.ciphertext_and_tag = ToBytes(r.Rest());
  if (f.epoch > kMaxEpoch) {
    return MakeError(ErrorCode::kAuthFailure, "epoch out of range");
  }
  return f;
}

AeadNonce FrameNonce(uint32_t epoch, uint64_t counter, SessionRole sender) {
  uint32_t dir = sender == SessionRole::kTmm ? 0x80000000u : 0u;
  ByteWriter w(12);
  w.U32(epoch | dir).U64(counter);
  return *ToArray<kAeadNonceSize>(w.bytes());
}

Status ValidateRekeyThreshold(uint64_t threshold) {
  if (threshold == 0) {
    return MakeError(ErrorCode::kInvalidArgument,
                     "rekey threshold must be at least 1");
  }
  return Status::Ok();
}

StatusOr<Frame> SecureSession::Seal(ByteSpan plaintext) {
  if (state_.send_counter >= state_.rekey_threshold) {
    return MakeError(ErrorCode::kRekeyRequired,
                     "send counter reached threshold " +
                         std::to_string(state_.rekey_threshold));
  }
  return SealImpl(plaintext);
}

StatusOr<Frame> SecureSession::SealControl(ByteSpan plaintext) {
  return SealImpl(plaintext);
}

StatusOr<Frame> SecureSession::SealImpl(ByteSpan plaintext) {
  if (state_.send_counter == std::numeric_limits<uint64_t>::max()) {
    return MakeError(ErrorCode::kRekeyRequired, "counter space exhausted");
  }
  Frame f;
  f.epoch = state_.epoch;
  f.counter = state_.send_counter + 1;
  f.nonce = FrameNonce(f.epoch, f.counter, state_.role);
  f.ciphertext_and_tag = AeadSeal(
      state_.sess_key, f.nonce, AssociatedData(f.epoch, f.counter), plaintext);
  state_.send_counter = f.counter;
  return f;
}

StatusOr<Bytes> SecureSession::Open(const Frame& frame) {
  if (frame.epoch != state_.epoch) {
    return MakeError(ErrorCode::kWrongEpoch,
                     "frame epoch " + std::to_string(frame.epoch) +
                         ", session epoch " + std::to_string(state_.epoch));
  }
  if (frame.counter <= state_.recv_counter) {
    return MakeError(ErrorCode::kReplayDetected,
                     "counter " + std::to_string(frame.counter) +
                         " <= last seen " +
                         std::to_string(state_.recv_counter));
  }
  if (frame.nonce != FrameNonce(frame.epoch, frame.counter, peer_role())) {
    return MakeError(ErrorCode::kAuthFailure, "nonce does not match header");
  }
  TRCTEE_ASSIGN_OR_RETURN(Bytes plaintext,
                          AeadOpen(state_.sess_key, frame.nonce,
                                   AssociatedData(frame.epoch, frame.counter),
                                   frame.ciphertext_and_tag));
  state_.recv_counter = frame.counter;
  return plaintext;
}

std::optional<RekeyTrigger> SecureSession::CounterTick() const {
  if (state_.send_counter >= state_.rekey_threshold) {
    return RekeyTrigger::kCounterThreshold;
  }
  return std::nullopt;
}

SecureSession SecureSession::NextEpoch(const Key32& new_key) const {
  SessionState next = state_;
  next.sess_key = new_key;
  next.epoch = state_.epoch + 1;
  next.send_counter = 0;
  next.recv_counter = 0;
  return SecureSession(next);
}

Key32 DeriveRekeyKey(const Digest48& pcr_composite,
                     const PufResponse& puf_response, const Key32& old_key,
                     uint32_t new_epoch) {
  ByteWriter ikm;
  ikm.Raw(puf_response).Raw(old_key);
  ByteWriter info;
  info.Str("trctee-rekey").U32(new_epoch);
  return HkdfSha384Key(pcr_composite, ikm.bytes(), info.bytes());
}

Key32 DeriveSessionKey(const PufResponse& puf_response, const Key32& key_share,
                       const ByteArray<16>& nonce_v,
                       const ByteArray<16>& nonce_d) {
  ByteWriter ikm;
  ikm.Raw(puf_response).Raw(key_share).Raw(nonce_v).Raw(nonce_d);
  return HkdfSha384Key({}, ikm.bytes(), AsBytes("trctee-session"));
}

Key32 DeriveDeploymentKey(const Key32& session_key) {
  return HkdfSha384Key({}, session_key, AsBytes("trctee-deploy"));
}

}  // namespace trctee
