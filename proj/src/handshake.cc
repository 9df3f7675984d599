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

#include "trctee/handshake.h"

#include <limits>

namespace trctee {
namespace {

constexpr uint8_t kStepHello = 1;
constexpr uint8_t kStepDeviceHello = 2;
constexpr uint8_t kStepChallenge = 3;
constexpr uint8_t kStepKeyShare = 5;
constexpr uint8_t kStepVtpmConfirm = 8;
constexpr uint8_t kStepTmmConfirm = 9;

constexpr std::string_view kLabelChallenge = "trctee-hs-challenge";
constexpr std::string_view kLabelPuf = "trctee-hs-puf";
constexpr std::string_view kLabelVtpmConfirm = "trctee-hs-vtpm-confirm";
constexpr std::string_view kLabelTmmConfirm = "trctee-hs-tmm-confirm";

ByteWriter Record(uint8_t step) {
  ByteWriter w;
  w.U8(record::kHandshakeMarker).U8(step);
  return w;
}

uint8_t StepOf(ByteSpan message) { return message[1]; }

Bytes Labeled(std::string_view label, const Digest48& transcript_hash,
              ByteSpan extra = {}) {
  ByteWriter w;
  w.Str(label).Raw(transcript_hash).Raw(extra);
  return std::move(w).Take();
}

void Append(Bytes& transcript, ByteSpan message) {
  transcript.insert(transcript.end(), message.begin(), message.end());
}

Status DecodeAbort(ByteSpan message) {
  ByteReader r(message.subspan(2));
  auto code = r.U16();
  if (!code) return MakeError(ErrorCode::kMalformed, "short abort record");
  return MakeError(static_cast<ErrorCode>(*code), "peer aborted handshake");
}

Status Unexpected(uint8_t step) {
  return MakeError(ErrorCode::kStaleNonce,
                   "unexpected handshake step " + std::to_string(step));
}

}  // namespace

Bytes EncodeHandshakeAbort(ErrorCode code) {
  ByteWriter w = Record(kHandshakeAbort);
  w.U16(static_cast<uint16_t>(code));
  return std::move(w).Take();
}

HandshakeInitiator::HandshakeInitiator(const VtpmBundle& identity,
                                       std::string expected_device_id,
                                       CrpStore& crps, Drbg& rng,
                                       uint64_t rekey_threshold)
    : identity_(identity),
      expected_device_id_(std::move(expected_device_id)),
      crps_(crps),
      rng_(rng),
      rekey_threshold_(rekey_threshold) {}

Status HandshakeInitiator::Fail(Status status) {
  state_ = State::kFailed;
  return status;
}

Bytes HandshakeInitiator::Start() {
  nonce_v_ = rng_.Array<16>();
  Bytes cert = identity_.cert.Encode();
  ByteWriter m1 = Record(kStepHello);
  m1.Raw(nonce_v_).U16(static_cast<uint16_t>(cert.size())).Raw(cert);
  transcript_ = m1.bytes();
  crp_.reset();
  session_.reset();
  state_ = State::kAwaitDeviceHello;
  return std::move(m1).Take();
}

StatusOr<std::optional<Bytes>> HandshakeInitiator::OnMessage(ByteSpan message) {
  if (!record::IsHandshake(message)) {
    return Fail(MakeError(ErrorCode::kMalformed, "not a handshake record"));
  }
  if (StepOf(message) == kHandshakeAbort) return Fail(DecodeAbort(message));
  ByteReader r(message.subspan(2));

  switch (state_) {
    case State::kAwaitDeviceHello: {
      if (StepOf(message) != kStepDeviceHello) {
        return Fail(Unexpected(StepOf(message)));
      }
      auto echo = r.Array<16>();
      auto nonce_d = r.Array<16>();
      auto id_len = r.U8();
      auto id = id_len ? r.Raw(*id_len) : std::nullopt;
      if (!id || !r.done()) {
        return Fail(MakeError(ErrorCode::kMalformed, "message 2"));
      }
      if (*echo != nonce_v_) {
        return Fail(MakeError(ErrorCode::kStaleNonce, "message 2 echo"));
      }
      std::string device_id(id->begin(), id->end());
      if (device_id != expected_device_id_) {
        return Fail(MakeError(ErrorCode::kUnknownDevice,
                              "peer is '" + device_id + "'"));
      }
      nonce_d_ = *nonce_d;
      Append(transcript_, message);

      auto crp = crps_.TakeUnused();
      if (!crp.ok()) {
        return Fail(
            MakeError(ErrorCode::kCrpExhausted, "no CRP for handshake"));
      }
      crp_ = *crp;
      Signature sig =
          Sign(identity_.tpm_key,
               Labeled(kLabelChallenge, Sha384(transcript_), crp_->challenge));
      ByteWriter m3 = Record(kStepChallenge);
      m3.Raw(nonce_d_).Raw(crp_->challenge).Raw(sig);
      Append(transcript_, m3.bytes());
      state_ = State::kAwaitKeyShare;
      return std::optional<Bytes>(std::move(m3).Take());
    }

    case State::kAwaitKeyShare: {
      if (StepOf(message) != kStepKeyShare) {
        return Fail(Unexpected(StepOf(message)));
      }
      auto echo = r.Array<16>();
      auto sealed_len = r.U16();
      auto sealed = sealed_len ? r.Raw(*sealed_len) : std::nullopt;
      auto mac = r.Array<48>();
      if (!mac || !r.done()) {
        return Fail(MakeError(ErrorCode::kMalformed, "message 5"));
      }
      if (*echo != nonce_v_) {
        return Fail(MakeError(ErrorCode::kStaleNonce, "message 5 echo"));
      }
      Digest48 expected = HmacSha384(
          crp_->response, Labeled(kLabelPuf, Sha384(transcript_), *sealed));
      if (!ConstantTimeEqual(expected, *mac)) {
        return Fail(MakeError(ErrorCode::kPufMismatch,
                              "device response does not match stored CRP"));
      }
      auto key_share = OpenWithSigningKey(identity_.tpm_key, *sealed);
      if (!key_share.ok() || key_share->size() != 32) {
        return Fail(MakeError(ErrorCode::kAuthFailure, "key share"));
      }
      Append(transcript_, message);
      sess_key_ = DeriveSessionKey(crp_->response, *ToArray<32>(*key_share),
                                   nonce_v_, nonce_d_);
      ByteWriter m8 = Record(kStepVtpmConfirm);
      m8.Raw(HmacSha384(sess_key_,
                        Labeled(kLabelVtpmConfirm, Sha384(transcript_))));
      Append(transcript_, m8.bytes());
      state_ = State::kAwaitConfirm;
      return std::optional<Bytes>(std::move(m8).Take());
    }

    case State::kAwaitConfirm: {
      if (StepOf(message) != kStepTmmConfirm) {
        return Fail(Unexpected(StepOf(message)));
      }
      auto mac = r.Array<48>();
      if (!mac || !r.done()) {
        return Fail(MakeError(ErrorCode::kMalformed, "message 9"));
      }
      Digest48 expected =
          HmacSha384(sess_key_, Labeled(kLabelTmmConfirm, Sha384(transcript_)));
      if (!ConstantTimeEqual(expected, *mac)) {
        return Fail(MakeError(ErrorCode::kConfirmFailure, "message 9"));
      }
      SessionState st;
      st.sess_key = sess_key_;
      st.rekey_threshold = rekey_threshold_;
      st.role = SessionRole::kVtpm;
      session_.emplace(st);
      state_ = State::kEstablished;
      return std::optional<Bytes>();
    }

    case State::kIdle:
    case State::kEstablished:
    case State::kFailed:
      break;
  }
  return Fail(Unexpected(StepOf(message)));
}

HandshakeResponder::HandshakeResponder(std::string device_id,
                                       const PublicKey& pk_ttp,
                                       const PufDevice& puf, Drbg& rng,
                                       ResponderMemory& memory)
    : device_id_(std::move(device_id)),
      pk_ttp_(pk_ttp),
      puf_(puf),
      rng_(rng),
      memory_(memory) {}

HandshakeResponder::Step HandshakeResponder::Abort(Status status) {
  state_ = State::kAwaitHello;
  transcript_.clear();
  session_.reset();
  return Step{EncodeHandshakeAbort(status.code()), std::move(status)};
}

HandshakeResponder::Step HandshakeResponder::OnMessage(ByteSpan message) {
  if (!record::IsHandshake(message)) {
    return Step{std::nullopt,
                MakeError(ErrorCode::kMalformed, "not a handshake record")};
  }
  uint8_t step = StepOf(message);
  if (step == kHandshakeAbort) {
    state_ = State::kAwaitHello;
    session_.reset();
    return Step{std::nullopt, DecodeAbort(message)};
  }
  if (step == kStepHello) return OnHello(message);
  if (state_ == State::kAwaitChallenge && step == kStepChallenge) {
    return OnChallenge(message);
  }
  if (state_ == State::kAwaitConfirm && step == kStepVtpmConfirm) {
    return OnConfirm(message);
  }
  return Abort(Unexpected(step));
}

HandshakeResponder::Step HandshakeResponder::OnHello(ByteSpan message) {
  session_.reset();
  ByteReader r(message.subspan(2));
  auto nonce_v = r.Array<16>();
  auto cert_len = r.U16();
  auto cert_raw = cert_len ? r.Raw(*cert_len) : std::nullopt;
  if (!cert_raw || !r.done()) {
    return Abort(MakeError(ErrorCode::kMalformed, "message 1"));
  }
  if (memory_.seen_nonces.count(*nonce_v) != 0) {
    return Abort(MakeError(ErrorCode::kStaleNonce, "nonce_v reused"));
  }
  auto cert = Certificate::Decode(*cert_raw);
  if (!cert.ok()) return Abort(cert.status());
  Status verified = VerifyCertificate(*cert, pk_ttp_);
  if (!verified.ok()) return Abort(verified);
  memory_.seen_nonces.insert(*nonce_v);

  peer_cert_ = *cert;
  nonce_v_ = *nonce_v;
  nonce_d_ = rng_.Array<16>();
  ByteWriter m2 = Record(kStepDeviceHello);
  m2.Raw(nonce_v_)
      .Raw(nonce_d_)
      .U8(static_cast<uint8_t>(device_id_.size()))
      .Str(device_id_);
  transcript_ = ToBytes(message);
  Append(transcript_, m2.bytes());
  state_ = State::kAwaitChallenge;
  return Step{std::move(m2).Take(), Status::Ok()};
}

HandshakeResponder::Step HandshakeResponder::OnChallenge(ByteSpan message) {
  ByteReader r(message.subspan(2));
  auto echo = r.Array<16>();
  auto challenge = r.Array<kChallengeSize>();
  auto sig = r.Array<kSignatureSize>();
  if (!sig || !r.done()) {
    return Abort(MakeError(ErrorCode::kMalformed, "message 3"));
  }
  if (*echo != nonce_d_) {
    return Abort(MakeError(ErrorCode::kStaleNonce, "message 3 echo"));
  }
  if (!Verify(peer_cert_.pk_tpm,
              Labeled(kLabelChallenge, Sha384(transcript_), *challenge),
              *sig)) {
    return Abort(MakeError(ErrorCode::kAuthFailure,
                           "challenge not signed by certified PK_TPM"));
  }
  if (!memory_.used_challenges.insert(*challenge).second) {
    return Abort(MakeError(ErrorCode::kAlreadyUsed, "challenge replayed"));
  }
  Append(transcript_, message);

  PufResponse response = puf_.Respond(*challenge);
  Key32 key_share = rng_.Array<32>();
  Key32 ephemeral = rng_.Array<32>();
  auto sealed = SealToSigningKey(peer_cert_.pk_tpm, key_share, ephemeral);
  if (!sealed.ok()) return Abort(sealed.status());
  Digest48 mac =
      HmacSha384(response, Labeled(kLabelPuf, Sha384(transcript_), *sealed));
  ByteWriter m5 = Record(kStepKeyShare);
  m5.Raw(nonce_v_)
      .U16(static_cast<uint16_t>(sealed->size()))
      .Raw(*sealed)
      .Raw(mac);
  Append(transcript_, m5.bytes());
  sess_key_ = DeriveSessionKey(response, key_share, nonce_v_, nonce_d_);
  state_ = State::kAwaitConfirm;
  return Step{std::move(m5).Take(), Status::Ok()};
}

HandshakeResponder::Step HandshakeResponder::OnConfirm(ByteSpan message) {
  ByteReader r(message.subspan(2));
  auto mac = r.Array<48>();
  if (!mac || !r.done()) {
    return Abort(MakeError(ErrorCode::kMalformed, "message 8"));
  }
  Digest48 expected =
      HmacSha384(sess_key_, Labeled(kLabelVtpmConfirm, Sha384(transcript_)));
  if (!ConstantTimeEqual(expected, *mac)) {
    return Abort(MakeError(ErrorCode::kConfirmFailure, "message 8"));
  }
  Append(transcript_, message);
  ByteWriter m9 = Record(kStepTmmConfirm);
  m9.Raw(HmacSha384(sess_key_, Labeled(kLabelTmmConfirm, Sha384(transcript_))));
  SessionState st;
  st.sess_key = sess_key_;
  // Rekeying is driven by the vTPM's counter; the TMM never refuses to reply.
  st.rekey_threshold = std::numeric_limits<uint64_t>::max();
  st.role = SessionRole::kTmm;
  session_.emplace(st);
  state_ = State::kEstablished;
  return Step{std::move(m9).Take(), Status::Ok()};
}

Status RunInitiatorHandshake(Channel& channel, HandshakeInitiator& initiator,
                             Millis timeout) {
  TRCTEE_RETURN_IF_ERROR(channel.Send(initiator.Start()));
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    auto remaining = std::chrono::duration_cast<Millis>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      return MakeError(ErrorCode::kTimeout, "handshake stalled");
    }
    auto rec = channel.Receive(remaining);
    if (!rec.ok()) {
      if (rec.status().code() == ErrorCode::kTimeout) {
        return MakeError(ErrorCode::kTimeout, "handshake stalled");
      }
      return rec.status();
    }
    if (!record::IsHandshake(*rec)) continue;
    TRCTEE_ASSIGN_OR_RETURN(std::optional<Bytes> next,
                            initiator.OnMessage(*rec));
    if (!next) return Status::Ok();
    TRCTEE_RETURN_IF_ERROR(channel.Send(*next));
  }
}

}  // namespace trctee
