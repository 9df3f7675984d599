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

#include "trctee/link.h"

namespace trctee {
namespace {

ErrorCode CodeFromWire(uint16_t value) {
  if (value > static_cast<uint16_t>(ErrorCode::kInternal)) {
    return ErrorCode::kMalformed;
  }
  return static_cast<ErrorCode>(value);
}

bool KnownAppType(uint8_t t) {
  switch (static_cast<AppType>(t)) {
    case AppType::kBootReportRequest:
    case AppType::kBootReport:
    case AppType::kDeployRequest:
    case AppType::kDeployReply:
    case AppType::kInvokeRequest:
    case AppType::kInvokeReply:
    case AppType::kUpdateRequest:
    case AppType::kUpdateReply:
    case AppType::kUpdateConfirm:
    case AppType::kUpdateDone:
      return true;
  }
  return false;
}

Status Malformed(std::string what) {
  return MakeError(ErrorCode::kMalformed, std::move(what));
}

}  // namespace

Bytes EncodeAlert(const Alert& alert) {
  ByteWriter w;
  w.U8(record::kAlertMarker)
      .U16(static_cast<uint16_t>(alert.code))
      .U64(alert.counter);
  return std::move(w).Take();
}

std::optional<Alert> DecodeAlert(ByteSpan rec) {
  if (!record::IsAlert(rec)) return std::nullopt;
  ByteReader r(rec.subspan(1));
  auto code = r.U16();
  auto counter = r.U64();
  if (!counter || !r.done()) return std::nullopt;
  return Alert{CodeFromWire(*code), *counter};
}

Bytes EncodeRequest(AppType type, ByteSpan body) {
  ByteWriter w;
  w.U8(static_cast<uint8_t>(type)).Raw(body);
  return std::move(w).Take();
}

StatusOr<AppRequest> DecodeRequest(ByteSpan plaintext) {
  ByteReader r(plaintext);
  auto type = r.U8();
  if (!type || !KnownAppType(*type)) return Malformed("request type");
  return AppRequest{static_cast<AppType>(*type), ToBytes(r.Rest())};
}

Bytes EncodeReply(const AppReply& reply) {
  ByteWriter w;
  w.U8(static_cast<uint8_t>(reply.type))
      .U64(reply.in_reply_to)
      .U16(static_cast<uint16_t>(reply.status))
      .Raw(reply.body);
  return std::move(w).Take();
}

StatusOr<AppReply> DecodeReply(ByteSpan plaintext) {
  ByteReader r(plaintext);
  auto type = r.U8();
  auto in_reply_to = r.U64();
  auto status = r.U16();
  if (!status || !KnownAppType(*type)) return Malformed("reply header");
  return AppReply{static_cast<AppType>(*type), *in_reply_to,
                  CodeFromWire(*status), ToBytes(r.Rest())};
}

Bytes EncodeBootReport(const std::vector<MeasurementEvent>& events) {
  ByteWriter w;
  w.U8(static_cast<uint8_t>(events.size()));
  for (const auto& e : events) {
    w.U8(static_cast<uint8_t>(e.pcr_index))
        .Raw(e.digest)
        .U8(static_cast<uint8_t>(e.label.size()))
        .Str(e.label);
  }
  return std::move(w).Take();
}

StatusOr<std::vector<MeasurementEvent>> DecodeBootReport(ByteSpan body) {
  ByteReader r(body);
  auto count = r.U8();
  if (!count) return Malformed("boot report");
  std::vector<MeasurementEvent> events;
  for (std::size_t i = 0; i < *count; ++i) {
    auto pcr = r.U8();
    auto digest = r.Array<48>();
    auto label_len = r.U8();
    auto label = label_len ? r.Raw(*label_len) : std::nullopt;
    if (!label) return Malformed("boot report entry");
    MeasurementEvent e;
    e.pcr_index = *pcr;
    e.digest = *digest;
    e.kind = EventKind::kBootComponent;
    e.label.assign(label->begin(), label->end());
    events.push_back(std::move(e));
  }
  if (!r.done()) return Malformed("boot report trailing bytes");
  return events;
}

Digest48 BinHash(ByteSpan plaintext) { return Sha3_384(plaintext); }

Digest48 DeployRecordDigest(uint16_t ip_num, const Digest48& bin_hash) {
  ByteWriter w;
  w.U16(ip_num).Raw(bin_hash);
  return Sha384(w.bytes());
}

Bytes InvokeRequest::Encode() const {
  ByteWriter w;
  w.U16(ip_num).U32(flag).U32(static_cast<uint32_t>(input.size())).Raw(input);
  return std::move(w).Take();
}

StatusOr<InvokeRequest> InvokeRequest::Decode(ByteSpan body) {
  ByteReader r(body);
  InvokeRequest req;
  auto ip = r.U16();
  auto flag = r.U32();
  auto len = r.U32();
  auto input = len ? r.Raw(*len) : std::nullopt;
  if (!input || !r.done()) return Malformed("invoke request");
  req.ip_num = *ip;
  req.flag = *flag;
  req.input = ToBytes(*input);
  return req;
}

Bytes UpdateRequest::SignedPayload() const {
  ByteWriter w;
  w.Str("trctee-update-request")
      .U32(new_epoch)
      .Raw(challenge)
      .Raw(salt)
      .Raw(nonce);
  return std::move(w).Take();
}

Bytes UpdateRequest::Encode() const {
  ByteWriter w;
  w.U32(new_epoch).Raw(challenge).Raw(salt).Raw(nonce).Raw(signature);
  return std::move(w).Take();
}

StatusOr<UpdateRequest> UpdateRequest::Decode(ByteSpan body) {
  ByteReader r(body);
  UpdateRequest u;
  auto epoch = r.U32();
  auto challenge = r.Array<kChallengeSize>();
  auto salt = r.Array<48>();
  auto nonce = r.Array<16>();
  auto sig = r.Array<kSignatureSize>();
  if (!sig || !r.done()) return Malformed("update request");
  u.new_epoch = *epoch;
  u.challenge = *challenge;
  u.salt = *salt;
  u.nonce = *nonce;
  u.signature = *sig;
  return u;
}

Bytes UpdateReply::Encode() const {
  ByteWriter w;
  w.Raw(nonce).Raw(mac);
  return std::move(w).Take();
}

StatusOr<UpdateReply> UpdateReply::Decode(ByteSpan body) {
  ByteReader r(body);
  auto nonce = r.Array<16>();
  auto mac = r.Array<48>();
  if (!mac || !r.done()) return Malformed("update reply");
  return UpdateReply{*nonce, *mac};
}

Digest48 UpdateTmmMac(const Key32& new_key, const UpdateRequest& request,
                      const ByteArray<16>& tmm_nonce) {
  ByteWriter w;
  w.Str("trctee-update-tmm").Raw(Sha384(request.Encode())).Raw(tmm_nonce);
  return HmacSha384(new_key, w.bytes());
}

Digest48 UpdateVtpmMac(const Key32& new_key, const UpdateRequest& request,
                       const UpdateReply& reply) {
  ByteWriter transcript;
  transcript.Raw(request.Encode()).Raw(reply.Encode());
  ByteWriter w;
  w.Str("trctee-update-vtpm").Raw(Sha384(transcript.bytes()));
  return HmacSha384(new_key, w.bytes());
}

StatusOr<AppReply> SessionClient::Call(AppType type, ByteSpan body,
                                       bool control,
                                       SecureSession* reply_session) {
  Bytes plaintext = EncodeRequest(type, body);
  TRCTEE_ASSIGN_OR_RETURN(Frame frame, control ? session_.SealControl(plaintext)
                                               : session_.Seal(plaintext));
  const uint64_t request_counter = frame.counter;
  TRCTEE_RETURN_IF_ERROR(channel_.Send(frame.Encode()));

  auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (true) {
    auto remaining = std::chrono::duration_cast<Millis>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      return MakeError(
          ErrorCode::kTimeout,
          "no reply to request " + std::to_string(request_counter));
    }
    TRCTEE_ASSIGN_OR_RETURN(Bytes rec, channel_.Receive(remaining));
    if (auto alert = DecodeAlert(rec)) {
      if (alert->counter == request_counter) {
        return MakeError(alert->code, "device could not process request");
      }
      continue;
    }
    if (!record::IsFrame(rec)) continue;
    TRCTEE_ASSIGN_OR_RETURN(Frame reply_frame, Frame::Decode(rec));
    // During a key update the confirmation arrives under the staged session,
    // but a refusal still comes back under the current one.
    SecureSession& opener =
        reply_session && reply_frame.epoch != session_.state().epoch
            ? *reply_session
            : session_;
    TRCTEE_ASSIGN_OR_RETURN(Bytes reply_plain, opener.Open(reply_frame));
    TRCTEE_ASSIGN_OR_RETURN(AppReply reply, DecodeReply(reply_plain));
    if (reply.in_reply_to != request_counter) continue;
    return reply;
  }
}

}  // namespace trctee
