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

#include "trctee/vtpm.h"

#include "trctee/boot.h"
#include "trctee/handshake.h"

namespace trctee {
namespace {

constexpr uint16_t kStHashCheck = 0x8024;
constexpr uint32_t kRhNull = 0x40000007;

StatusOr<HashAlg> FromAlgId(uint16_t id) {
  switch (id) {
    case alg_id::kSha256:
      return HashAlg::kSha256;
    case alg_id::kSha384:
      return HashAlg::kSha384;
    case alg_id::kSha3_384:
      return HashAlg::kSha3_384;
  }
  return MakeError(ErrorCode::kUnsupportedAlg,
                   "algorithm id " + std::to_string(id));
}

Bytes Respond(uint32_t response_code, ByteSpan body = {}) {
  auto encoded = wire::Encode(wire::Response(
      wire::RawResponse{wire::kTagNoSessions, response_code, ToBytes(body)}));
  return encoded.ok() ? *encoded : wire::ErrorResponse(wire::rc::kSize);
}

uint32_t DecodeErrorToRc(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadTag:
      return wire::rc::kBadTag;
    case ErrorCode::kUnknownCode:
      return wire::rc::kCommandCode;
    case ErrorCode::kTruncated:
      return wire::rc::kInsufficient;
    default:
      return wire::rc::kSize;
  }
}

std::string IpLabel(std::string_view what, uint16_t ip_num) {
  return std::string(what) + ":" + std::to_string(ip_num);
}

}  // namespace

Vtpm::Vtpm(VtpmBundle identity, DeviceProvisioning provisioning, Drbg rng,
           VtpmConfig config)
    : identity_(std::move(identity)),
      provisioning_(std::move(provisioning)),
      rng_(std::move(rng)),
      random_rng_(rng_.Fork("getrandom")),
      config_(config) {}

const SecureSession* Vtpm::session() const {
  return client_ ? &client_->session() : nullptr;
}

StatusOr<Digest48> Vtpm::PcrExtend(std::size_t index, const Digest48& digest,
                                   EventKind kind, std::string label) {
  TRCTEE_ASSIGN_OR_RETURN(Digest48 value, pcrs_.Extend(index, digest));
  log_.Append(index, digest, kind, std::move(label));
  return value;
}

StatusOr<Digest48> Vtpm::PcrRead(std::size_t index) const {
  return pcrs_.Read(index);
}

StatusOr<Bytes> Vtpm::GetRandom(std::size_t n) {
  if (n == 0 || n > kMaxRandomBytes) {
    return MakeError(ErrorCode::kBadLength,
                     "requested " + std::to_string(n) + " bytes");
  }
  return random_rng_.Generate(n);
}

StatusOr<Bytes> Vtpm::HashData(ByteSpan data, std::string_view alg) const {
  TRCTEE_ASSIGN_OR_RETURN(HashAlg parsed, ParseHashAlg(alg));
  return Hash(parsed, data);
}

void Vtpm::Fail(Status status) { last_error_ = std::move(status); }

Bytes Vtpm::Dispatch(ByteSpan command) {
  auto decoded = wire::DecodeCommand(command);
  if (!decoded.ok())
    return wire::ErrorResponse(DecodeErrorToRc(decoded.status().code()));
  ++msg_counter_;

  if (auto* update = std::get_if<wire::UpdateCmd>(&*decoded)) {
    auto out = wire::Encode(wire::Response(UpdateKey(update->challenge)));
    return out.ok() ? *out : wire::ErrorResponse(wire::rc::kFailure);
  }
  if (auto* deploy = std::get_if<wire::DeployCmd>(&*decoded)) {
    auto out = wire::Encode(wire::Response(Deploy(deploy->ip_num)));
    return out.ok() ? *out : wire::ErrorResponse(wire::rc::kFailure);
  }
  if (auto* invoke = std::get_if<wire::InvokeCmd>(&*decoded)) {
    auto out = wire::Encode(
        wire::Response(Invoke(invoke->ip_num, invoke->input, invoke->flag)));
    return out.ok() ? *out : wire::ErrorResponse(wire::rc::kFailure);
  }
  return DispatchStandard(std::get<wire::RawCommand>(*decoded));
}

Bytes Vtpm::DispatchStandard(const wire::RawCommand& command) {
  ByteReader r(command.body);
  switch (command.command_code) {
    case wire::kCcGetRandom: {
      auto n = r.U16();
      if (!n || !r.done()) return Respond(wire::rc::kSize);
      auto bytes = GetRandom(*n);
      if (!bytes.ok()) return Respond(wire::rc::kValue);
      ByteWriter w;
      w.U16(static_cast<uint16_t>(bytes->size())).Raw(*bytes);
      return Respond(wire::rc::kSuccess, w.bytes());
    }

    case wire::kCcHash: {
      auto size = r.U16();
      auto data = size ? r.Raw(*size) : std::nullopt;
      auto alg = data ? r.U16() : std::nullopt;
      auto hierarchy = alg ? r.U32() : std::nullopt;
      if (!hierarchy || !r.done()) return Respond(wire::rc::kSize);
      auto parsed = FromAlgId(*alg);
      if (!parsed.ok()) return Respond(wire::rc::kHash);
      Bytes digest = Hash(*parsed, *data);
      ByteWriter w;
      w.U16(static_cast<uint16_t>(digest.size())).Raw(digest);
      w.U16(kStHashCheck).U32(kRhNull).U16(0);
      return Respond(wire::rc::kSuccess, w.bytes());
    }

    case wire::kCcPcrRead: {
      auto count = r.U32();
      if (!count || *count > 8) return Respond(wire::rc::kSize);
      ByteWriter selection;
      ByteWriter digests;
      uint32_t returned_banks = 0;
      uint32_t returned_digests = 0;
      for (uint32_t i = 0; i < *count; ++i) {
        auto hash = r.U16();
        auto size_of_select = hash ? r.U8() : std::nullopt;
        auto select = size_of_select ? r.Raw(*size_of_select) : std::nullopt;
        if (!select) return Respond(wire::rc::kSize);
        if (*hash != alg_id::kSha384) continue;
        ++returned_banks;
        selection.U16(*hash).U8(*size_of_select).Raw(*select);
        for (std::size_t byte = 0; byte < select->size(); ++byte) {
          for (int bit = 0; bit < 8; ++bit) {
            if (((*select)[byte] >> bit & 1) == 0) continue;
            std::size_t index = byte * 8 + bit;
            if (index >= kNumPcrs) return Respond(wire::rc::kValue);
            digests.U16(48).Raw(pcrs_.values()[index]);
            ++returned_digests;
          }
        }
      }
      if (!r.done()) return Respond(wire::rc::kSize);
      ByteWriter w;
      w.U32(static_cast<uint32_t>(log_.size()));
      w.U32(returned_banks).Raw(selection.bytes());
      w.U32(returned_digests).Raw(digests.bytes());
      return Respond(wire::rc::kSuccess, w.bytes());
    }

    case wire::kCcPcrExtend: {
      auto handle = r.U32();
      auto count = handle ? r.U32() : std::nullopt;
      if (!count) return Respond(wire::rc::kSize);
      if (*handle >= kNumPcrs) return Respond(wire::rc::kValue);
      std::vector<Digest48> to_extend;
      for (uint32_t i = 0; i < *count; ++i) {
        auto alg = r.U16();
        if (!alg) return Respond(wire::rc::kSize);
        auto parsed = FromAlgId(*alg);
        if (!parsed.ok()) return Respond(wire::rc::kHash);
        auto digest = r.Raw(DigestSize(*parsed));
        if (!digest) return Respond(wire::rc::kSize);
        // Single SHA-384 bank: digests for other banks have nowhere to go.
        if (*parsed == HashAlg::kSha384)
          to_extend.push_back(*ToArray<48>(*digest));
      }
      if (!r.done()) return Respond(wire::rc::kSize);
      for (const Digest48& d : to_extend) {
        PcrExtend(*handle, d, EventKind::kOther, "tpm2_pcrextend")
            .status()
            .IgnoreError();
      }
      return Respond(wire::rc::kSuccess);
    }

    default:
      return Respond(wire::rc::kCommandCode);
  }
}

Status Vtpm::Connect(Channel& channel) {
  client_.reset();
  HandshakeInitiator initiator(identity_, provisioning_.device_id,
                               provisioning_.crps, rng_,
                               config_.rekey_threshold);
  Status hs = RunInitiatorHandshake(channel, initiator, config_.timeout);
  if (initiator.consumed_crp()) {
    ++handshakes_;
    last_challenge_ = initiator.consumed_crp()->challenge;
  }
  if (!hs.ok()) {
    Fail(hs);
    return hs;
  }
  client_ = std::make_unique<SessionClient>(channel, initiator.session(),
                                            config_.timeout);
  deployment_key_ = DeriveDeploymentKey(initiator.session().state().sess_key);

  auto reply = client_->Call(AppType::kBootReportRequest, {});
  if (!reply.ok()) {
    Fail(reply.status());
    return reply.status();
  }
  auto events = DecodeBootReport(reply->body);
  if (!events.ok()) {
    Fail(events.status());
    return events.status();
  }
  if (events->size() != kBootComponentCount) {
    Status bad = MakeError(ErrorCode::kMalformed, "boot report size");
    Fail(bad);
    return bad;
  }
  for (std::size_t i = 0; i < events->size(); ++i) {
    const MeasurementEvent& e = (*events)[i];
    if (e.pcr_index != kPcrBootFirst + i || !IsValidLabel(e.label)) {
      Status bad = MakeError(ErrorCode::kMalformed, "boot report entry");
      Fail(bad);
      return bad;
    }
  }
  for (const MeasurementEvent& e : *events) {
    TRCTEE_RETURN_IF_ERROR(
        PcrExtend(e.pcr_index, e.digest, e.kind, e.label).status());
  }
  MaybeAutoRekey();
  return Status::Ok();
}

void Vtpm::MaybeAutoRekey() {
  if (!client_ || !client_->session().CounterTick()) return;
  Status s = RunUpdate(kAutoChallenge);
  if (!s.ok()) Fail(s);
}

wire::UpdateResp Vtpm::UpdateKey(const PufChallenge& challenge) {
  Status s = RunUpdate(challenge);
  if (!s.ok()) {
    Fail(s);
    return wire::UpdateResp{1};
  }
  return wire::UpdateResp{0};
}

Status Vtpm::RunUpdate(const PufChallenge& challenge) {
  if (!client_) return MakeError(ErrorCode::kNotEstablished, "no session");
  StatusOr<CrpRecord> crp = challenge == kAutoChallenge
                                ? provisioning_.crps.TakeUnused()
                                : provisioning_.crps.TakeChallenge(challenge);
  if (!crp.ok()) {
    if (crp.status().code() == ErrorCode::kExhausted) {
      return MakeError(ErrorCode::kCrpExhausted, "no unused CRP for update");
    }
    return crp.status();
  }
  ++updates_;
  last_challenge_ = crp->challenge;

  const SecureSession& current = client_->session();
  const Key32 old_key = current.state().sess_key;
  UpdateRequest request;
  request.new_epoch = current.state().epoch + 1;
  request.challenge = crp->challenge;
  request.salt = pcrs_.Composite();
  request.nonce = rng_.Array<16>();
  request.signature = Sign(identity_.tpm_key, request.SignedPayload());

  TRCTEE_ASSIGN_OR_RETURN(
      AppReply first,
      client_->Call(AppType::kUpdateRequest, request.Encode(), true));
  if (first.status != ErrorCode::kOk) {
    return MakeError(first.status, "device refused key update");
  }
  if (first.type != AppType::kUpdateReply) {
    return MakeError(ErrorCode::kMalformed, "unexpected reply to update");
  }
  TRCTEE_ASSIGN_OR_RETURN(UpdateReply reply, UpdateReply::Decode(first.body));

  Key32 new_key =
      DeriveRekeyKey(request.salt, crp->response, old_key, request.new_epoch);
  if (!ConstantTimeEqual(UpdateTmmMac(new_key, request, reply.nonce),
                         reply.mac)) {
    return MakeError(ErrorCode::kConfirmFailure, "device key confirmation");
  }
  SecureSession staged = client_->session().NextEpoch(new_key);
  Digest48 confirm = UpdateVtpmMac(new_key, request, reply);
  TRCTEE_ASSIGN_OR_RETURN(AppReply done, client_->Call(AppType::kUpdateConfirm,
                                                       confirm, true, &staged));
  if (done.status != ErrorCode::kOk) {
    return MakeError(done.status, "device rejected key confirmation");
  }
  if (done.type != AppType::kUpdateDone || staged.state().recv_counter == 0) {
    return MakeError(ErrorCode::kConfirmFailure,
                     "update completion not under new key");
  }
  client_->ReplaceSession(std::move(staged));
  msg_counter_ = 0;
  return Status::Ok();
}

wire::DeployResp Vtpm::Deploy(uint16_t ip_num) {
  wire::DeployResp failed{wire::rc::kFailure, {}};
  if (!client_) {
    Fail(MakeError(ErrorCode::kNotEstablished, "no session"));
    return failed;
  }
  ByteWriter body;
  body.U16(ip_num);
  auto reply = client_->Call(AppType::kDeployRequest, body.bytes());
  if (!reply.ok()) {
    Fail(reply.status());
    return failed;
  }
  if (reply->status != ErrorCode::kOk) {
    Fail(MakeError(reply->status, "deploy of ip " + std::to_string(ip_num)));
    return failed;
  }
  auto bin_hash = ToArray<48>(reply->body);
  if (!bin_hash || reply->type != AppType::kDeployReply) {
    Fail(MakeError(ErrorCode::kMalformed, "deploy reply"));
    return failed;
  }
  PcrExtend(kPcrDeploy, DeployRecordDigest(ip_num, *bin_hash),
            EventKind::kIpDeploy, IpLabel("ip-deploy", ip_num))
      .status()
      .IgnoreError();
  deployed_.insert(ip_num);
  MaybeAutoRekey();
  return wire::DeployResp{wire::rc::kSuccess, *bin_hash};
}

wire::InvokeResp Vtpm::Invoke(uint16_t ip_num, ByteSpan input, uint32_t flag) {
  if (deployed_.count(ip_num) == 0) {
    Fail(MakeError(ErrorCode::kNotDeployed,
                   "ip " + std::to_string(ip_num) + " not deployed"));
    return wire::InvokeResp{wire::rc::kNotDeployed, {}};
  }
  if (!client_) {
    Fail(MakeError(ErrorCode::kNotEstablished, "no session"));
    return wire::InvokeResp{wire::rc::kChannelFailure, {}};
  }
  PcrExtend(kPcrInvokeInput, Sha384(input), EventKind::kIpInput,
            IpLabel("ip-input", ip_num))
      .status()
      .IgnoreError();

  InvokeRequest request{ip_num, flag, ToBytes(input)};
  auto reply = client_->Call(AppType::kInvokeRequest, request.Encode());
  if (!reply.ok()) {
    Fail(reply.status());
    return wire::InvokeResp{wire::rc::kChannelFailure, {}};
  }
  if (reply->status != ErrorCode::kOk) {
    Fail(MakeError(reply->status, "invoke of ip " + std::to_string(ip_num)));
    uint32_t rc =
        reply->status == ErrorCode::kNotDeployed   ? wire::rc::kNotDeployed
        : reply->status == ErrorCode::kKernelFault ? wire::rc::kKernelFault
                                                   : wire::rc::kFailure;
    return wire::InvokeResp{rc, {}};
  }
  ByteReader r(reply->body);
  auto len = r.U32();
  auto output = len ? r.Raw(*len) : std::nullopt;
  if (!output || !r.done() || reply->type != AppType::kInvokeReply) {
    Fail(MakeError(ErrorCode::kMalformed, "invoke reply"));
    return wire::InvokeResp{wire::rc::kFailure, {}};
  }
  PcrExtend(kPcrInvokeOutput, Sha384(*output), EventKind::kIpOutput,
            IpLabel("ip-output", ip_num))
      .status()
      .IgnoreError();
  wire::InvokeResp resp{wire::rc::kSuccess, ToBytes(*output)};
  MaybeAutoRekey();
  return resp;
}

}  // namespace trctee
