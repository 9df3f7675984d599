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

#include "trctee/device.h"

#include <cstdio>
#include <limits>

namespace trctee {
namespace {

Bytes BitstreamAssociatedData(uint16_t ip_num) {
  ByteWriter w;
  w.Str(EncryptedBitstream::kMagic).U16(ip_num);
  return std::move(w).Take();
}

Status Fault(std::string what) {
  return MakeError(ErrorCode::kKernelFault, std::move(what));
}

StatusOr<Bytes> XorKernel(ByteSpan params, ByteSpan input) {
  if (params.size() != input.size()) {
    return Fault("xor: input length " + std::to_string(input.size()) +
                 " != key length " + std::to_string(params.size()));
  }
  Bytes out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] ^ params[i];
  return out;
}

StatusOr<Bytes> AddConstantKernel(ByteSpan params, ByteSpan input) {
  if (params.size() != 1) return Fault("add-constant: params must be 1 byte");
  Bytes out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = static_cast<uint8_t>(input[i] + params[0]);
  }
  return out;
}

StatusOr<Bytes> Matmul8Kernel(ByteSpan params, ByteSpan input) {
  constexpr std::size_t n = kMatmulDim;
  if (params.size() != n * n || input.size() != n * n) {
    return Fault("matmul8: operands must be 64 bytes");
  }
  ByteWriter w(n * n * 4);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      uint32_t acc = 0;
      for (std::size_t k = 0; k < n; ++k) {
        acc += uint32_t{input[i * n + k]} * uint32_t{params[k * n + j]};
      }
      w.U32(acc);
    }
  }
  return std::move(w).Take();
}

AppReply Failure(AppType type, const Status& status) {
  return AppReply{type, 0, status.code(), {}};
}

}  // namespace

Bytes IpImage::Encode() const {
  ByteWriter w;
  w.Str(kMagic)
      .U8(static_cast<uint8_t>(kernel_id.size()))
      .Str(kernel_id)
      .U32(static_cast<uint32_t>(params.size()))
      .Raw(params);
  return std::move(w).Take();
}

StatusOr<IpImage> IpImage::Decode(ByteSpan bytes) {
  ByteReader r(bytes);
  auto magic = r.Raw(4);
  if (!magic || !std::equal(magic->begin(), magic->end(), kMagic.begin())) {
    return MakeError(ErrorCode::kBadImage, "bitstream magic");
  }
  auto id_len = r.U8();
  auto id = id_len ? r.Raw(*id_len) : std::nullopt;
  auto params_len = id ? r.U32() : std::nullopt;
  auto params = params_len ? r.Raw(*params_len) : std::nullopt;
  if (!params || !r.done()) {
    return MakeError(ErrorCode::kBadImage, "bitstream layout");
  }
  IpImage image;
  image.kernel_id.assign(id->begin(), id->end());
  image.params = ToBytes(*params);
  return image;
}

Bytes EncryptedBitstream::Encode() const {
  ByteWriter w;
  w.Str(kMagic)
      .U16(ip_num)
      .Raw(nonce)
      .U32(static_cast<uint32_t>(ciphertext_and_tag.size()))
      .Raw(ciphertext_and_tag);
  return std::move(w).Take();
}

StatusOr<EncryptedBitstream> EncryptedBitstream::Decode(ByteSpan bytes) {
  ByteReader r(bytes);
  auto magic = r.Raw(4);
  if (!magic || !std::equal(magic->begin(), magic->end(), kMagic.begin())) {
    return MakeError(ErrorCode::kBadImage, "encrypted bitstream magic");
  }
  EncryptedBitstream blob;
  auto ip = r.U16();
  auto nonce = r.Array<kAeadNonceSize>();
  auto len = r.U32();
  auto ct = len ? r.Raw(*len) : std::nullopt;
  if (!ct || !r.done() || ct->size() < kAeadTagSize) {
    return MakeError(ErrorCode::kBadImage, "encrypted bitstream layout");
  }
  blob.ip_num = *ip;
  blob.nonce = *nonce;
  blob.ciphertext_and_tag = ToBytes(*ct);
  return blob;
}

EncryptedBitstream EncryptBitstream(const Key32& deployment_key,
                                    uint16_t ip_num, ByteSpan plaintext,
                                    const AeadNonce& nonce) {
  EncryptedBitstream blob;
  blob.ip_num = ip_num;
  blob.nonce = nonce;
  blob.ciphertext_and_tag = AeadSeal(
      deployment_key, nonce, BitstreamAssociatedData(ip_num), plaintext);
  return blob;
}

StatusOr<Bytes> DecryptBitstream(const Key32& deployment_key,
                                 const EncryptedBitstream& blob) {
  return AeadOpen(deployment_key, blob.nonce,
                  BitstreamAssociatedData(blob.ip_num),
                  blob.ciphertext_and_tag);
}

FileStore::FileStore(std::filesystem::path root) : root_(std::move(root)) {}

Status FileStore::Put(const std::string& name, ByteSpan blob) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) return MakeError(ErrorCode::kIoError, ec.message());
  return WriteFileAtomically(
      root_ / name, std::string_view(reinterpret_cast<const char*>(blob.data()),
                                     blob.size()));
}

StatusOr<Bytes> FileStore::Get(const std::string& name) const {
  TRCTEE_ASSIGN_OR_RETURN(std::string text, ReadFileToString(root_ / name));
  return ToBytes(AsBytes(text));
}

bool FileStore::Exists(const std::string& name) const {
  return std::filesystem::exists(root_ / name);
}

std::string FileStore::BitstreamName(uint16_t ip_num) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ip_%05u.teb", unsigned{ip_num});
  return buf;
}

KernelRegistry KernelRegistry::Builtin() {
  KernelRegistry registry;
  registry.Register("xor", XorKernel);
  registry.Register("add-constant", AddConstantKernel);
  registry.Register("matmul8", Matmul8Kernel);
  return registry;
}

void KernelRegistry::Register(std::string name, Kernel kernel) {
  kernels_[std::move(name)] = std::move(kernel);
}

const Kernel* KernelRegistry::Find(std::string_view name) const {
  auto it = kernels_.find(name);
  return it == kernels_.end() ? nullptr : &it->second;
}

std::vector<std::string> KernelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, kernel] : kernels_) out.push_back(name);
  return out;
}

const ConfigMemory::Slot* ConfigMemory::Find(uint16_t ip_num) const {
  auto it = slots_.find(ip_num);
  return it == slots_.end() ? nullptr : &it->second;
}

Tmm::Tmm(std::string device_id, const PublicKey& pk_ttp, const PufDevice& puf,
         std::vector<MeasurementEvent> boot_events, FileStore& store, Drbg rng,
         KernelRegistry kernels)
    : device_id_(std::move(device_id)),
      pk_ttp_(pk_ttp),
      puf_(puf),
      boot_events_(std::move(boot_events)),
      store_(store),
      rng_(std::move(rng)),
      kernels_(std::move(kernels)) {
  responder_ = std::make_unique<HandshakeResponder>(device_id_, pk_ttp_, puf_,
                                                    rng_, memory_);
}

std::optional<SessionState> Tmm::session_state() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (!session_) return std::nullopt;
  return session_->state();
}

Status Tmm::last_error() const {
  std::lock_guard<std::mutex> lock(mu_);
  return last_error_;
}

std::vector<Bytes> Tmm::HandleRecord(ByteSpan record) {
  std::lock_guard<std::mutex> lock(mu_);
  if (record::IsHandshake(record)) return HandleHandshake(record);
  if (record::IsFrame(record)) return HandleFrame(record);
  return {};
}

std::vector<Bytes> Tmm::HandleHandshake(ByteSpan record) {
  HandshakeResponder::Step step = responder_->OnMessage(record);
  if (!step.status.ok()) last_error_ = step.status;
  if (responder_->established()) {
    session_ = responder_->session();
    deployment_key_ = DeriveDeploymentKey(session_->state().sess_key);
    pending_update_.reset();
  }
  std::vector<Bytes> out;
  if (step.reply) out.push_back(std::move(*step.reply));
  return out;
}

std::vector<Bytes> Tmm::HandleFrame(ByteSpan record) {
  auto alert = [this](const Status& status, uint64_t counter) {
    last_error_ = status;
    return std::vector<Bytes>{EncodeAlert(Alert{status.code(), counter})};
  };
  auto frame = Frame::Decode(record);
  if (!frame.ok()) return alert(frame.status(), 0);
  if (!session_) {
    return alert(MakeError(ErrorCode::kNotEstablished, "no session"),
                 frame->counter);
  }
  auto plaintext = session_->Open(*frame);
  if (!plaintext.ok()) return alert(plaintext.status(), frame->counter);
  auto request = DecodeRequest(*plaintext);
  if (!request.ok()) return alert(request.status(), frame->counter);

  std::optional<SecureSession> reply_session;
  AppReply reply = Dispatch(*request, frame->counter, &reply_session);
  if (reply.status != ErrorCode::kOk) {
    last_error_ = MakeError(reply.status, "request failed");
  }
  SecureSession& sealer = reply_session ? *reply_session : *session_;
  auto sealed = sealer.SealControl(EncodeReply(reply));
  if (!sealed.ok()) return alert(sealed.status(), frame->counter);
  if (reply_session) session_ = std::move(*reply_session);
  return {sealed->Encode()};
}

AppReply Tmm::Dispatch(const AppRequest& request, uint64_t counter,
                       std::optional<SecureSession>* reply_session) {
  AppReply reply;
  switch (request.type) {
    case AppType::kBootReportRequest:
      reply = AppReply{AppType::kBootReport, 0, ErrorCode::kOk,
                       EncodeBootReport(boot_events_)};
      break;
    case AppType::kDeployRequest:
      reply = Deploy(request.body);
      break;
    case AppType::kInvokeRequest:
      reply = Invoke(request.body);
      break;
    case AppType::kUpdateRequest:
      reply = BeginUpdate(request.body);
      break;
    case AppType::kUpdateConfirm:
      reply = FinishUpdate(request.body, reply_session);
      break;
    default:
      reply = Failure(request.type,
                      MakeError(ErrorCode::kMalformed, "not a request"));
      break;
  }
  reply.in_reply_to = counter;
  return reply;
}

AppReply Tmm::Deploy(ByteSpan body) {
  ByteReader r(body);
  auto ip = r.U16();
  if (!ip || !r.done()) {
    return Failure(AppType::kDeployReply,
                   MakeError(ErrorCode::kMalformed, "deploy request"));
  }
  auto fail = [](const Status& s) { return Failure(AppType::kDeployReply, s); };

  auto raw = store_.Get(FileStore::BitstreamName(*ip));
  if (!raw.ok()) return fail(MakeError(ErrorCode::kNotFound, "no bitstream"));
  auto blob = EncryptedBitstream::Decode(*raw);
  if (!blob.ok()) return fail(blob.status());
  if (blob->ip_num != *ip) {
    return fail(MakeError(ErrorCode::kBadImage, "bitstream ip_num mismatch"));
  }
  auto plaintext = DecryptBitstream(deployment_key_, *blob);
  if (!plaintext.ok()) return fail(plaintext.status());
  auto image = IpImage::Decode(*plaintext);
  if (!image.ok()) return fail(image.status());
  if (kernels_.Find(image->kernel_id) == nullptr) {
    return fail(
        MakeError(ErrorCode::kBadImage, "unknown kernel " + image->kernel_id));
  }

  Digest48 bin_hash = BinHash(*plaintext);
  config_.Install(*ip, ConfigMemory::Slot{std::move(*image), bin_hash});
  return AppReply{AppType::kDeployReply, 0, ErrorCode::kOk, ToBytes(bin_hash)};
}

AppReply Tmm::Invoke(ByteSpan body) {
  auto fail = [](const Status& s) { return Failure(AppType::kInvokeReply, s); };
  auto request = InvokeRequest::Decode(body);
  if (!request.ok()) return fail(request.status());
  const ConfigMemory::Slot* slot = config_.Find(request->ip_num);
  if (slot == nullptr) {
    return fail(MakeError(ErrorCode::kNotDeployed,
                          "ip " + std::to_string(request->ip_num)));
  }
  if (request->flag != 0) return fail(Fault("nonzero flag"));
  const Kernel* kernel = kernels_.Find(slot->image.kernel_id);
  auto output = (*kernel)(slot->image.params, request->input);
  if (!output.ok()) return fail(output.status());
  ByteWriter w;
  w.U32(static_cast<uint32_t>(output->size())).Raw(*output);
  return AppReply{AppType::kInvokeReply, 0, ErrorCode::kOk,
                  std::move(w).Take()};
}

AppReply Tmm::BeginUpdate(ByteSpan body) {
  pending_update_.reset();
  auto fail = [](const Status& s) { return Failure(AppType::kUpdateReply, s); };
  auto request = UpdateRequest::Decode(body);
  if (!request.ok()) return fail(request.status());
  if (!Verify(responder_->peer_key(), request->SignedPayload(),
              request->signature)) {
    return fail(MakeError(ErrorCode::kAuthFailure, "update signature"));
  }
  if (request->new_epoch != session_->state().epoch + 1 ||
      request->new_epoch > kMaxEpoch) {
    return fail(MakeError(ErrorCode::kWrongEpoch, "update epoch"));
  }
  if (!memory_.used_challenges.insert(request->challenge).second) {
    return fail(MakeError(ErrorCode::kAlreadyUsed, "challenge replayed"));
  }
  PufResponse response = puf_.Respond(request->challenge);
  Key32 new_key = DeriveRekeyKey(
      request->salt, response, session_->state().sess_key, request->new_epoch);
  UpdateReply reply;
  reply.nonce = rng_.Array<16>();
  reply.mac = UpdateTmmMac(new_key, *request, reply.nonce);
  pending_update_ = PendingUpdate{*request, reply, new_key};
  return AppReply{AppType::kUpdateReply, 0, ErrorCode::kOk, reply.Encode()};
}

AppReply Tmm::FinishUpdate(ByteSpan body,
                           std::optional<SecureSession>* reply_session) {
  auto fail = [](const Status& s) { return Failure(AppType::kUpdateDone, s); };
  if (!pending_update_) {
    return fail(MakeError(ErrorCode::kNotEstablished, "no update pending"));
  }
  PendingUpdate pending = *pending_update_;
  pending_update_.reset();
  ByteReader r(body);
  auto mac = r.Array<48>();
  if (!mac || !r.done()) {
    return fail(MakeError(ErrorCode::kMalformed, "update confirm"));
  }
  Digest48 expected =
      UpdateVtpmMac(pending.new_key, pending.request, pending.reply);
  if (!ConstantTimeEqual(expected, *mac)) {
    return fail(MakeError(ErrorCode::kConfirmFailure, "vTPM key confirmation"));
  }
  *reply_session = session_->NextEpoch(pending.new_key);
  return AppReply{AppType::kUpdateDone, 0, ErrorCode::kOk, {}};
}

StatusOr<std::vector<Bytes>> TpmAgent::Forward(ByteSpan record) {
  if (closed_) return MakeError(ErrorCode::kTransportClosed, "agent closed");
  return tmm_.HandleRecord(record);
}

FpgaSocDevice::FpgaSocDevice(std::string device_id, PufDevice puf,
                             std::filesystem::path store_root, Drbg rng)
    : device_id_(std::move(device_id)),
      puf_(puf),
      store_(std::move(store_root)),
      rng_(std::move(rng)) {}

Status FpgaSocDevice::Boot(const BootImage& image) {
  TRCTEE_ASSIGN_OR_RETURN(PublicKey pk_ttp, ExtractTtpKey(image.components[0]));
  boot_events_ = TrustedBoot(image);
  tmm_ = std::make_unique<Tmm>(device_id_, pk_ttp, puf_, boot_events_, store_,
                               rng_.Fork("tmm"));
  agent_ = std::make_unique<TpmAgent>(*tmm_);
  return Status::Ok();
}

Status FpgaSocDevice::Serve(Channel& channel, const std::atomic<bool>& stop) {
  if (!booted()) return MakeError(ErrorCode::kNotEstablished, "not booted");
  while (!stop.load()) {
    auto rec = channel.Receive(Millis(20));
    if (!rec.ok()) {
      if (rec.status().code() == ErrorCode::kTimeout) continue;
      if (rec.status().code() == ErrorCode::kTransportClosed) {
        return Status::Ok();
      }
      return rec.status();
    }
    TRCTEE_ASSIGN_OR_RETURN(std::vector<Bytes> replies, agent_->Forward(*rec));
    for (const Bytes& reply : replies) {
      Status sent = channel.Send(reply);
      if (!sent.ok()) {
        return sent.code() == ErrorCode::kTransportClosed ? Status::Ok() : sent;
      }
    }
  }
  return Status::Ok();
}

}  // namespace trctee
