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

#ifndef TRCTEE_DEVICE_H_
#define TRCTEE_DEVICE_H_

// Simulated FPGA-SoC. The TMM is the only holder of the session key, the
// deployment key and the PCAP path into configuration memory. The REE-side
// TPM-Agent relays opaque records to it and owns nothing else.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "trctee/boot.h"
#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/handshake.h"
#include "trctee/link.h"
#include "trctee/pcr_bank.h"
#include "trctee/puf.h"
#include "trctee/session.h"
#include "trctee/status.h"
#include "trctee/transport.h"

namespace trctee {

// Plaintext bitstream: "TIPB" || kernel_len(1) || kernel_id || params_len(4)
// || params.
struct IpImage {
  static constexpr std::string_view kMagic = "TIPB";

  std::string kernel_id;
  Bytes params;

  Bytes Encode() const;
  // BadImage on a wrong magic or inconsistent lengths.
  static StatusOr<IpImage> Decode(ByteSpan bytes);
  bool operator==(const IpImage&) const = default;
};

// Encrypted bitstream file: "TEB1" || ip_num(2) || nonce(12) || ct_len(4)
// || ciphertext || tag. The AEAD associated data is "TEB1" || ip_num.
struct EncryptedBitstream {
  static constexpr std::string_view kMagic = "TEB1";

  uint16_t ip_num = 0;
  AeadNonce nonce{};
  Bytes ciphertext_and_tag;

  Bytes Encode() const;
  static StatusOr<EncryptedBitstream> Decode(ByteSpan bytes);
  bool operator==(const EncryptedBitstream&) const = default;
};

EncryptedBitstream EncryptBitstream(const Key32& deployment_key,
                                    uint16_t ip_num, ByteSpan plaintext,
                                    const AeadNonce& nonce);
// AuthFailure on any modification.
StatusOr<Bytes> DecryptBitstream(const Key32& deployment_key,
                                 const EncryptedBitstream& blob);

// REE file system holding uploaded bitstreams. Untrusted: anyone may
// overwrite a file.
class FileStore {
 public:
  explicit FileStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  Status Put(const std::string& name, ByteSpan blob);
  StatusOr<Bytes> Get(const std::string& name) const;
  bool Exists(const std::string& name) const;

  // "ip_00007.teb"
  static std::string BitstreamName(uint16_t ip_num);

 private:
  std::filesystem::path root_;
};

// Kernels are pure functions of (params, input). KernelFault on a shape the
// kernel does not accept.
using Kernel = std::function<StatusOr<Bytes>(ByteSpan params, ByteSpan input)>;

class KernelRegistry {
 public:
  // xor, add-constant, matmul8.
  static KernelRegistry Builtin();

  void Register(std::string name, Kernel kernel);
  const Kernel* Find(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Kernel, std::less<>> kernels_;
};

// matmul8: params are an 8x8 byte matrix B, input an 8x8 byte matrix A (both
// row-major); the output is A*B as 64 big-endian uint32 values.
inline constexpr std::size_t kMatmulDim = 8;

class ConfigMemory {
 public:
  struct Slot {
    IpImage image;
    Digest48 bin_hash{};
  };

  const Slot* Find(uint16_t ip_num) const;
  std::size_t size() const { return slots_.size(); }
  const std::map<uint16_t, Slot>& slots() const { return slots_; }

 private:
  friend class Tmm;
  void Install(uint16_t ip_num, Slot slot) { slots_[ip_num] = std::move(slot); }

  std::map<uint16_t, Slot> slots_;
};

// Anything that consumes records arriving from the vTPM.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual std::vector<Bytes> HandleRecord(ByteSpan record) = 0;
};

class Tmm : public RecordSink {
 public:
  Tmm(std::string device_id, const PublicKey& pk_ttp, const PufDevice& puf,
      std::vector<MeasurementEvent> boot_events, FileStore& store, Drbg rng,
      KernelRegistry kernels = KernelRegistry::Builtin());

  // Serialized: one record at a time.
  std::vector<Bytes> HandleRecord(ByteSpan record) override;

  const ConfigMemory& config_memory() const { return config_; }
  std::optional<SessionState> session_state() const;
  const ResponderMemory& responder_memory() const { return memory_; }
  // Last failure seen while handling a record, for diagnostics.
  Status last_error() const;

 private:
  std::vector<Bytes> HandleHandshake(ByteSpan record);
  std::vector<Bytes> HandleFrame(ByteSpan record);
  AppReply Dispatch(const AppRequest& request, uint64_t counter,
                    std::optional<SecureSession>* reply_session);
  AppReply Deploy(ByteSpan body);
  AppReply Invoke(ByteSpan body);
  AppReply BeginUpdate(ByteSpan body);
  AppReply FinishUpdate(ByteSpan body,
                        std::optional<SecureSession>* reply_session);

  std::string device_id_;
  PublicKey pk_ttp_;
  const PufDevice& puf_;
  std::vector<MeasurementEvent> boot_events_;
  FileStore& store_;
  Drbg rng_;
  KernelRegistry kernels_;

  mutable std::mutex mu_;
  ResponderMemory memory_;
  std::unique_ptr<HandshakeResponder> responder_;
  std::optional<SecureSession> session_;
  Key32 deployment_key_{};
  ConfigMemory config_;
  Status last_error_;

  struct PendingUpdate {
    UpdateRequest request;
    UpdateReply reply;
    Key32 new_key{};
  };
  std::optional<PendingUpdate> pending_update_;
};

// REE-side forwarder. It has no keys and no way to reach the TMM other than
// handing it opaque records.
class TpmAgent {
 public:
  explicit TpmAgent(RecordSink& tmm) : tmm_(tmm) {}

  // TransportClosed after Close().
  StatusOr<std::vector<Bytes>> Forward(ByteSpan record);
  void Close() { closed_ = true; }

 private:
  RecordSink& tmm_;
  std::atomic<bool> closed_{false};
};

class FpgaSocDevice {
 public:
  FpgaSocDevice(std::string device_id, PufDevice puf,
                std::filesystem::path store_root, Drbg rng);

  const std::string& device_id() const { return device_id_; }
  const PufDevice& puf() const { return puf_; }
  FileStore& file_store() { return store_; }

  // BootROM: measures every component and reads PK_TTP out of the FSBL.
  // Measurement only; a tampered component still boots.
  Status Boot(const BootImage& image);
  bool booted() const { return tmm_ != nullptr; }
  const std::vector<MeasurementEvent>& boot_events() const {
    return boot_events_;
  }

  TpmAgent& agent() { return *agent_; }
  const Tmm& tmm() const { return *tmm_; }

  // Relays records between `channel` and the TMM until the channel closes or
  // `stop` is set.
  Status Serve(Channel& channel, const std::atomic<bool>& stop);

 private:
  std::string device_id_;
  PufDevice puf_;
  FileStore store_;
  Drbg rng_;
  std::vector<MeasurementEvent> boot_events_;
  std::unique_ptr<Tmm> tmm_;
  std::unique_ptr<TpmAgent> agent_;
};

}  // namespace trctee

#endif  // TRCTEE_DEVICE_H_
