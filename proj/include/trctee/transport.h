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

#ifndef TRCTEE_TRANSPORT_H_
#define TRCTEE_TRANSPORT_H_

// Record transport between the vTPM and the device. Every record travels as
// a 4-byte big-endian length prefix followed by the record bytes, over either
// an in-process byte pipe or a TCP socket.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trctee/bytes.h"
#include "trctee/status.h"

namespace trctee {

using Millis = std::chrono::milliseconds;

inline constexpr std::size_t kMaxRecordSize = std::size_t{1} << 24;

// Record kinds, told apart by the first byte.
namespace record {
inline constexpr uint8_t kHandshakeMarker = 0xFF;
inline constexpr uint8_t kAlertMarker = 0xFE;

inline bool IsFrame(ByteSpan r) { return !r.empty() && r[0] < 0x80; }
inline bool IsHandshake(ByteSpan r) {
  return r.size() >= 2 && r[0] == kHandshakeMarker;
}
inline bool IsAlert(ByteSpan r) { return !r.empty() && r[0] == kAlertMarker; }
}  // namespace record

// Raw byte stream underneath the record framing.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual Status Write(ByteSpan data) = 0;
  // Returns at least one byte, Timeout, or TransportClosed.
  virtual StatusOr<Bytes> ReadSome(Millis timeout) = 0;
  virtual void Close() = 0;
};

class Channel {
 public:
  virtual ~Channel() = default;
  virtual Status Send(ByteSpan record) = 0;
  virtual StatusOr<Bytes> Receive(Millis timeout) = 0;
  virtual void Close() = 0;
};

class FramedChannel : public Channel {
 public:
  explicit FramedChannel(std::unique_ptr<ByteStream> stream)
      : stream_(std::move(stream)) {}

  Status Send(ByteSpan record) override;
  StatusOr<Bytes> Receive(Millis timeout) override;
  void Close() override { stream_->Close(); }

 private:
  std::optional<Bytes> TakeBufferedRecord();

  std::unique_ptr<ByteStream> stream_;
  Bytes buffer_;
  bool poisoned_ = false;
};

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>>
MakePipeStreamPair();

// Two connected in-process channels.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>>
MakeInProcessChannelPair();

struct HostPort {
  std::string host = "127.0.0.1";
  uint16_t port = 0;
};

StatusOr<HostPort> ParseHostPort(std::string_view address);

class TcpListener {
 public:
  // BindError on failure. Port 0 picks an ephemeral port.
  static StatusOr<std::unique_ptr<TcpListener>> Bind(const HostPort& address);
  ~TcpListener();

  uint16_t port() const { return port_; }
  StatusOr<std::unique_ptr<Channel>> Accept(Millis timeout);

 private:
  TcpListener(int fd, uint16_t port) : fd_(fd), port_(port) {}
  int fd_;
  uint16_t port_;
};

// ConnectError on failure.
StatusOr<std::unique_ptr<Channel>> TcpConnect(const HostPort& address);

enum class Direction { kOutbound, kInbound };

struct TranscriptEntry {
  Direction direction;
  Bytes bytes;
  bool operator==(const TranscriptEntry&) const = default;
};

using Transcript = std::vector<TranscriptEntry>;

// Passive tap recording every record that crosses it.
class RecordingChannel : public Channel {
 public:
  explicit RecordingChannel(Channel& inner) : inner_(inner) {}

  Status Send(ByteSpan record) override;
  StatusOr<Bytes> Receive(Millis timeout) override;
  void Close() override { inner_.Close(); }

  Transcript transcript() const;

 private:
  Channel& inner_;
  mutable std::mutex mu_;
  Transcript transcript_;
};

enum class TamperAction { kFlipBit, kDrop, kReplay, kRewrite };

struct TamperRule {
  Direction direction = Direction::kInbound;
  TamperAction action = TamperAction::kFlipBit;
  // Only records satisfying the predicate are touched (default: frames).
  std::function<bool(ByteSpan)> match = record::IsFrame;
  std::function<Bytes(ByteSpan)> rewrite;
};

// Man-in-the-middle wrapper: each armed rule fires once on the next matching
// record in its direction.
//  kFlipBit  flips the low bit of the record's last byte.
//  kDrop     discards the record.
//  kReplay   outbound: re-sends the previous matching record after this one;
//            inbound: delivers a copy of the previous matching record first.
//  kRewrite  replaces the record with rewrite(record).
class TamperingChannel : public Channel {
 public:
  explicit TamperingChannel(Channel& inner) : inner_(inner) {}

  void Arm(TamperRule rule);
  std::size_t armed() const;
  std::size_t fired() const;

  Status Send(ByteSpan record) override;
  StatusOr<Bytes> Receive(Millis timeout) override;
  void Close() override { inner_.Close(); }

 private:
  std::optional<TamperRule> TakeRule(Direction dir, ByteSpan record,
                                     bool replay_only);

  Channel& inner_;
  mutable std::mutex mu_;
  std::vector<TamperRule> rules_;
  std::size_t fired_ = 0;
  std::optional<Bytes> last_outbound_;
  std::optional<Bytes> last_inbound_;
};

}  // namespace trctee

#endif  // TRCTEE_TRANSPORT_H_
