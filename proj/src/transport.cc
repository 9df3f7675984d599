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

#include "trctee/transport.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>

namespace trctee {
namespace {

// One direction of an in-process pipe.
struct PipeBuffer {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<uint8_t> data;
  bool closed = false;
};

class PipeStream : public ByteStream {
 public:
  PipeStream(std::shared_ptr<PipeBuffer> in, std::shared_ptr<PipeBuffer> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~PipeStream() override { Close(); }

  Status Write(ByteSpan data) override {
    std::lock_guard<std::mutex> lock(out_->mu);
    if (out_->closed) return MakeError(ErrorCode::kTransportClosed, "pipe");
    out_->data.insert(out_->data.end(), data.begin(), data.end());
    out_->cv.notify_all();
    return Status::Ok();
  }

  StatusOr<Bytes> ReadSome(Millis timeout) override {
    std::unique_lock<std::mutex> lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout,
                          [&] { return !in_->data.empty() || in_->closed; })) {
      return MakeError(ErrorCode::kTimeout, "pipe read");
    }
    if (in_->data.empty()) {
      return MakeError(ErrorCode::kTransportClosed, "pipe closed");
    }
    Bytes out(in_->data.begin(), in_->data.end());
    in_->data.clear();
    return out;
  }

  void Close() override {
    for (auto* buf : {in_.get(), out_.get()}) {
      std::lock_guard<std::mutex> lock(buf->mu);
      buf->closed = true;
      buf->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<PipeBuffer> in_;
  std::shared_ptr<PipeBuffer> out_;
};

class SocketStream : public ByteStream {
 public:
  explicit SocketStream(int fd) : fd_(fd) {}
  ~SocketStream() override {
    Close();
    if (fd_ >= 0) ::close(fd_);
  }

  Status Write(ByteSpan data) override {
    std::size_t sent = 0;
    while (sent < data.size()) {
      ssize_t n =
          ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return MakeError(ErrorCode::kTransportClosed, std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
    return Status::Ok();
  }

  StatusOr<Bytes> ReadSome(Millis timeout) override {
    pollfd pfd{fd_, POLLIN, 0};
    int rc;
    do {
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    if (rc == 0) return MakeError(ErrorCode::kTimeout, "socket read");
    if (rc < 0) {
      return MakeError(ErrorCode::kTransportClosed, std::strerror(errno));
    }
    Bytes buf(4096);
    ssize_t n;
    do {
      n = ::recv(fd_, buf.data(), buf.size(), 0);
    } while (n < 0 && errno == EINTR);
    if (n <= 0) return MakeError(ErrorCode::kTransportClosed, "peer closed");
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

  void Close() override {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_;
};

sockaddr_in ToSockaddr(const HostPort& address, bool* ok) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(address.port);
  *ok = ::inet_pton(AF_INET, address.host.c_str(), &sa.sin_addr) == 1;
  return sa;
}

}  // namespace

Status FramedChannel::Send(ByteSpan record) {
  if (record.size() > kMaxRecordSize) {
    return MakeError(ErrorCode::kBodyTooLarge, "record exceeds 16 MiB");
  }
  ByteWriter w(4 + record.size());
  w.U32(static_cast<uint32_t>(record.size())).Raw(record);
  return stream_->Write(w.bytes());
}

std::optional<Bytes> FramedChannel::TakeBufferedRecord() {
  if (buffer_.size() < 4) return std::nullopt;
  ByteReader r(buffer_);
  uint32_t len = *r.U32();
  if (len > kMaxRecordSize) {
    poisoned_ = true;
    return std::nullopt;
  }
  if (buffer_.size() < 4 + std::size_t{len}) return std::nullopt;
  Bytes out(buffer_.begin() + 4, buffer_.begin() + 4 + len);
  buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + len);
  return out;
}

StatusOr<Bytes> FramedChannel::Receive(Millis timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto rec = TakeBufferedRecord()) return std::move(*rec);
    if (poisoned_) {
      return MakeError(ErrorCode::kTransportClosed, "oversized record length");
    }
    auto remaining = std::chrono::duration_cast<Millis>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      return MakeError(ErrorCode::kTimeout, "no complete record");
    }
    TRCTEE_ASSIGN_OR_RETURN(Bytes chunk, stream_->ReadSome(remaining));
    buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
  }
}

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>>
MakePipeStreamPair() {
  auto a_to_b = std::make_shared<PipeBuffer>();
  auto b_to_a = std::make_shared<PipeBuffer>();
  return {std::make_unique<PipeStream>(b_to_a, a_to_b),
          std::make_unique<PipeStream>(a_to_b, b_to_a)};
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>>
MakeInProcessChannelPair() {
  auto [a, b] = MakePipeStreamPair();
  return {std::make_unique<FramedChannel>(std::move(a)),
          std::make_unique<FramedChannel>(std::move(b))};
}

StatusOr<HostPort> ParseHostPort(std::string_view address) {
  auto colon = address.rfind(':');
  if (colon == std::string_view::npos) {
    return MakeError(
        ErrorCode::kParseError,
        "address must be host:port, got '" + std::string(address) + "'");
  }
  HostPort hp;
  hp.host = std::string(address.substr(0, colon));
  if (hp.host.empty() || hp.host == "localhost") hp.host = "127.0.0.1";
  std::string_view port = address.substr(colon + 1);
  auto [ptr, ec] =
      std::from_chars(port.data(), port.data() + port.size(), hp.port);
  if (ec != std::errc() || ptr != port.data() + port.size()) {
    return MakeError(ErrorCode::kParseError,
                     "bad port in '" + std::string(address) + "'");
  }
  return hp;
}

StatusOr<std::unique_ptr<TcpListener>> TcpListener::Bind(
    const HostPort& address) {
  bool ok = false;
  sockaddr_in sa = ToSockaddr(address, &ok);
  if (!ok) return MakeError(ErrorCode::kBindError, "bad IPv4 " + address.host);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return MakeError(ErrorCode::kBindError, std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
      ::listen(fd, 4) != 0) {
    std::string err = std::strerror(errno);
    ::close(fd);
    return MakeError(
        ErrorCode::kBindError,
        address.host + ":" + std::to_string(address.port) + ": " + err);
  }
  socklen_t len = sizeof(sa);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  return std::unique_ptr<TcpListener>(new TcpListener(fd, ntohs(sa.sin_port)));
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

StatusOr<std::unique_ptr<Channel>> TcpListener::Accept(Millis timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc == 0) return MakeError(ErrorCode::kTimeout, "accept");
  if (rc < 0) return MakeError(ErrorCode::kBindError, std::strerror(errno));
  int cfd = ::accept(fd_, nullptr, nullptr);
  if (cfd < 0) return MakeError(ErrorCode::kBindError, std::strerror(errno));
  int one = 1;
  ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::unique_ptr<Channel>(
      new FramedChannel(std::make_unique<SocketStream>(cfd)));
}

StatusOr<std::unique_ptr<Channel>> TcpConnect(const HostPort& address) {
  bool ok = false;
  sockaddr_in sa = ToSockaddr(address, &ok);
  if (!ok) {
    return MakeError(ErrorCode::kConnectError, "bad IPv4 " + address.host);
  }
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return MakeError(ErrorCode::kConnectError, std::strerror(errno));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    std::string err = std::strerror(errno);
    ::close(fd);
    return MakeError(
        ErrorCode::kConnectError,
        address.host + ":" + std::to_string(address.port) + ": " + err);
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::unique_ptr<Channel>(
      new FramedChannel(std::make_unique<SocketStream>(fd)));
}

Status RecordingChannel::Send(ByteSpan record) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.push_back({Direction::kOutbound, ToBytes(record)});
  }
  return inner_.Send(record);
}

StatusOr<Bytes> RecordingChannel::Receive(Millis timeout) {
  auto rec = inner_.Receive(timeout);
  if (rec.ok()) {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.push_back({Direction::kInbound, *rec});
  }
  return rec;
}

Transcript RecordingChannel::transcript() const {
  std::lock_guard<std::mutex> lock(mu_);
  return transcript_;
}

void TamperingChannel::Arm(TamperRule rule) {
  std::lock_guard<std::mutex> lock(mu_);
  rules_.push_back(std::move(rule));
}

std::size_t TamperingChannel::armed() const {
  std::lock_guard<std::mutex> lock(mu_);
  return rules_.size();
}

std::size_t TamperingChannel::fired() const {
  std::lock_guard<std::mutex> lock(mu_);
  return fired_;
}

std::optional<TamperRule> TamperingChannel::TakeRule(Direction dir,
                                                     ByteSpan record,
                                                     bool replay_only) {
  for (auto it = rules_.begin(); it != rules_.end(); ++it) {
    if (it->direction != dir) continue;
    if (replay_only != (it->action == TamperAction::kReplay)) continue;
    if (it->match && !it->match(record)) continue;
    TamperRule rule = std::move(*it);
    rules_.erase(it);
    ++fired_;
    return rule;
  }
  return std::nullopt;
}

Status TamperingChannel::Send(ByteSpan record) {
  Bytes out = ToBytes(record);
  std::optional<Bytes> replay;
  {
    std::lock_guard<std::mutex> lock(mu_);
    std::optional<Bytes> previous = last_outbound_;
    if (auto rule = TakeRule(Direction::kOutbound, record, false)) {
      switch (rule->action) {
        case TamperAction::kFlipBit:
          if (!out.empty()) out.back() ^= 0x01;
          break;
        case TamperAction::kDrop:
          return Status::Ok();
        case TamperAction::kRewrite:
          if (rule->rewrite) out = rule->rewrite(record);
          break;
        case TamperAction::kReplay:
          break;
      }
    } else if (previous && TakeRule(Direction::kOutbound, *previous, true)) {
      replay = previous;
    }
    if (record::IsFrame(record)) last_outbound_ = ToBytes(record);
  }
  TRCTEE_RETURN_IF_ERROR(inner_.Send(out));
  if (replay) return inner_.Send(*replay);
  return Status::Ok();
}

StatusOr<Bytes> TamperingChannel::Receive(Millis timeout) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (last_inbound_ && TakeRule(Direction::kInbound, *last_inbound_, true)) {
      return *last_inbound_;
    }
  }
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    auto remaining = std::chrono::duration_cast<Millis>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() < 0) remaining = Millis(0);
    TRCTEE_ASSIGN_OR_RETURN(Bytes rec, inner_.Receive(remaining));
    std::lock_guard<std::mutex> lock(mu_);
    if (record::IsFrame(rec)) last_inbound_ = rec;
    auto rule = TakeRule(Direction::kInbound, rec, false);
    if (!rule) return rec;
    switch (rule->action) {
      case TamperAction::kFlipBit:
        if (!rec.empty()) rec.back() ^= 0x01;
        return rec;
      case TamperAction::kDrop:
        continue;
      case TamperAction::kRewrite:
        return rule->rewrite ? rule->rewrite(rec) : rec;
      case TamperAction::kReplay:
        return rec;
    }
  }
}

}  // namespace trctee
