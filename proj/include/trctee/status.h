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

#ifndef TRCTEE_STATUS_H_
#define TRCTEE_STATUS_H_

#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace trctee {

// Every typed failure the library reports. Names are stable; they appear in
// scenario files and reports.
enum class ErrorCode {
  kOk = 0,
  // tpm_wire
  kBodyTooLarge,
  kTruncated,
  kLengthMismatch,
  kUnknownCode,
  kBadTag,
  kMalformed,
  // vtpm_core
  kIndexOutOfRange,
  kBadLength,
  kUnsupportedAlg,
  // puf_model
  kExhausted,
  kAlreadyUsed,
  // ttp_service
  kDuplicateDevice,
  kUnknownUser,
  kUnknownDevice,
  kCrpExhausted,
  kNotFound,
  // secure_channel
  kBadCert,
  kPufMismatch,
  kStaleNonce,
  kTimeout,
  kRekeyRequired,
  kAuthFailure,
  kReplayDetected,
  kWrongEpoch,
  kConfirmFailure,
  kNotEstablished,
  // fpga_soc_sim
  kBadImage,
  kNotDeployed,
  kKernelFault,
  kTransportClosed,
  // cli_harness
  kParseError,
  kExpectationFailed,
  kBindError,
  kConnectError,
  // generic
  kInvalidArgument,
  kIoError,
  kInternal,
};

std::string_view ErrorName(ErrorCode code);

// Inverse of ErrorName; returns false for unknown names.
bool ParseErrorName(std::string_view name, ErrorCode* code);

class [[nodiscard]] Status {
 public:
  Status() = default;
  Status(ErrorCode code, std::string message)
      : code_(code), message_(std::move(message)) {}

  static Status Ok() { return Status(); }

  bool ok() const { return code_ == ErrorCode::kOk; }
  ErrorCode code() const { return code_; }
  const std::string& message() const { return message_; }

  // "AuthFailure: frame tag mismatch", or "OK".
  std::string ToString() const;

  void IgnoreError() const {}

 private:
  ErrorCode code_ = ErrorCode::kOk;
  std::string message_;
};

inline Status MakeError(ErrorCode code, std::string message = {}) {
  return Status(code, std::move(message));
}

template <typename T>
class [[nodiscard]] StatusOr {
 public:
  StatusOr(const T& value) : data_(value) {}            // NOLINT
  StatusOr(T&& value) : data_(std::move(value)) {}      // NOLINT
  StatusOr(Status status) : data_(std::move(status)) {  // NOLINT
    if (std::get<Status>(data_).ok()) {
      data_ = Status(ErrorCode::kInternal, "StatusOr built from OK status");
    }
  }

  bool ok() const { return std::holds_alternative<T>(data_); }

  Status status() const {
    return ok() ? Status::Ok() : std::get<Status>(data_);
  }

  const T& value() const& { return std::get<T>(data_); }
  T& value() & { return std::get<T>(data_); }
  T&& value() && { return std::get<T>(std::move(data_)); }

  const T& operator*() const& { return value(); }
  T& operator*() & { return value(); }
  T&& operator*() && { return std::move(*this).value(); }
  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }

 private:
  std::variant<T, Status> data_;
};

}  // namespace trctee

#define TRCTEE_STATUS_CONCAT_INNER_(a, b) a##b
#define TRCTEE_STATUS_CONCAT_(a, b) TRCTEE_STATUS_CONCAT_INNER_(a, b)

#define TRCTEE_RETURN_IF_ERROR(expr)                 \
  do {                                               \
    ::trctee::Status _trctee_status = (expr);        \
    if (!_trctee_status.ok()) return _trctee_status; \
  } while (0)

#define TRCTEE_ASSIGN_OR_RETURN_IMPL_(tmp, lhs, expr) \
  auto tmp = (expr);                                  \
  if (!tmp.ok()) return tmp.status();                 \
  lhs = std::move(tmp).value()

#define TRCTEE_ASSIGN_OR_RETURN(lhs, expr) \
  TRCTEE_ASSIGN_OR_RETURN_IMPL_(           \
      TRCTEE_STATUS_CONCAT_(_trctee_statusor_, __LINE__), lhs, expr)

#endif  // TRCTEE_STATUS_H_
