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

#include "trctee/status.h"

#include <array>
#include <utility>

namespace trctee {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 38> kNames = {{
    {ErrorCode::kOk, "OK"},
    {ErrorCode::kBodyTooLarge, "BodyTooLarge"},
    {ErrorCode::kTruncated, "Truncated"},
    {ErrorCode::kLengthMismatch, "LengthMismatch"},
    {ErrorCode::kUnknownCode, "UnknownCode"},
    {ErrorCode::kBadTag, "BadTag"},
    {ErrorCode::kMalformed, "Malformed"},
    {ErrorCode::kIndexOutOfRange, "IndexOutOfRange"},
    {ErrorCode::kBadLength, "BadLength"},
    {ErrorCode::kUnsupportedAlg, "UnsupportedAlg"},
    {ErrorCode::kExhausted, "Exhausted"},
    {ErrorCode::kAlreadyUsed, "AlreadyUsed"},
    {ErrorCode::kDuplicateDevice, "DuplicateDevice"},
    {ErrorCode::kUnknownUser, "UnknownUser"},
    {ErrorCode::kUnknownDevice, "UnknownDevice"},
    {ErrorCode::kCrpExhausted, "CrpExhausted"},
    {ErrorCode::kNotFound, "NotFound"},
    {ErrorCode::kBadCert, "BadCert"},
    {ErrorCode::kPufMismatch, "PufMismatch"},
    {ErrorCode::kStaleNonce, "StaleNonce"},
    {ErrorCode::kTimeout, "Timeout"},
    {ErrorCode::kRekeyRequired, "RekeyRequired"},
    {ErrorCode::kAuthFailure, "AuthFailure"},
    {ErrorCode::kReplayDetected, "ReplayDetected"},
    {ErrorCode::kWrongEpoch, "WrongEpoch"},
    {ErrorCode::kConfirmFailure, "ConfirmFailure"},
    {ErrorCode::kNotEstablished, "NotEstablished"},
    {ErrorCode::kBadImage, "BadImage"},
    {ErrorCode::kNotDeployed, "NotDeployed"},
    {ErrorCode::kKernelFault, "KernelFault"},
    {ErrorCode::kTransportClosed, "TransportClosed"},
    {ErrorCode::kParseError, "ParseError"},
    {ErrorCode::kExpectationFailed, "ExpectationFailed"},
    {ErrorCode::kBindError, "BindError"},
    {ErrorCode::kConnectError, "ConnectError"},
    {ErrorCode::kInvalidArgument, "InvalidArgument"},
    {ErrorCode::kIoError, "IoError"},
    {ErrorCode::kInternal, "Internal"},
}};

}  // namespace

std::string_view ErrorName(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

bool ParseErrorName(std::string_view name, ErrorCode* code) {
  for (const auto& [c, n] : kNames) {
    if (n == name) {
      *code = c;
      return true;
    }
  }
  return false;
}

std::string Status::ToString() const {
  std::string out(ErrorName(code_));
  if (!message_.empty()) {
    out += ": ";
    out += message_;
  }
  return out;
}

}  // namespace trctee
