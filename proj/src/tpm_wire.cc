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

#include "trctee/tpm_wire.h"

#include <cstdio>
#include <limits>
#include <string>

namespace trctee::wire {
namespace {

std::string HexCode(uint32_t code) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08X", code);
  return buf;
}

Bytes WithHeader(uint16_t tag, uint32_t total, uint32_t code, ByteSpan body) {
  ByteWriter w(total);
  w.U16(tag).U32(total).U32(code).Raw(body);
  return std::move(w).Take();
}

struct EncodeVisitor {
  StatusOr<Bytes> operator()(const RawCommand& c) const {
    TRCTEE_ASSIGN_OR_RETURN(uint32_t total, CheckedTotalLength(c.body.size()));
    return WithHeader(c.tag, total, c.command_code, c.body);
  }
  StatusOr<Bytes> operator()(const UpdateCmd& c) const {
    return WithHeader(kTagNoSessions, kUpdateCmdSize, kCcUpdate, c.challenge);
  }
  StatusOr<Bytes> operator()(const DeployCmd& c) const {
    ByteWriter body;
    body.U16(c.ip_num);
    return WithHeader(kTagNoSessions, kDeployCmdSize, kCcDeploy, body.bytes());
  }
  StatusOr<Bytes> operator()(const InvokeCmd& c) const {
    if (c.input.size() > std::numeric_limits<uint32_t>::max()) {
      return MakeError(ErrorCode::kBodyTooLarge, "input_length overflows");
    }
    TRCTEE_ASSIGN_OR_RETURN(uint32_t total,
                            CheckedTotalLength(2 + 4 + c.input.size() + 4));
    ByteWriter body(total);
    body.U16(c.ip_num)
        .U32(static_cast<uint32_t>(c.input.size()))
        .Raw(c.input)
        .U32(c.flag);
    return WithHeader(kTagNoSessions, total, kCcInvoke, body.bytes());
  }

  StatusOr<Bytes> operator()(const RawResponse& r) const {
    TRCTEE_ASSIGN_OR_RETURN(uint32_t total, CheckedTotalLength(r.body.size()));
    return WithHeader(r.tag, total, r.response_code, r.body);
  }
  StatusOr<Bytes> operator()(const UpdateResp& r) const {
    if (r.return_code > 1) {
      return MakeError(ErrorCode::kMalformed,
                       "Update_Resp return code not 0/1");
    }
    ByteWriter body;
    body.U16(r.return_code);
    return WithHeader(kTagNoSessions, kUpdateRespSize, r.return_code,
                      body.bytes());
  }
  StatusOr<Bytes> operator()(const DeployResp& r) const {
    return WithHeader(kTagNoSessions, kDeployRespSize, r.response_code,
                      r.bin_hash);
  }
  StatusOr<Bytes> operator()(const InvokeResp& r) const {
    if (r.output.size() > std::numeric_limits<uint32_t>::max()) {
      return MakeError(ErrorCode::kBodyTooLarge, "output_length overflows");
    }
    TRCTEE_ASSIGN_OR_RETURN(uint32_t total,
                            CheckedTotalLength(4 + r.output.size()));
    ByteWriter body(total);
    body.U32(static_cast<uint32_t>(r.output.size())).Raw(r.output);
    return WithHeader(kTagNoSessions, total, r.response_code, body.bytes());
  }
};

Status CheckTag(uint16_t tag) {
  if (tag != kTagNoSessions && tag != kTagSessions) {
    return MakeError(ErrorCode::kBadTag, "tag " + std::to_string(tag));
  }
  return Status::Ok();
}

// Shared by both header parsers: validates the declared length against the
// buffer without touching bytes past total_length.
StatusOr<std::pair<uint16_t, uint32_t>> ParseTagAndLength(ByteSpan bytes) {
  if (bytes.size() < kHeaderSize) {
    return MakeError(ErrorCode::kTruncated,
                     std::to_string(bytes.size()) + " bytes, header needs 10");
  }
  ByteReader r(bytes);
  uint16_t tag = *r.U16();
  uint32_t total = *r.U32();
  if (total < kHeaderSize) {
    return MakeError(ErrorCode::kLengthMismatch,
                     "total_length " + std::to_string(total) + " < 10");
  }
  if (bytes.size() < total) {
    return MakeError(ErrorCode::kTruncated,
                     "have " + std::to_string(bytes.size()) + " of " +
                         std::to_string(total) + " bytes");
  }
  if (bytes.size() != total) {
    return MakeError(ErrorCode::kLengthMismatch,
                     "total_length " + std::to_string(total) + " but " +
                         std::to_string(bytes.size()) + " bytes");
  }
  TRCTEE_RETURN_IF_ERROR(CheckTag(tag));
  return std::make_pair(tag, total);
}

Status ExpectSize(std::size_t actual, std::size_t expected, const char* what) {
  if (actual != expected) {
    return MakeError(ErrorCode::kLengthMismatch,
                     std::string(what) + " must be " +
                         std::to_string(expected) + " bytes, got " +
                         std::to_string(actual));
  }
  return Status::Ok();
}

}  // namespace

CommandClass Classify(uint32_t command_code) {
  switch (command_code) {
    case kCcUpdate:
      return CommandClass::kUpdateExt;
    case kCcDeploy:
      return CommandClass::kDeployExt;
    case kCcInvoke:
      return CommandClass::kInvokeExt;
    default:
      return CommandClass::kStandard;
  }
}

StatusOr<CommandHeader> ParseCommandHeader(ByteSpan bytes) {
  TRCTEE_ASSIGN_OR_RETURN(auto tag_len, ParseTagAndLength(bytes));
  ByteReader r(bytes.subspan(6));
  return CommandHeader{tag_len.first, tag_len.second, *r.U32()};
}

StatusOr<ResponseHeader> ParseResponseHeader(ByteSpan bytes) {
  TRCTEE_ASSIGN_OR_RETURN(auto tag_len, ParseTagAndLength(bytes));
  ByteReader r(bytes.subspan(6));
  return ResponseHeader{tag_len.first, tag_len.second, *r.U32()};
}

StatusOr<uint32_t> CheckedTotalLength(std::size_t body_size) {
  constexpr std::size_t kMax = std::numeric_limits<uint32_t>::max();
  if (body_size > kMax - kHeaderSize) {
    return MakeError(ErrorCode::kBodyTooLarge,
                     "body of " + std::to_string(body_size) + " bytes");
  }
  return static_cast<uint32_t>(kHeaderSize + body_size);
}

StatusOr<Bytes> Encode(const Command& command) {
  return std::visit(EncodeVisitor{}, command);
}

StatusOr<Bytes> Encode(const Response& response) {
  return std::visit(EncodeVisitor{}, response);
}

StatusOr<Command> DecodeCommand(ByteSpan bytes) {
  TRCTEE_ASSIGN_OR_RETURN(CommandHeader header, ParseCommandHeader(bytes));
  ByteReader body(
      bytes.subspan(kHeaderSize, header.total_length - kHeaderSize));
  CommandClass cls = Classify(header.command_code);
  if (cls != CommandClass::kStandard && header.tag != kTagNoSessions) {
    return MakeError(ErrorCode::kBadTag, "extended commands use tag 0x8001");
  }
  switch (cls) {
    case CommandClass::kUpdateExt: {
      TRCTEE_RETURN_IF_ERROR(
          ExpectSize(header.total_length, kUpdateCmdSize, "Update_CMD"));
      return Command(UpdateCmd{*body.Array<4>()});
    }
    case CommandClass::kDeployExt: {
      TRCTEE_RETURN_IF_ERROR(
          ExpectSize(header.total_length, kDeployCmdSize, "Deploy_CMD"));
      return Command(DeployCmd{*body.U16()});
    }
    case CommandClass::kInvokeExt: {
      if (header.total_length < kInvokeCmdOverhead) {
        return MakeError(ErrorCode::kLengthMismatch,
                         "Invoke_CMD shorter than its fixed fields");
      }
      InvokeCmd cmd;
      cmd.ip_num = *body.U16();
      uint32_t input_length = *body.U32();
      TRCTEE_RETURN_IF_ERROR(ExpectSize(
          header.total_length, kInvokeCmdOverhead + std::size_t{input_length},
          "Invoke_CMD"));
      cmd.input = ToBytes(*body.Raw(input_length));
      cmd.flag = *body.U32();
      return Command(std::move(cmd));
    }
    case CommandClass::kStandard:
      break;
  }
  if (header.command_code < kCcStandardFirst ||
      header.command_code > kCcStandardLast) {
    return MakeError(ErrorCode::kUnknownCode, HexCode(header.command_code));
  }
  return Command(
      RawCommand{header.tag, header.command_code, ToBytes(body.Rest())});
}

StatusOr<Response> DecodeResponse(ByteSpan bytes, CommandClass answers) {
  TRCTEE_ASSIGN_OR_RETURN(ResponseHeader header, ParseResponseHeader(bytes));
  ByteReader body(
      bytes.subspan(kHeaderSize, header.total_length - kHeaderSize));
  if (header.total_length == kHeaderSize && header.response_code != 0) {
    return Response(RawResponse{header.tag, header.response_code, {}});
  }
  if (answers != CommandClass::kStandard && header.tag != kTagNoSessions) {
    return MakeError(ErrorCode::kBadTag, "extended responses use tag 0x8001");
  }
  switch (answers) {
    case CommandClass::kUpdateExt: {
      TRCTEE_RETURN_IF_ERROR(
          ExpectSize(header.total_length, kUpdateRespSize, "Update_Resp"));
      uint16_t return_code = *body.U16();
      if (return_code > 1 || header.response_code != return_code) {
        return MakeError(ErrorCode::kMalformed,
                         "Update_Resp return code inconsistent");
      }
      return Response(UpdateResp{return_code});
    }
    case CommandClass::kDeployExt: {
      TRCTEE_RETURN_IF_ERROR(
          ExpectSize(header.total_length, kDeployRespSize, "Deploy_Resp"));
      return Response(DeployResp{header.response_code, *body.Array<48>()});
    }
    case CommandClass::kInvokeExt: {
      if (header.total_length < kInvokeRespOverhead) {
        return MakeError(ErrorCode::kLengthMismatch,
                         "Invoke_Resp shorter than its fixed fields");
      }
      uint32_t output_length = *body.U32();
      TRCTEE_RETURN_IF_ERROR(ExpectSize(
          header.total_length, kInvokeRespOverhead + std::size_t{output_length},
          "Invoke_Resp"));
      return Response(
          InvokeResp{header.response_code, ToBytes(*body.Raw(output_length))});
    }
    case CommandClass::kStandard:
      break;
  }
  return Response(
      RawResponse{header.tag, header.response_code, ToBytes(body.Rest())});
}

Bytes ErrorResponse(uint32_t response_code) {
  return WithHeader(kTagNoSessions, kHeaderSize, response_code, {});
}

}  // namespace trctee::wire
