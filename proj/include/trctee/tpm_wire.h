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

#ifndef TRCTEE_TPM_WIRE_H_
#define TRCTEE_TPM_WIRE_H_

// TPM 2.0 command/response framing plus the three extended messages
// (Update, Deploy, Invoke). All integers are big-endian on the wire.

#include <cstdint>
#include <variant>

#include "trctee/bytes.h"
#include "trctee/status.h"

namespace trctee::wire {

inline constexpr uint16_t kTagNoSessions = 0x8001;
inline constexpr uint16_t kTagSessions = 0x8002;
inline constexpr std::size_t kHeaderSize = 10;

inline constexpr uint32_t kCcUpdate = 0x1F000000;
inline constexpr uint32_t kCcDeploy = 0x2F000000;
inline constexpr uint32_t kCcInvoke = 0x3F000000;

// Standard command codes handled by the vTPM.
inline constexpr uint32_t kCcGetRandom = 0x0000017B;
inline constexpr uint32_t kCcHash = 0x0000017D;
inline constexpr uint32_t kCcPcrRead = 0x0000017E;
inline constexpr uint32_t kCcPcrExtend = 0x00000182;

// Range of TPM 2.0 command codes accepted as standard passthrough.
inline constexpr uint32_t kCcStandardFirst = 0x0000011F;
inline constexpr uint32_t kCcStandardLast = 0x000001FF;

inline constexpr std::size_t kUpdateCmdSize = 14;
inline constexpr std::size_t kUpdateRespSize = 12;
inline constexpr std::size_t kDeployCmdSize = 12;
inline constexpr std::size_t kDeployRespSize = 58;
inline constexpr std::size_t kInvokeCmdOverhead = kHeaderSize + 2 + 4 + 4;
inline constexpr std::size_t kInvokeRespOverhead = kHeaderSize + 4;

// Response codes. 0/1 are the extended-command success/failure values; the
// rest are TPM 2.0 format-zero codes used for standard and malformed input.
namespace rc {
inline constexpr uint32_t kSuccess = 0x000;
inline constexpr uint32_t kFailure = 0x001;
inline constexpr uint32_t kNotDeployed = 0x002;
inline constexpr uint32_t kKernelFault = 0x003;
inline constexpr uint32_t kChannelFailure = 0x004;
inline constexpr uint32_t kBadTag = 0x01E;
inline constexpr uint32_t kHash = 0x083;
inline constexpr uint32_t kValue = 0x084;
inline constexpr uint32_t kSize = 0x095;
inline constexpr uint32_t kInsufficient = 0x09A;
inline constexpr uint32_t kTpmFailure = 0x101;
inline constexpr uint32_t kCommandCode = 0x143;
}  // namespace rc

enum class CommandClass { kStandard, kUpdateExt, kDeployExt, kInvokeExt };

CommandClass Classify(uint32_t command_code);

struct CommandHeader {
  uint16_t tag = kTagNoSessions;
  uint32_t total_length = 0;
  uint32_t command_code = 0;
  bool operator==(const CommandHeader&) const = default;
};

struct ResponseHeader {
  uint16_t tag = kTagNoSessions;
  uint32_t total_length = 0;
  uint32_t response_code = 0;
  bool operator==(const ResponseHeader&) const = default;
};

// Reads the 10-byte header and checks total_length against `bytes.size()`.
StatusOr<CommandHeader> ParseCommandHeader(ByteSpan bytes);
StatusOr<ResponseHeader> ParseResponseHeader(ByteSpan bytes);

using Challenge = ByteArray<4>;

// Any non-extended command; the body is carried opaque.
struct RawCommand {
  uint16_t tag = kTagNoSessions;
  uint32_t command_code = 0;
  Bytes body;
  bool operator==(const RawCommand&) const = default;
};

struct UpdateCmd {
  Challenge challenge{};
  bool operator==(const UpdateCmd&) const = default;
};

struct DeployCmd {
  uint16_t ip_num = 0;
  bool operator==(const DeployCmd&) const = default;
};

struct InvokeCmd {
  uint16_t ip_num = 0;
  Bytes input;
  uint32_t flag = 0;
  bool operator==(const InvokeCmd&) const = default;
};

using Command = std::variant<RawCommand, UpdateCmd, DeployCmd, InvokeCmd>;

struct RawResponse {
  uint16_t tag = kTagNoSessions;
  uint32_t response_code = 0;
  Bytes body;
  bool operator==(const RawResponse&) const = default;
};

// 0 = key updated, 1 = update failed. The header response_code mirrors it.
struct UpdateResp {
  uint16_t return_code = 0;
  bool operator==(const UpdateResp&) const = default;
};

struct DeployResp {
  uint32_t response_code = rc::kSuccess;
  Digest48 bin_hash{};
  bool operator==(const DeployResp&) const = default;
};

struct InvokeResp {
  uint32_t response_code = rc::kSuccess;
  Bytes output;
  bool operator==(const InvokeResp&) const = default;
};

using Response = std::variant<RawResponse, UpdateResp, DeployResp, InvokeResp>;

// Computes header + body length, failing with BodyTooLarge if it does not fit
// in the 4-byte total_length field.
StatusOr<uint32_t> CheckedTotalLength(std::size_t body_size);

StatusOr<Bytes> Encode(const Command& command);
StatusOr<Bytes> Encode(const Response& response);

StatusOr<Command> DecodeCommand(ByteSpan bytes);

// Responses carry no command code, so the caller names the command the
// response answers. A bare 10-byte header with a nonzero code always decodes
// as RawResponse, whatever `answers` is.
StatusOr<Response> DecodeResponse(ByteSpan bytes, CommandClass answers);

// Builds a header-only error response.
Bytes ErrorResponse(uint32_t response_code);

}  // namespace trctee::wire

#endif  // TRCTEE_TPM_WIRE_H_
