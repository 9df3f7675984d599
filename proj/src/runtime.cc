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

#include "trctee/runtime.h"

#include <sstream>

namespace trctee {
namespace {

Digest48 Chain(const std::vector<Digest48>& digests) {
  Digest48 value{};
  for (const Digest48& d : digests) value = ExtendDigest(value, d);
  return value;
}

std::optional<Digest48> LastOfKind(const std::vector<MeasurementEvent>& events,
                                   EventKind kind) {
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    if (it->kind == kind) return it->digest;
  }
  return std::nullopt;
}

}  // namespace

std::string_view VerdictName(Verdict verdict) {
  return verdict == Verdict::kVerified ? "Verified" : "Mismatch";
}

std::string ExpectedHistory::Serialize() const {
  std::string out;
  for (const auto& d : deploy_records) out += "deploy " + ToHex(d) + "\n";
  for (const auto& d : inputs) out += "input " + ToHex(d) + "\n";
  for (const auto& d : outputs) out += "output " + ToHex(d) + "\n";
  return out;
}

StatusOr<ExpectedHistory> ExpectedHistory::Parse(std::string_view text) {
  ExpectedHistory history;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string kind, hex, extra;
    fields >> kind >> hex;
    auto digest = ArrayFromHex<48>(hex);
    if (!digest.ok() || (fields >> extra)) {
      return MakeError(ErrorCode::kParseError,
                       "history line " + std::to_string(line_no));
    }
    if (kind == "deploy") {
      history.deploy_records.push_back(*digest);
    } else if (kind == "input") {
      history.inputs.push_back(*digest);
    } else if (kind == "output") {
      history.outputs.push_back(*digest);
    } else {
      return MakeError(ErrorCode::kParseError,
                       "history line " + std::to_string(line_no) +
                           ": unknown kind '" + kind + "'");
    }
  }
  return history;
}

StatusOr<DeployTicket> UserClient::PrepareDeploy(uint16_t ip_num,
                                                 const IpImage& image) {
  Bytes plaintext = image.Encode();
  DeployTicket ticket;
  ticket.ip_num = ip_num;
  ticket.local_plaintext_hash = BinHash(plaintext);
  ticket.blob_name = FileStore::BitstreamName(ip_num);
  EncryptedBitstream blob = EncryptBitstream(
      vtpm_.deployment_key(), ip_num, plaintext, rng_.Array<kAeadNonceSize>());
  TRCTEE_RETURN_IF_ERROR(store_.Put(ticket.blob_name, blob.Encode()));
  return ticket;
}

DeployOutcome UserClient::Deploy(const DeployTicket& ticket) {
  DeployOutcome outcome;
  auto command = wire::Encode(wire::Command(wire::DeployCmd{ticket.ip_num}));
  auto response = wire::DecodeResponse(vtpm_.Dispatch(*command),
                                       wire::CommandClass::kDeployExt);
  if (response.ok()) {
    if (auto* deploy = std::get_if<wire::DeployResp>(&*response)) {
      outcome.response = *deploy;
    } else {
      outcome.response.response_code =
          std::get<wire::RawResponse>(*response).response_code;
    }
  } else {
    outcome.response.response_code = wire::rc::kFailure;
  }
  if (outcome.response.response_code == wire::rc::kSuccess) {
    history_.deploy_records.push_back(
        DeployRecordDigest(ticket.ip_num, ticket.local_plaintext_hash));
    if (outcome.response.bin_hash == ticket.local_plaintext_hash) {
      outcome.verdict = Verdict::kVerified;
    }
  }
  return outcome;
}

InvokeOutcome UserClient::Invoke(uint16_t ip_num, ByteSpan input,
                                 uint32_t flag) {
  InvokeOutcome outcome;
  outcome.record.ip_num = ip_num;
  outcome.record.flag = flag;
  outcome.record.input_digest = Sha384(input);

  auto command = wire::Encode(
      wire::Command(wire::InvokeCmd{ip_num, ToBytes(input), flag}));
  if (!command.ok()) {
    outcome.response.response_code = wire::rc::kFailure;
    return outcome;
  }
  auto response = wire::DecodeResponse(vtpm_.Dispatch(*command),
                                       wire::CommandClass::kInvokeExt);
  if (response.ok()) {
    if (auto* invoke = std::get_if<wire::InvokeResp>(&*response)) {
      outcome.response = *invoke;
    } else {
      outcome.response.response_code =
          std::get<wire::RawResponse>(*response).response_code;
    }
  } else {
    outcome.response.response_code = wire::rc::kFailure;
  }

  // The vTPM records the input whenever it forwarded the request, which is
  // every case except a local NotDeployed refusal.
  if (outcome.response.response_code != wire::rc::kNotDeployed) {
    history_.inputs.push_back(outcome.record.input_digest);
  }
  if (outcome.response.response_code != wire::rc::kSuccess) return outcome;

  outcome.record.output_digest = Sha384(outcome.response.output);
  history_.outputs.push_back(outcome.record.output_digest);

  auto events = ParseEventLog(vtpm_.ExportLog());
  if (!events.ok()) return outcome;
  auto replayed = ReplayEvents(*events);
  auto pcr9 = PcrRead(kPcrInvokeInput);
  auto pcr10 = PcrRead(kPcrInvokeOutput);
  if (!replayed.ok() || !pcr9.ok() || !pcr10.ok()) return outcome;
  bool matches =
      LastOfKind(*events, EventKind::kIpInput) == outcome.record.input_digest &&
      LastOfKind(*events, EventKind::kIpOutput) ==
          outcome.record.output_digest &&
      (*replayed)[kPcrInvokeInput] == *pcr9 &&
      (*replayed)[kPcrInvokeOutput] == *pcr10;
  if (matches) outcome.record.verdict = Verdict::kVerified;
  return outcome;
}

wire::UpdateResp UserClient::UpdateKey(const PufChallenge& challenge) {
  auto command = wire::Encode(wire::Command(wire::UpdateCmd{challenge}));
  auto response = wire::DecodeResponse(vtpm_.Dispatch(*command),
                                       wire::CommandClass::kUpdateExt);
  if (response.ok()) {
    if (auto* update = std::get_if<wire::UpdateResp>(&*response)) {
      return *update;
    }
  }
  return wire::UpdateResp{1};
}

StatusOr<Digest48> UserClient::PcrRead(std::size_t index) {
  if (index >= kNumPcrs) {
    return MakeError(ErrorCode::kIndexOutOfRange, std::to_string(index));
  }
  ByteWriter body;
  body.U32(1).U16(alg_id::kSha384).U8(3);
  uint8_t select[3] = {0, 0, 0};
  select[index / 8] = static_cast<uint8_t>(1u << (index % 8));
  body.Raw(ByteSpan(select, 3));
  TRCTEE_ASSIGN_OR_RETURN(
      Bytes command,
      wire::Encode(wire::Command(wire::RawCommand{
          wire::kTagNoSessions, wire::kCcPcrRead, body.bytes()})));
  TRCTEE_ASSIGN_OR_RETURN(wire::Response response,
                          wire::DecodeResponse(vtpm_.Dispatch(command),
                                               wire::CommandClass::kStandard));
  const auto& raw = std::get<wire::RawResponse>(response);
  if (raw.response_code != wire::rc::kSuccess) {
    return MakeError(ErrorCode::kInternal, "PCR_Read failed");
  }
  // updateCounter(4) || selection(4 + 6) || count(4) || size(2) || digest.
  ByteReader r(raw.body);
  r.Raw(4 + 4 + 6 + 4 + 2);
  auto digest = r.Array<48>();
  if (!digest || !r.done()) {
    return MakeError(ErrorCode::kMalformed, "PCR_Read response");
  }
  return *digest;
}

StatusOr<Bytes> UserClient::GetRandom(uint16_t n) {
  ByteWriter body;
  body.U16(n);
  TRCTEE_ASSIGN_OR_RETURN(
      Bytes command,
      wire::Encode(wire::Command(wire::RawCommand{
          wire::kTagNoSessions, wire::kCcGetRandom, body.bytes()})));
  TRCTEE_ASSIGN_OR_RETURN(wire::Response response,
                          wire::DecodeResponse(vtpm_.Dispatch(command),
                                               wire::CommandClass::kStandard));
  const auto& raw = std::get<wire::RawResponse>(response);
  if (raw.response_code != wire::rc::kSuccess) {
    return MakeError(ErrorCode::kBadLength, "GetRandom refused");
  }
  ByteReader r(raw.body);
  auto size = r.U16();
  auto bytes = size ? r.Raw(*size) : std::nullopt;
  if (!bytes || !r.done()) {
    return MakeError(ErrorCode::kMalformed, "GetRandom response");
  }
  return ToBytes(*bytes);
}

bool AttestationReport::all_verified() const { return mismatches().empty(); }

std::vector<std::size_t> AttestationReport::mismatches() const {
  std::vector<std::size_t> out;
  for (const auto& r : registers) {
    if (r.verdict != Verdict::kVerified) out.push_back(r.index);
  }
  return out;
}

std::string AttestationReport::MachineLines() const {
  std::string out;
  for (const auto& r : registers) {
    out += std::to_string(r.index) + " " + std::string(VerdictName(r.verdict)) +
           " expected " + ToHex(r.expected) + " actual " + ToHex(r.actual) +
           "\n";
  }
  return out;
}

std::string AttestationReport::ToText() const {
  std::string out;
  auto bad = mismatches();
  if (bad.empty()) {
    out += "attestation: all 24 registers verified\n";
  } else {
    out += "attestation: mismatch in PCR";
    for (std::size_t i = 0; i < bad.size(); ++i) {
      out += (i ? "," : "") + std::to_string(bad[i]);
    }
    out += "\n";
  }
  for (const auto& f : findings) out += "finding: " + f + "\n";
  out += MachineLines();
  return out;
}

AttestationReport VerifyAttestation(std::string_view log_text,
                                    const GoldenManifest& manifest,
                                    const ExpectedHistory& history,
                                    const std::optional<PcrValues>& reported) {
  AttestationReport report;
  PcrValues expected{};
  auto boot = ExpectedBootPcrs(manifest);
  for (std::size_t i = 0; i < boot.size(); ++i)
    expected[kPcrBootFirst + i] = boot[i];
  expected[kPcrDeploy] = Chain(history.deploy_records);
  expected[kPcrInvokeInput] = Chain(history.inputs);
  expected[kPcrInvokeOutput] = Chain(history.outputs);

  PcrValues actual{};
  auto events = ParseEventLog(log_text);
  if (!events.ok()) {
    report.findings.push_back("event log rejected: " +
                              events.status().ToString());
  } else {
    auto replayed = ReplayEvents(*events);
    if (replayed.ok()) {
      actual = *replayed;
    } else {
      report.findings.push_back("event log replay failed: " +
                                replayed.status().ToString());
    }
  }

  for (std::size_t i = 0; i < kNumPcrs; ++i) {
    RegisterVerdict v;
    v.index = i;
    v.expected = expected[i];
    v.actual = actual[i];
    v.verdict = (events.ok() && expected[i] == actual[i]) ? Verdict::kVerified
                                                          : Verdict::kMismatch;
    if (reported && (*reported)[i] != actual[i]) {
      v.verdict = Verdict::kMismatch;
      report.findings.push_back("PCR" + std::to_string(i) +
                                ": log does not reproduce the reported value");
    }
    report.registers.push_back(v);
  }
  return report;
}

std::string SerializePcrSnapshot(const PcrValues& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i) + " " + ToHex(values[i]) + "\n";
  }
  return out;
}

StatusOr<PcrValues> ParsePcrSnapshot(std::string_view text) {
  PcrValues values{};
  std::vector<bool> seen(kNumPcrs, false);
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t index = kNumPcrs;
    std::string hex;
    fields >> index >> hex;
    auto digest = ArrayFromHex<48>(hex);
    if (index >= kNumPcrs || !digest.ok() || seen[index]) {
      return MakeError(ErrorCode::kParseError, "snapshot line '" + line + "'");
    }
    values[index] = *digest;
    seen[index] = true;
  }
  for (bool s : seen) {
    if (!s) return MakeError(ErrorCode::kParseError, "snapshot incomplete");
  }
  return values;
}

}  // namespace trctee
