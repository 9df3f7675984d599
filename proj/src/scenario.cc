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

#include "trctee/scenario.h"

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>

#include "trctee/boot.h"
#include "trctee/device.h"
#include "trctee/handshake.h"
#include "trctee/ttp.h"
#include "trctee/vtpm.h"

namespace trctee {
namespace {

struct StepSpec {
  StepKind kind;
  std::string_view name;
  std::vector<std::string_view> required;
  std::vector<std::string_view> optional;
  std::vector<Adversary> adversaries;
};

const std::vector<StepSpec>& Specs() {
  using A = Adversary;
  static const std::vector<StepSpec> specs = {
      {StepKind::kEnrollDevice, "enroll-device", {"id"}, {}, {}},
      {StepKind::kEnrollVtpm, "enroll-vtpm", {"user"}, {}, {}},
      {StepKind::kProvision, "provision", {"user", "device"}, {"count"}, {}},
      {StepKind::kBoot,
       "boot",
       {"device"},
       {"component"},
       {A::kTamperComponent}},
      {StepKind::kHandshake,
       "handshake",
       {},
       {},
       {A::kSwapVtpmCert, A::kDropFrame}},
      {StepKind::kDeploy,
       "deploy",
       {"ip", "kernel"},
       {"params"},
       {A::kTamperBitstream, A::kTamperFrame, A::kReplayFrame, A::kDropFrame}},
      {StepKind::kInvoke,
       "invoke",
       {"ip", "input"},
       {"flag", "expect-output"},
       {A::kTamperFrame, A::kReplayFrame, A::kDropFrame}},
      {StepKind::kUpdateKey,
       "update-key",
       {},
       {"challenge"},
       {A::kReuseCrp, A::kTamperFrame, A::kReplayFrame, A::kDropFrame}},
      {StepKind::kAgentDeploy, "agent-deploy", {"ip"}, {}, {}},
      {StepKind::kVerify, "verify", {}, {"expect-mismatch"}, {}},
  };
  return specs;
}

const std::vector<std::pair<Adversary, std::string_view>>& AdversaryNames() {
  static const std::vector<std::pair<Adversary, std::string_view>> names = {
      {Adversary::kNone, "none"},
      {Adversary::kTamperFrame, "tamper-frame"},
      {Adversary::kReplayFrame, "replay-frame"},
      {Adversary::kDropFrame, "drop-frame"},
      {Adversary::kTamperComponent, "tamper-component"},
      {Adversary::kReuseCrp, "reuse-crp"},
      {Adversary::kSwapVtpmCert, "swap-vtpm-cert"},
      {Adversary::kTamperBitstream, "tamper-bitstream"},
  };
  return names;
}

bool IsFrameAdversary(Adversary a) {
  return a == Adversary::kTamperFrame || a == Adversary::kReplayFrame ||
         a == Adversary::kDropFrame;
}

Status LineError(int line, const std::string& what) {
  return MakeError(ErrorCode::kParseError,
                   "line " + std::to_string(line) + ": " + what);
}

StatusOr<uint64_t> ParseUnsigned(const std::string& text, uint64_t max) {
  if (text.empty() || text.size() > 20 ||
      !std::all_of(text.begin(), text.end(), ::isdigit)) {
    return MakeError(ErrorCode::kParseError, "not a number: '" + text + "'");
  }
  uint64_t value = std::stoull(text);
  if (value > max) {
    return MakeError(ErrorCode::kParseError, "out of range: " + text);
  }
  return value;
}

}  // namespace

std::string_view StepName(StepKind kind) {
  for (const auto& spec : Specs()) {
    if (spec.kind == kind) return spec.name;
  }
  return "?";
}

std::string_view AdversaryName(Adversary adversary) {
  for (const auto& [a, name] : AdversaryNames()) {
    if (a == adversary) return name;
  }
  return "?";
}

std::string ScenarioStep::Arg(const std::string& key,
                              std::string fallback) const {
  auto it = args.find(key);
  return it == args.end() ? fallback : it->second;
}

StatusOr<Scenario> ParseScenario(std::string_view text) {
  Scenario scenario;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;

  std::set<std::string> devices, users, booted;
  std::optional<std::string> provisioned_device;
  bool handshake_seen = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    std::istringstream tokens(line);
    std::vector<std::string> words;
    for (std::string w; tokens >> w;) words.push_back(w);
    if (words.empty()) continue;

    if (!header_seen) {
      if (words.size() != 2 || words[0] + " " + words[1] != kScenarioHeader) {
        return LineError(
            line_no, "expected header '" + std::string(kScenarioHeader) + "'");
      }
      header_seen = true;
      continue;
    }

    auto spec =
        std::find_if(Specs().begin(), Specs().end(),
                     [&](const StepSpec& s) { return s.name == words[0]; });
    if (spec == Specs().end()) {
      return LineError(line_no, "unknown step '" + words[0] + "'");
    }
    ScenarioStep step;
    step.kind = spec->kind;
    step.line = line_no;

    for (std::size_t i = 1; i < words.size(); ++i) {
      auto eq = words[i].find('=');
      if (eq == std::string::npos || eq == 0) {
        return LineError(line_no, "expected key=value, got '" + words[i] + "'");
      }
      std::string key = words[i].substr(0, eq);
      std::string value = words[i].substr(eq + 1);
      if (step.args.count(key) != 0) {
        return LineError(line_no, "duplicate key '" + key + "'");
      }
      step.args[key] = value;
    }

    std::set<std::string> allowed(spec->required.begin(), spec->required.end());
    allowed.insert(spec->optional.begin(), spec->optional.end());
    allowed.insert("expect");
    if (!spec->adversaries.empty()) allowed.insert("adversary");

    if (auto it = step.args.find("adversary"); it != step.args.end()) {
      auto found =
          std::find_if(AdversaryNames().begin(), AdversaryNames().end(),
                       [&](const auto& p) { return p.second == it->second; });
      if (found == AdversaryNames().end() ||
          std::find(spec->adversaries.begin(), spec->adversaries.end(),
                    found->first) == spec->adversaries.end()) {
        return LineError(line_no, "adversary '" + it->second +
                                      "' not allowed on " + words[0]);
      }
      step.adversary = found->first;
      if (IsFrameAdversary(step.adversary)) allowed.insert("dir");
    }
    for (const auto& [key, value] : step.args) {
      if (allowed.count(key) == 0) {
        return LineError(line_no, "unknown key '" + key + "' for " + words[0]);
      }
    }
    for (auto key : spec->required) {
      if (step.args.count(std::string(key)) == 0) {
        return LineError(line_no,
                         words[0] + " needs " + std::string(key) + "=");
      }
    }
    if (step.adversary == Adversary::kTamperComponent) {
      if (!BootComponentIndex(step.Arg("component")).ok()) {
        return LineError(line_no, "tamper-component needs a boot component");
      }
    } else if (step.args.count("component") != 0) {
      return LineError(line_no, "component= only goes with tamper-component");
    }
    if (auto dir = step.Arg("dir");
        !dir.empty() && dir != "in" && dir != "out") {
      return LineError(line_no, "dir must be in or out");
    }
    if (auto expect = step.Arg("expect", "ok"); expect != "ok") {
      if (!ParseErrorName(expect, &step.expect) ||
          step.expect == ErrorCode::kOk) {
        return LineError(line_no, "unknown error name '" + expect + "'");
      }
    }
    for (auto key : {"ip", "flag", "count"}) {
      if (step.args.count(key) == 0) continue;
      uint64_t max = std::string(key) == "ip" ? 0xFFFF : 0xFFFFFFFF;
      if (!ParseUnsigned(step.args[key], max).ok()) {
        return LineError(line_no, std::string(key) + " must be a number");
      }
    }
    for (auto key : {"params", "input", "expect-output"}) {
      if (step.args.count(key) != 0 && !FromHex(step.args[key]).ok()) {
        return LineError(line_no, std::string(key) + " must be hex");
      }
    }
    if (auto c = step.Arg("challenge", "auto"); c != "auto") {
      if (!ArrayFromHex<kChallengeSize>(c).ok()) {
        return LineError(line_no, "challenge must be 4 hex bytes or auto");
      }
    }
    if (auto list = step.Arg("expect-mismatch"); !list.empty()) {
      std::istringstream items(list);
      for (std::string item; std::getline(items, item, ',');) {
        auto index = ParseUnsigned(item, kNumPcrs - 1);
        if (!index.ok()) {
          return LineError(line_no, "expect-mismatch takes PCR indices 0..23");
        }
        step.expect_mismatch.push_back(*index);
      }
    }

    // Ordering grammar.
    switch (step.kind) {
      case StepKind::kEnrollDevice:
        if (!devices.empty()) {
          return LineError(line_no, "one device per scenario");
        }
        devices.insert(step.Arg("id"));
        break;
      case StepKind::kEnrollVtpm:
        if (!users.empty()) return LineError(line_no, "one vTPM per scenario");
        users.insert(step.Arg("user"));
        break;
      case StepKind::kProvision:
        if (users.count(step.Arg("user")) == 0) {
          return LineError(line_no, "provision before enroll-vtpm");
        }
        if (devices.count(step.Arg("device")) == 0) {
          return LineError(line_no, "provision before enroll-device");
        }
        if (provisioned_device)
          return LineError(line_no, "already provisioned");
        provisioned_device = step.Arg("device");
        break;
      case StepKind::kBoot:
        if (devices.count(step.Arg("device")) == 0) {
          return LineError(line_no, "boot before enroll-device");
        }
        if (booted.count(step.Arg("device")) != 0) {
          return LineError(line_no, "device already booted");
        }
        booted.insert(step.Arg("device"));
        break;
      case StepKind::kHandshake:
        if (!provisioned_device) {
          return LineError(line_no, "handshake before provision");
        }
        if (booted.count(*provisioned_device) == 0) {
          return LineError(line_no, "handshake before boot");
        }
        handshake_seen = true;
        break;
      case StepKind::kDeploy:
      case StepKind::kInvoke:
      case StepKind::kUpdateKey:
      case StepKind::kAgentDeploy:
      case StepKind::kVerify:
        if (!handshake_seen) {
          return LineError(line_no, words[0] + " before handshake");
        }
        break;
    }
    scenario.steps.push_back(std::move(step));
  }
  if (!header_seen) return LineError(line_no, "empty scenario");
  return scenario;
}

bool RunResult::passed() const {
  return std::all_of(steps.begin(), steps.end(),
                     [](const StepResult& s) { return s.passed; });
}

std::string RunResult::ToText() const {
  std::string out;
  for (const auto& s : steps) {
    out += "step " + std::to_string(s.index + 1) + " (line " +
           std::to_string(s.line) + ") " + s.name + ": " +
           std::string(ErrorName(s.observed));
    if (s.expected != ErrorCode::kOk || s.observed != ErrorCode::kOk) {
      out += " expected " + std::string(ErrorName(s.expected));
    }
    out += s.passed ? " PASS" : " FAIL";
    if (!s.detail.empty()) out += " (" + s.detail + ")";
    out += "\n";
  }
  out += "handshakes " + std::to_string(handshakes) + ", key updates " +
         std::to_string(updates) + ", CRPs consumed " +
         std::to_string(crps_consumed) + "\n";
  if (report) out += report->ToText();
  out += passed() ? "scenario: PASS\n" : "scenario: FAIL\n";
  return out;
}

namespace {

// Everything a scenario run builds. The device thread services the device
// end of the link; the runner drives the vTPM end.
class World {
 public:
  explicit World(const RunOptions& options)
      : options_(options),
        ttp_(Drbg(options.seed, "ttp"),
             TtpOptions{std::max<std::size_t>(256, options.pool),
                        options.pool}) {}

  ~World() { Shutdown(); }

  StepResult Run(const ScenarioStep& step);
  void Finish(RunResult& result);

 private:
  Status EnrollDevice(const ScenarioStep& step);
  Status EnrollVtpm(const ScenarioStep& step);
  Status Provision(const ScenarioStep& step);
  Status Boot(const ScenarioStep& step);
  Status Handshake(const ScenarioStep& step);
  Status Deploy(const ScenarioStep& step, std::string* detail);
  Status Invoke(const ScenarioStep& step, std::string* detail);
  Status UpdateKey(const ScenarioStep& step);
  Status AgentDeploy(const ScenarioStep& step, std::string* detail);
  Status Verify(const ScenarioStep& step, std::string* detail);

  Status OpenLink();
  void ArmFrameAdversary(const ScenarioStep& step);
  Status CheckAdversaryFired(const ScenarioStep& step);
  void Shutdown();

  const RunOptions& options_;
  Ttp ttp_;
  std::string device_id_;
  std::unique_ptr<FpgaSocDevice> device_;
  std::optional<VtpmBundle> bundle_;
  std::unique_ptr<Vtpm> vtpm_;
  std::unique_ptr<UserClient> user_;

  std::unique_ptr<Channel> vtpm_end_;
  std::unique_ptr<RecordingChannel> recorder_;
  std::unique_ptr<TamperingChannel> tamper_;
  std::unique_ptr<Channel> device_end_;
  std::unique_ptr<TcpListener> listener_;
  std::thread device_thread_;
  std::atomic<bool> stop_{false};
  std::size_t fired_before_ = 0;
  std::size_t crps_at_provision_ = 0;
  std::optional<AttestationReport> report_;
};

StepResult World::Run(const ScenarioStep& step) {
  StepResult result;
  result.line = step.line;
  result.name = std::string(StepName(step.kind));
  if (step.adversary != Adversary::kNone) {
    result.name += " [" + std::string(AdversaryName(step.adversary)) + "]";
  }
  result.expected = step.expect;

  Status status;
  std::string detail;
  switch (step.kind) {
    case StepKind::kEnrollDevice:
      status = EnrollDevice(step);
      break;
    case StepKind::kEnrollVtpm:
      status = EnrollVtpm(step);
      break;
    case StepKind::kProvision:
      status = Provision(step);
      break;
    case StepKind::kBoot:
      status = Boot(step);
      break;
    case StepKind::kHandshake:
      status = Handshake(step);
      break;
    case StepKind::kDeploy:
      status = Deploy(step, &detail);
      break;
    case StepKind::kInvoke:
      status = Invoke(step, &detail);
      break;
    case StepKind::kUpdateKey:
      status = UpdateKey(step);
      break;
    case StepKind::kAgentDeploy:
      status = AgentDeploy(step, &detail);
      break;
    case StepKind::kVerify:
      status = Verify(step, &detail);
      break;
  }
  result.observed = status.code();
  result.passed = status.code() == step.expect && detail.empty();
  if (detail.empty() && !status.ok()) detail = status.message();
  if (IsFrameAdversary(step.adversary) ||
      step.adversary == Adversary::kSwapVtpmCert) {
    Status fired = CheckAdversaryFired(step);
    if (!fired.ok()) {
      result.passed = false;
      detail = fired.message();
    }
  }
  result.detail = detail;
  return result;
}

Status World::EnrollDevice(const ScenarioStep& step) {
  device_id_ = step.Arg("id");
  Drbg fab(options_.seed, "puf:" + device_id_);
  PufDevice puf(fab.Array<32>());
  BootImage golden = MakeGoldenBootImage(ttp_.public_key());
  TRCTEE_RETURN_IF_ERROR(ttp_.EnrollDevice(device_id_, puf, golden).status());
  std::filesystem::path ree = options_.work_dir / "devices" / device_id_;
  std::error_code ec;
  std::filesystem::remove_all(ree, ec);
  device_ = std::make_unique<FpgaSocDevice>(
      device_id_, puf, ree, Drbg(options_.seed, "device:" + device_id_));
  return Status::Ok();
}

Status World::EnrollVtpm(const ScenarioStep& step) {
  ttp_.RegisterUser(step.Arg("user"));
  TRCTEE_ASSIGN_OR_RETURN(VtpmBundle bundle, ttp_.EnrollVtpm(step.Arg("user")));
  bundle_ = std::move(bundle);
  return Status::Ok();
}

Status World::Provision(const ScenarioStep& step) {
  std::optional<std::size_t> count;
  if (auto c = step.Arg("count"); !c.empty()) count = std::stoull(c);
  TRCTEE_ASSIGN_OR_RETURN(
      DeviceProvisioning prov,
      ttp_.ProvisionUser(step.Arg("user"), step.Arg("device"), count));
  crps_at_provision_ = prov.crps.unused_count();
  vtpm_ = std::make_unique<Vtpm>(
      *bundle_, std::move(prov), Drbg(options_.seed, "vtpm"),
      VtpmConfig{options_.rekey_threshold, options_.timeout});
  user_ = std::make_unique<UserClient>(*vtpm_, device_->file_store(),
                                       Drbg(options_.seed, "user"));
  return Status::Ok();
}

Status World::Boot(const ScenarioStep& step) {
  BootImage image = MakeGoldenBootImage(ttp_.public_key());
  if (step.adversary == Adversary::kTamperComponent) {
    std::size_t k = *BootComponentIndex(step.Arg("component"));
    Bytes& blob = image.components[k];
    if (blob.empty()) {
      blob.push_back(0x01);
    } else {
      blob.back() ^= 0x01;
    }
  }
  return device_->Boot(image);
}

Status World::OpenLink() {
  if (vtpm_end_) return Status::Ok();
  if (options_.transport == TransportKind::kInProcess) {
    auto [a, b] = MakeInProcessChannelPair();
    vtpm_end_ = std::move(a);
    device_end_ = std::move(b);
    device_thread_ = std::thread(
        [this] { device_->Serve(*device_end_, stop_).IgnoreError(); });
  } else {
    TRCTEE_ASSIGN_OR_RETURN(listener_, TcpListener::Bind(HostPort{}));
    device_thread_ = std::thread([this] {
      auto accepted = listener_->Accept(Millis(5000));
      if (!accepted.ok()) return;
      device_end_ = std::move(*accepted);
      device_->Serve(*device_end_, stop_).IgnoreError();
    });
    TRCTEE_ASSIGN_OR_RETURN(
        vtpm_end_, TcpConnect(HostPort{"127.0.0.1", listener_->port()}));
  }
  recorder_ = std::make_unique<RecordingChannel>(*vtpm_end_);
  tamper_ = std::make_unique<TamperingChannel>(*recorder_);
  return Status::Ok();
}

void World::ArmFrameAdversary(const ScenarioStep& step) {
  fired_before_ = tamper_ ? tamper_->fired() : 0;
  if (!IsFrameAdversary(step.adversary)) return;
  TamperRule rule;
  std::string dir = step.Arg("dir");
  if (dir.empty()) dir = step.adversary == Adversary::kDropFrame ? "out" : "in";
  rule.direction = dir == "out" ? Direction::kOutbound : Direction::kInbound;
  rule.action =
      step.adversary == Adversary::kTamperFrame   ? TamperAction::kFlipBit
      : step.adversary == Adversary::kReplayFrame ? TamperAction::kReplay
                                                  : TamperAction::kDrop;
  if (step.kind == StepKind::kHandshake) rule.match = record::IsHandshake;
  tamper_->Arm(std::move(rule));
}

Status World::CheckAdversaryFired(const ScenarioStep& step) {
  if (!tamper_ || tamper_->fired() == fired_before_) {
    return MakeError(ErrorCode::kExpectationFailed,
                     std::string(AdversaryName(step.adversary)) +
                         " found nothing to act on");
  }
  return Status::Ok();
}

Status World::Handshake(const ScenarioStep& step) {
  TRCTEE_RETURN_IF_ERROR(OpenLink());
  ArmFrameAdversary(step);
  if (step.adversary == Adversary::kSwapVtpmCert) {
    // A certificate for the attacker's own key, signed by a TTP the device
    // does not trust.
    Drbg rogue(options_.seed, "rogue-ttp");
    SigningKeyPair rogue_ttp = SigningKeyPairFromSeed(rogue.Array<32>());
    SigningKeyPair attacker = SigningKeyPairFromSeed(rogue.Array<32>());
    Bytes forged =
        IssueCertificate(rogue_ttp, bundle_->user_id, attacker.public_key)
            .Encode();
    TamperRule rule;
    rule.direction = Direction::kOutbound;
    rule.action = TamperAction::kRewrite;
    rule.match = [](ByteSpan r) { return record::IsHandshake(r) && r[1] == 1; };
    rule.rewrite = [forged](ByteSpan m1) {
      ByteWriter w;
      w.Raw(m1.subspan(0, 2 + 16))
          .U16(static_cast<uint16_t>(forged.size()))
          .Raw(forged);
      return std::move(w).Take();
    };
    tamper_->Arm(std::move(rule));
  }
  return vtpm_->Connect(*tamper_);
}

Status World::Deploy(const ScenarioStep& step, std::string* detail) {
  if (!vtpm_->connected()) {
    return MakeError(ErrorCode::kNotEstablished, "no session");
  }
  uint16_t ip = static_cast<uint16_t>(std::stoul(step.Arg("ip")));
  IpImage image{step.Arg("kernel"), *FromHex(step.Arg("params"))};
  TRCTEE_ASSIGN_OR_RETURN(DeployTicket ticket, user_->PrepareDeploy(ip, image));
  if (step.adversary == Adversary::kTamperBitstream) {
    TRCTEE_ASSIGN_OR_RETURN(Bytes blob,
                            device_->file_store().Get(ticket.blob_name));
    blob.back() ^= 0x01;
    TRCTEE_RETURN_IF_ERROR(device_->file_store().Put(ticket.blob_name, blob));
  }
  ArmFrameAdversary(step);
  Digest48 pcr8_before = *vtpm_->PcrRead(kPcrDeploy);
  DeployOutcome outcome = user_->Deploy(ticket);
  if (outcome.response.response_code != wire::rc::kSuccess) {
    if (*vtpm_->PcrRead(kPcrDeploy) != pcr8_before) {
      *detail = "PCR8 changed on a failed deploy";
    }
    return vtpm_->last_error();
  }
  if (outcome.verdict != Verdict::kVerified) {
    return MakeError(ErrorCode::kExpectationFailed,
                     "bin_hash differs from the local hash");
  }
  return Status::Ok();
}

Status World::Invoke(const ScenarioStep& step, std::string* detail) {
  uint16_t ip = static_cast<uint16_t>(std::stoul(step.Arg("ip")));
  Bytes input = *FromHex(step.Arg("input"));
  uint32_t flag = static_cast<uint32_t>(std::stoul(step.Arg("flag", "0")));
  ArmFrameAdversary(step);
  Digest48 pcr10_before = *vtpm_->PcrRead(kPcrInvokeOutput);
  InvokeOutcome outcome = user_->Invoke(ip, input, flag);
  if (outcome.response.response_code != wire::rc::kSuccess) {
    if (*vtpm_->PcrRead(kPcrInvokeOutput) != pcr10_before) {
      *detail = "PCR10 changed on a failed invoke";
    }
    return vtpm_->last_error();
  }
  if (outcome.record.verdict != Verdict::kVerified) {
    *detail = "invocation record did not replay from the log";
  }
  if (auto want = step.Arg("expect-output"); !want.empty()) {
    if (ToHex(outcome.response.output) != ToHex(*FromHex(want))) {
      *detail = "output " + ToHex(outcome.response.output) + " != " + want;
    }
  }
  return Status::Ok();
}

Status World::UpdateKey(const ScenarioStep& step) {
  PufChallenge challenge = kAutoChallenge;
  if (auto c = step.Arg("challenge", "auto"); c != "auto") {
    challenge = *ArrayFromHex<kChallengeSize>(c);
  }
  if (step.adversary == Adversary::kReuseCrp) {
    if (!vtpm_->last_challenge()) {
      return MakeError(ErrorCode::kExpectationFailed, "no CRP consumed yet");
    }
    challenge = *vtpm_->last_challenge();
  }
  ArmFrameAdversary(step);
  const SecureSession* before = vtpm_->session();
  std::optional<SessionState> state_before;
  if (before) state_before = before->state();
  wire::UpdateResp resp = user_->UpdateKey(challenge);
  if (resp.return_code == 0) return Status::Ok();
  const SecureSession* after = vtpm_->session();
  if (state_before && after &&
      (after->state().epoch != state_before->epoch ||
       after->state().sess_key != state_before->sess_key)) {
    return MakeError(ErrorCode::kInternal, "failed update changed the key");
  }
  return vtpm_->last_error();
}

Status World::AgentDeploy(const ScenarioStep& step, std::string* detail) {
  // The REE agent has no session key. The best it can do is forge a frame
  // under a key of its own choosing and push it at the TMM.
  uint16_t ip = static_cast<uint16_t>(std::stoul(step.Arg("ip")));
  std::size_t slots_before = device_->tmm().config_memory().size();
  const ConfigMemory::Slot* slot = device_->tmm().config_memory().Find(ip);
  std::optional<Digest48> hash_before;
  if (slot) hash_before = slot->bin_hash;

  auto tmm_state = device_->tmm().session_state();
  Drbg guess(options_.seed, "agent-forgery");
  SessionState forged;
  forged.sess_key = guess.Array<32>();
  forged.epoch = tmm_state ? tmm_state->epoch : 0;
  forged.send_counter = tmm_state ? tmm_state->recv_counter : 0;
  forged.role = SessionRole::kVtpm;
  SecureSession session(forged);
  ByteWriter body;
  body.U16(ip);
  TRCTEE_ASSIGN_OR_RETURN(
      Frame frame, session.SealControl(
                       EncodeRequest(AppType::kDeployRequest, body.bytes())));
  TRCTEE_ASSIGN_OR_RETURN(std::vector<Bytes> replies,
                          device_->agent().Forward(frame.Encode()));

  const ConfigMemory::Slot* after = device_->tmm().config_memory().Find(ip);
  if (device_->tmm().config_memory().size() != slots_before ||
      (after ? std::optional<Digest48>(after->bin_hash) : std::nullopt) !=
          hash_before) {
    *detail = "config memory changed";
  }
  for (const Bytes& reply : replies) {
    if (auto alert = DecodeAlert(reply)) {
      return MakeError(alert->code, "TMM rejected the agent's frame");
    }
  }
  return Status::Ok();
}

Status World::Verify(const ScenarioStep& step, std::string* detail) {
  const DeviceRecord* record = ttp_.FindDevice(device_id_);
  report_ = VerifyAttestation(vtpm_->ExportLog(), record->golden_manifest,
                              user_->history(), vtpm_->pcrs().values());
  std::vector<std::size_t> want = step.expect_mismatch;
  std::sort(want.begin(), want.end());
  want.erase(std::unique(want.begin(), want.end()), want.end());
  if (report_->mismatches() != want) {
    std::string got;
    for (std::size_t i : report_->mismatches()) {
      got += (got.empty() ? "" : ",") + std::to_string(i);
    }
    *detail = "mismatching registers: " + (got.empty() ? "none" : got);
  }
  return Status::Ok();
}

void World::Shutdown() {
  stop_ = true;
  if (vtpm_end_) vtpm_end_->Close();
  if (device_thread_.joinable()) device_thread_.join();
  if (device_end_) device_end_->Close();
}

void World::Finish(RunResult& result) {
  Shutdown();
  result.report = report_;
  if (recorder_) result.transcript = recorder_->transcript();
  if (vtpm_) {
    result.event_log = vtpm_->ExportLog();
    result.pcrs = vtpm_->pcrs().values();
    result.handshakes = vtpm_->handshakes();
    result.updates = vtpm_->updates();
    result.crps_consumed = crps_at_provision_ - vtpm_->crps().unused_count();
  }
}

}  // namespace

RunResult RunScenario(const Scenario& scenario, const RunOptions& options) {
  RunResult result;
  World world(options);
  for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
    StepResult step = world.Run(scenario.steps[i]);
    step.index = i;
    result.steps.push_back(std::move(step));
  }
  world.Finish(result);
  return result;
}

}  // namespace trctee
