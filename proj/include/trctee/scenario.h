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

#ifndef TRCTEE_SCENARIO_H_
#define TRCTEE_SCENARIO_H_

// Scenario files drive a whole TTP / device / vTPM world from one seed.
//
//   trctee-scenario 1
//   enroll-device id=dev-1
//   enroll-vtpm user=alice
//   provision user=alice device=dev-1
//   boot device=dev-1 adversary=tamper-component component=OP-TEE
//   handshake
//   deploy ip=1 kernel=xor params=0f0f
//   invoke ip=1 input=a0a0 adversary=tamper-frame expect=AuthFailure
//   update-key challenge=auto
//   verify expect-mismatch=4
//
// Every step may carry `expect=<ErrorName>` (default `ok`). Frame adversaries
// take `dir=in|out`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trctee/pcr_bank.h"
#include "trctee/runtime.h"
#include "trctee/status.h"
#include "trctee/transport.h"

namespace trctee {

inline constexpr std::string_view kScenarioHeader = "trctee-scenario 1";

enum class StepKind {
  kEnrollDevice,
  kEnrollVtpm,
  kProvision,
  kBoot,
  kHandshake,
  kDeploy,
  kInvoke,
  kUpdateKey,
  kAgentDeploy,
  kVerify,
};

enum class Adversary {
  kNone,
  kTamperFrame,
  kReplayFrame,
  kDropFrame,
  kTamperComponent,
  kReuseCrp,
  kSwapVtpmCert,
  kTamperBitstream,
};

std::string_view StepName(StepKind kind);
std::string_view AdversaryName(Adversary adversary);

struct ScenarioStep {
  StepKind kind{};
  int line = 0;
  std::map<std::string, std::string> args;
  Adversary adversary = Adversary::kNone;
  ErrorCode expect = ErrorCode::kOk;
  // verify only: registers expected to mismatch.
  std::vector<std::size_t> expect_mismatch;

  std::string Arg(const std::string& key, std::string fallback = {}) const;
};

struct Scenario {
  std::vector<ScenarioStep> steps;
};

// ParseError naming the offending line for unknown steps or keys, missing
// arguments, adversaries the step cannot carry, and ordering violations
// (e.g. a handshake before provision and boot).
StatusOr<Scenario> ParseScenario(std::string_view text);

enum class TransportKind { kInProcess, kTcp };

struct RunOptions {
  uint64_t seed = 0;
  uint64_t rekey_threshold = kDefaultRekeyThreshold;
  std::size_t pool = 64;
  // Scratch space for the device's REE file store.
  std::filesystem::path work_dir;
  TransportKind transport = TransportKind::kInProcess;
  Millis timeout{2000};
};

struct StepResult {
  std::size_t index = 0;
  int line = 0;
  std::string name;
  ErrorCode observed = ErrorCode::kOk;
  ErrorCode expected = ErrorCode::kOk;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  std::vector<StepResult> steps;
  std::optional<AttestationReport> report;
  Transcript transcript;
  std::string event_log;
  PcrValues pcrs{};
  std::size_t handshakes = 0;
  std::size_t updates = 0;
  std::size_t crps_consumed = 0;

  bool passed() const;
  std::string ToText() const;
};

RunResult RunScenario(const Scenario& scenario, const RunOptions& options);

}  // namespace trctee

#endif  // TRCTEE_SCENARIO_H_
