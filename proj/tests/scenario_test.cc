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

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "testbed.h"

namespace trctee {
namespace {

namespace fs = std::filesystem;

const std::string kPrelude =
    "trctee-scenario 1\n"
    "enroll-device id=d\n"
    "enroll-vtpm user=u\n"
    "provision user=u device=d\n";

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<fs::path> ScenarioFiles() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(TRCTEE_SCENARIO_DIR)) {
    if (e.path().extension() == ".scn") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunResult RunText(const std::string& text, uint64_t seed = 1,
                  TransportKind transport = TransportKind::kInProcess) {
  auto sc = ParseScenario(text);
  EXPECT_TRUE(sc.ok()) << sc.status().ToString();
  RunOptions opt;
  opt.seed = seed;
  opt.transport = transport;
  opt.work_dir = testing::TempDir("scenario");
  RunResult r = RunScenario(*sc, opt);
  fs::remove_all(opt.work_dir);
  return r;
}

void ExpectParseError(const std::string& text, const std::string& needle) {
  auto sc = ParseScenario(text);
  ASSERT_FALSE(sc.ok()) << text;
  EXPECT_EQ(sc.status().code(), ErrorCode::kParseError);
  EXPECT_NE(sc.status().message().find(needle), std::string::npos)
      << sc.status().ToString();
}

TEST(ScenarioParse, Errors) {
  ExpectParseError("bogus\n", "line 1");
  ExpectParseError(kPrelude + "fly-away\n", "line 5");
  ExpectParseError(kPrelude + "boot device=d colour=red\n", "colour");
  ExpectParseError(kPrelude + "boot\n", "device");
  ExpectParseError(kPrelude + "handshake\n", "line 5");
  ExpectParseError(
      kPrelude + "boot device=d\nhandshake\ninvoke ip=1 input=zz\n", "line 7");
  ExpectParseError(kPrelude + "boot device=d adversary=reuse-crp\n",
                   "reuse-crp");
  ExpectParseError(
      kPrelude + "boot device=d\nhandshake\nverify expect=Nonsense\n",
      "Nonsense");
}

TEST(ScenarioParse, CommentsAndDefaults) {
  auto sc =
      ParseScenario(kPrelude + "# a comment\n\nboot device=d\nhandshake\n");
  ASSERT_TRUE(sc.ok()) << sc.status().ToString();
  ASSERT_EQ(sc->steps.size(), 5u);
  EXPECT_EQ(sc->steps[4].kind, StepKind::kHandshake);
  EXPECT_EQ(sc->steps[4].line, 8);
  EXPECT_EQ(sc->steps[4].expect, ErrorCode::kOk);
}

TEST(ScenarioRun, EveryShippedScenarioPasses) {
  auto files = ScenarioFiles();
  ASSERT_GE(files.size(), 9u);
  for (const auto& f : files) {
    RunResult r = RunText(ReadFile(f));
    EXPECT_TRUE(r.passed()) << f << "\n" << r.ToText();
  }
}

TEST(ScenarioRun, SameSeedSameEverything) {
  std::string text = ReadFile(fs::path(TRCTEE_SCENARIO_DIR) / "baseline.scn");
  RunResult a = RunText(text, 42), b = RunText(text, 42), c = RunText(text, 43);
  EXPECT_EQ(a.event_log, b.event_log);
  EXPECT_EQ(a.pcrs, b.pcrs);
  EXPECT_EQ(a.ToText(), b.ToText());
  ASSERT_EQ(a.transcript.size(), b.transcript.size());
  for (std::size_t i = 0; i < a.transcript.size(); ++i) {
    EXPECT_EQ(a.transcript[i].bytes, b.transcript[i].bytes);
  }
  EXPECT_NE(a.transcript.back().bytes, c.transcript.back().bytes);
}

TEST(ScenarioRun, TcpMatchesInProcess) {
  for (const auto& f : ScenarioFiles()) {
    std::string text = ReadFile(f);
    RunResult a = RunText(text, 5, TransportKind::kInProcess);
    RunResult b = RunText(text, 5, TransportKind::kTcp);
    EXPECT_TRUE(b.passed()) << f << "\n" << b.ToText();
    EXPECT_EQ(a.event_log, b.event_log) << f;
    ASSERT_EQ(a.transcript.size(), b.transcript.size()) << f;
    for (std::size_t i = 0; i < a.transcript.size(); ++i) {
      EXPECT_EQ(a.transcript[i].bytes, b.transcript[i].bytes)
          << f << " record " << i;
    }
  }
}

// Nothing the user feeds in or gets back shows up in clear on the wire.
TEST(ScenarioRun, NoPlaintextOnTheWire) {
  const Bytes input_marker = {0x5a, 0xc3, 0x96, 0x1e, 0x77, 0x2d, 0xe1, 0x4b};
  const Bytes params = {0x0f, 0xf0, 0x3c, 0xc3, 0x99, 0x66, 0xa5, 0x5a};
  Bytes output_marker(8);
  for (int i = 0; i < 8; ++i) output_marker[i] = input_marker[i] ^ params[i];
  std::string text = kPrelude +
                     "boot device=d\nhandshake\n"
                     "deploy ip=1 kernel=xor params=" +
                     ToHex(params) + "\n" +
                     "invoke ip=1 input=" + ToHex(input_marker) +
                     " expect-output=" + ToHex(output_marker) + "\n";
  RunResult r = RunText(text);
  ASSERT_TRUE(r.passed()) << r.ToText();
  auto contains = [](const Bytes& hay, const Bytes& needle) {
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) !=
           hay.end();
  };
  for (const auto& e : r.transcript) {
    EXPECT_FALSE(contains(e.bytes, input_marker));
    EXPECT_FALSE(contains(e.bytes, output_marker));
    EXPECT_FALSE(contains(e.bytes, params));
  }
}

TEST(ScenarioRun, ExpectationMismatchFailsTheRun) {
  RunResult r = RunText(kPrelude + "boot device=d\nhandshake expect=BadCert\n");
  EXPECT_FALSE(r.passed());
  EXPECT_NE(r.ToText().find("FAIL"), std::string::npos);
}

TEST(ScenarioRun, Counts) {
  RunResult r =
      RunText(kPrelude + "boot device=d\nhandshake\nupdate-key\nupdate-key\n");
  ASSERT_TRUE(r.passed()) << r.ToText();
  EXPECT_EQ(r.handshakes, 1u);
  EXPECT_EQ(r.updates, 2u);
  EXPECT_EQ(r.crps_consumed, 3u);
}

}  // namespace
}  // namespace trctee
