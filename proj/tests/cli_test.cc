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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <thread>

#include "testbed.h"

namespace trctee {
namespace {

namespace fs = std::filesystem;

struct Result {
  int exit_code = -1;
  std::string out;
};

Result Cli(const std::string& args) {
  std::string cmd = std::string(TRCTEE_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), p))
    r.out.append(buf.data(), n);
  int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Scn(const std::string& name) {
  return (fs::path(TRCTEE_SCENARIO_DIR) / (name + ".scn")).string();
}

TEST(Cli, RunsEveryScenario) {
  for (const char* name :
       {"baseline", "tamper-frame", "replay-frame", "drop-frame",
        "tamper-component", "reuse-crp", "swap-vtpm-cert", "tamper-bitstream",
        "agent-deploy"}) {
    Result r = Cli("run " + Scn(name) + " --seed 3");
    EXPECT_EQ(r.exit_code, 0) << name << "\n" << r.out;
    EXPECT_NE(r.out.find("scenario: PASS"), std::string::npos) << name;
  }
}

TEST(Cli, TcpTranscriptEqualsInProcess) {
  fs::path dir = testing::TempDir("cli-transcript");
  Result a = Cli("run " + Scn("baseline") + " --seed 9 --transcript " +
                 (dir / "a.txt").string());
  Result b =
      Cli("run " + Scn("baseline") + " --seed 9 --transport tcp --transcript " +
          (dir / "b.txt").string());
  ASSERT_EQ(a.exit_code, 0) << a.out;
  ASSERT_EQ(b.exit_code, 0) << b.out;
  std::ifstream fa(dir / "a.txt"), fb(dir / "b.txt");
  std::string ta((std::istreambuf_iterator<char>(fa)), {});
  std::string tb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, tb);
  fs::remove_all(dir);
}

TEST(Cli, BadScenarioIsParseError) {
  fs::path dir = testing::TempDir("cli-bad");
  std::ofstream(dir / "bad.scn") << "trctee-scenario 1\nwhat-is-this\n";
  Result r = Cli("run " + (dir / "bad.scn").string());
  EXPECT_EQ(r.exit_code, 2) << r.out;
  EXPECT_NE(r.out.find("line 2"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, UnsetSeedIsPrinted) {
  Result r = Cli("run " + Scn("baseline"));
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("seed "), std::string::npos);
}

TEST(Cli, ZeroThresholdRejected) {
  Result r = Cli("run " + Scn("baseline") + " --threshold 0");
  EXPECT_NE(r.exit_code, 0);
}

TEST(Cli, ConnectToNothingIsConnectError) {
  fs::path dir = testing::TempDir("cli-connect");
  std::string store = " --store " + (dir / "s").string() + " --seed 1";
  ASSERT_EQ(Cli("enroll-device --id dev" + store).exit_code, 0);
  ASSERT_EQ(Cli("enroll-vtpm --user u" + store).exit_code, 0);
  ASSERT_EQ(Cli("provision --user u --device dev" + store).exit_code, 0);
  uint16_t port;
  {
    auto l = TcpListener::Bind(HostPort{"127.0.0.1", 0});
    port = (*l)->port();
  }
  Result r = Cli("connect --user u --device dev --address 127.0.0.1:" +
                 std::to_string(port) + store);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("ConnectError"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, ServeConnectVerify) {
  fs::path dir = testing::TempDir("cli-e2e");
  std::string store = " --store " + (dir / "s").string() + " --seed 1";
  ASSERT_EQ(Cli("enroll-device --id dev" + store).exit_code, 0);
  ASSERT_EQ(Cli("enroll-vtpm --user u" + store).exit_code, 0);
  ASSERT_EQ(Cli("provision --user u --device dev" + store).exit_code, 0);
  uint16_t port;
  {
    auto l = TcpListener::Bind(HostPort{"127.0.0.1", 0});
    port = (*l)->port();
  }
  std::string addr = "127.0.0.1:" + std::to_string(port);
  Result served;
  std::thread server([&] {
    served = Cli("serve --device dev --once --listen " + addr + store);
  });
  Result c;
  for (int attempt = 0; attempt < 50; ++attempt) {
    c = Cli("connect --user u --device dev --address " + addr + store +
            " --op deploy:1:xor:0f --op invoke:1:f0 --op update-key --op "
            "pcr-read:9");
    if (c.exit_code == 0 || c.out.find("ConnectError") == std::string::npos)
      break;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.join();
  ASSERT_EQ(c.exit_code, 0) << c.out;
  EXPECT_NE(c.out.find("output ff"), std::string::npos) << c.out;
  EXPECT_EQ(served.exit_code, 0) << served.out;

  fs::path session = dir / "s" / "users" / "u" / "dev.session";
  Result v = Cli("verify " + (session / "event.log").string() + " --manifest " +
                 (dir / "s" / "users" / "u" / "dev.manifest").string() +
                 " --history " + (session / "history.txt").string() +
                 " --snapshot " + (session / "pcrs.txt").string());
  EXPECT_EQ(v.exit_code, 0) << v.out;
  EXPECT_NE(v.out.find("9 Verified"), std::string::npos) << v.out;
  fs::remove_all(dir);
}

}  // namespace
}  // namespace trctee
