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

#include <gtest/gtest.h>

#include "oracle/oracle.h"
#include "testbed.h"

namespace trctee {
namespace {

TEST(Attestation, HonestRunVerifies) {
  testing::Testbed bed;
  ASSERT_TRUE(bed.Connect().ok());
  auto t = bed.user().PrepareDeploy(1, IpImage{"xor", {0xaa}});
  ASSERT_EQ(bed.user().Deploy(*t).response.response_code, 0u);
  ASSERT_EQ(bed.user().Invoke(1, Bytes{0x12}).response.response_code, 0u);
  AttestationReport rep =
      VerifyAttestation(bed.vtpm().ExportLog(), bed.manifest(),
                        bed.user().history(), bed.vtpm().pcrs().values());
  EXPECT_TRUE(rep.all_verified()) << rep.ToText();
  EXPECT_EQ(rep.registers.size(), 24u);
  EXPECT_TRUE(rep.mismatches().empty());
}

TEST(Attestation, TamperedComponentFlagsOnlyItsRegister) {
  for (std::size_t k = 1; k < 8; ++k) {
    testing::TestbedOptions opt;
    opt.tamper_boot = true;
    opt.tampered_component = k;
    testing::Testbed bed(opt);
    ASSERT_TRUE(bed.Connect().ok());
    AttestationReport rep = VerifyAttestation(
        bed.vtpm().ExportLog(), bed.manifest(), bed.user().history());
    EXPECT_EQ(rep.mismatches(), std::vector<std::size_t>{k}) << rep.ToText();
  }
}

TEST(Attestation, HistoryDivergenceFlagsPcr9) {
  testing::Testbed bed;
  ASSERT_TRUE(bed.Connect().ok());
  auto t = bed.user().PrepareDeploy(1, IpImage{"xor", {0xaa}});
  bed.user().Deploy(*t);
  bed.user().Invoke(1, Bytes{1});
  ExpectedHistory h = bed.user().history();
  ASSERT_EQ(h.inputs.size(), 1u);
  h.inputs[0][0] ^= 1;
  AttestationReport rep =
      VerifyAttestation(bed.vtpm().ExportLog(), bed.manifest(), h);
  EXPECT_EQ(rep.mismatches(), std::vector<std::size_t>{9});
}

TEST(Attestation, EditedLogIsCaughtBySnapshot) {
  testing::Testbed bed;
  ASSERT_TRUE(bed.Connect().ok());
  std::string log = bed.vtpm().ExportLog();
  // Drop the last boot event: replay no longer reaches the reported PCR7.
  std::string shortened = log.substr(0, log.rfind('\n', log.size() - 2) + 1);
  AttestationReport rep =
      VerifyAttestation(shortened, bed.manifest(), bed.user().history(),
                        bed.vtpm().pcrs().values());
  EXPECT_FALSE(rep.all_verified());
  auto m = rep.mismatches();
  EXPECT_NE(std::find(m.begin(), m.end(), 7u), m.end());
}

TEST(Attestation, MachineLinesFormat) {
  testing::Testbed bed;
  ASSERT_TRUE(bed.Connect().ok());
  AttestationReport rep = VerifyAttestation(
      bed.vtpm().ExportLog(), bed.manifest(), bed.user().history());
  std::string lines = rep.MachineLines();
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 24);
  std::string first = lines.substr(0, lines.find('\n'));
  EXPECT_EQ(first.rfind("0 Verified ", 0), 0u) << first;
  EXPECT_NE(rep.ToText().find(lines), std::string::npos);
}

TEST(Attestation, GarbageLogIsReported) {
  testing::Testbed bed;
  AttestationReport rep = VerifyAttestation("not,a,log\n", bed.manifest(), {});
  EXPECT_FALSE(rep.all_verified());
  EXPECT_FALSE(rep.findings.empty());
}

TEST(History, SerializeParse) {
  ExpectedHistory h;
  h.deploy_records.push_back(Digest48{});
  Digest48 d{};
  d[0] = 1;
  h.inputs.push_back(d);
  h.outputs.push_back(d);
  auto back = ExpectedHistory::Parse(h.Serialize());
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->deploy_records, h.deploy_records);
  EXPECT_EQ(back->inputs, h.inputs);
  EXPECT_EQ(back->outputs, h.outputs);
  EXPECT_FALSE(ExpectedHistory::Parse("bogus 00\n").ok());
  EXPECT_FALSE(ExpectedHistory::Parse("input 0011\n").ok());
}

TEST(Snapshot, SerializeParse) {
  PcrValues v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i][i] = uint8_t(i + 1);
  auto back = ParsePcrSnapshot(SerializePcrSnapshot(v));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, v);
  EXPECT_FALSE(ParsePcrSnapshot("0 00\n").ok());
}

TEST(UserClient, StandardCommandsThroughDispatch) {
  testing::Testbed bed;
  ASSERT_TRUE(bed.Connect().ok());
  EXPECT_EQ(*bed.user().PcrRead(3), *bed.vtpm().PcrRead(3));
  EXPECT_EQ(bed.user().GetRandom(16)->size(), 16u);
  EXPECT_FALSE(bed.user().GetRandom(0).ok());
}

TEST(UserClient, LocallyRefusedInvokeLeavesNoHistory) {
  testing::Testbed bed;
  ASSERT_TRUE(bed.Connect().ok());
  bed.user().Invoke(5, Bytes{1});
  EXPECT_TRUE(bed.user().history().inputs.empty());
  AttestationReport rep =
      VerifyAttestation(bed.vtpm().ExportLog(), bed.manifest(),
                        bed.user().history(), bed.vtpm().pcrs().values());
  EXPECT_TRUE(rep.all_verified()) << rep.ToText();
}

}  // namespace
}  // namespace trctee
