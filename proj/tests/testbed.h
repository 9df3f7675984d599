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

#ifndef TRCTEE_TESTS_TESTBED_H_
#define TRCTEE_TESTS_TESTBED_H_

// A complete TTP / device / vTPM world on an in-process or loopback link,
// for tests that need live endpoints.

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "trctee/boot.h"
#include "trctee/device.h"
#include "trctee/runtime.h"
#include "trctee/transport.h"
#include "trctee/ttp.h"
#include "trctee/vtpm.h"

namespace trctee::testing {

std::filesystem::path TempDir(const std::string& name);

struct TestbedOptions {
  uint64_t seed = 1;
  uint64_t rekey_threshold = kDefaultRekeyThreshold;
  std::size_t crps = 32;
  bool tcp = false;
  bool tamper_boot = false;
  std::size_t tampered_component = 4;
};

class Testbed {
 public:
  explicit Testbed(TestbedOptions options = {});
  ~Testbed();

  // Handshake plus boot report.
  Status Connect();

  Ttp& ttp() { return ttp_; }
  FpgaSocDevice& device() { return *device_; }
  const Tmm& tmm() { return device_->tmm(); }
  Vtpm& vtpm() { return *vtpm_; }
  UserClient& user() { return *user_; }
  TamperingChannel& tamper() { return *tamper_; }
  RecordingChannel& recorder() { return *recorder_; }
  const GoldenManifest& manifest() const { return manifest_; }
  const PufDevice& puf() const { return *puf_; }
  std::size_t crps_provisioned() const { return options_.crps; }

 private:
  TestbedOptions options_;
  std::filesystem::path dir_;
  Ttp ttp_;
  std::unique_ptr<PufDevice> puf_;
  GoldenManifest manifest_;
  std::unique_ptr<FpgaSocDevice> device_;
  std::unique_ptr<Vtpm> vtpm_;
  std::unique_ptr<UserClient> user_;

  std::unique_ptr<TcpListener> listener_;
  std::unique_ptr<Channel> vtpm_end_;
  std::unique_ptr<Channel> device_end_;
  std::unique_ptr<RecordingChannel> recorder_;
  std::unique_ptr<TamperingChannel> tamper_;
  std::atomic<bool> stop_{false};
  std::thread device_thread_;
};

}  // namespace trctee::testing

#endif  // TRCTEE_TESTS_TESTBED_H_
