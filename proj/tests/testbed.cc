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

#include "testbed.h"

#include <unistd.h>

namespace trctee::testing {

std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("trctee-test-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Testbed::Testbed(TestbedOptions options)
    : options_(options),
      dir_(TempDir("bed-" + std::to_string(reinterpret_cast<uintptr_t>(this)))),
      ttp_(Drbg(options.seed, "ttp"), TtpOptions{256, options.crps}) {
  Drbg fab(options.seed, "puf");
  puf_ = std::make_unique<PufDevice>(fab.Array<32>());
  BootImage golden = MakeGoldenBootImage(ttp_.public_key());
  manifest_ = (*ttp_.EnrollDevice("dev", *puf_, golden))->golden_manifest;
  ttp_.RegisterUser("alice");
  VtpmBundle bundle = *ttp_.EnrollVtpm("alice");
  DeviceProvisioning prov = *ttp_.ProvisionUser("alice", "dev");

  device_ = std::make_unique<FpgaSocDevice>("dev", *puf_, dir_ / "ree",
                                            Drbg(options.seed, "device"));
  BootImage image = golden;
  if (options.tamper_boot) image.components[options.tampered_component][0] ^= 1;
  device_->Boot(image).IgnoreError();

  vtpm_ = std::make_unique<Vtpm>(
      std::move(bundle), std::move(prov), Drbg(options.seed, "vtpm"),
      VtpmConfig{options.rekey_threshold, Millis(2000)});
  user_ = std::make_unique<UserClient>(*vtpm_, device_->file_store(),
                                       Drbg(options.seed, "user"));

  if (options.tcp) {
    listener_ = std::move(*TcpListener::Bind(HostPort{"127.0.0.1", 0}));
    device_thread_ = std::thread([this] {
      auto accepted = listener_->Accept(Millis(5000));
      if (!accepted.ok()) return;
      device_end_ = std::move(*accepted);
      device_->Serve(*device_end_, stop_).IgnoreError();
    });
    vtpm_end_ =
        std::move(*TcpConnect(HostPort{"127.0.0.1", listener_->port()}));
  } else {
    auto [a, b] = MakeInProcessChannelPair();
    vtpm_end_ = std::move(a);
    device_end_ = std::move(b);
    device_thread_ = std::thread(
        [this] { device_->Serve(*device_end_, stop_).IgnoreError(); });
  }
  recorder_ = std::make_unique<RecordingChannel>(*vtpm_end_);
  tamper_ = std::make_unique<TamperingChannel>(*recorder_);
}

Testbed::~Testbed() {
  stop_ = true;
  vtpm_end_->Close();
  if (device_thread_.joinable()) device_thread_.join();
  if (device_end_) device_end_->Close();
  std::error_code ec;
  std::filesystem::remove_all(dir_, ec);
}

Status Testbed::Connect() { return vtpm_->Connect(*tamper_); }

}  // namespace trctee::testing
