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

// trctee: enrollment, device serving, user sessions, scenario runs and
// offline attestation checks against a file-backed store.
//
// Store layout (root from --store, $TRCTEE_STORE, or ./trctee-store):
//   registry.txt                    TTP registry
//   devices/<id>/puf.seed           device PUF seed (hex)
//   devices/<id>/boot/              boot image, one file per component
//   devices/<id>/ree/               REE file store (encrypted bitstreams)
//   users/<user>/vtpm.bundle        vTPM key, certificate, PK_TTP
//   users/<user>/<device>.crps      CRP slice
//   users/<user>/<device>.manifest  golden manifest
//   users/<user>/<device>.session/  log, history and PCR snapshot of the
//                                   last connect

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trctee/boot.h"
#include "trctee/device.h"
#include "trctee/puf.h"
#include "trctee/runtime.h"
#include "trctee/scenario.h"
#include "trctee/transport.h"
#include "trctee/ttp.h"
#include "trctee/vtpm.h"

namespace fs = std::filesystem;
using namespace trctee;

namespace {

struct Common {
  std::optional<uint64_t> seed;
  uint64_t threshold = kDefaultRekeyThreshold;
  std::size_t pool = 64;
  std::string store;
  int timeout_ms = 2000;

  uint64_t Seed() {
    if (!seed) {
      std::random_device rd;
      seed = (uint64_t{rd()} << 32) | rd();
      std::cerr << "seed " << *seed << "\n";
    }
    return *seed;
  }
  fs::path Root() const { return store; }
  fs::path Registry() const { return Root() / "registry.txt"; }
  fs::path DeviceDir(const std::string& id) const {
    return Root() / "devices" / id;
  }
  fs::path UserDir(const std::string& user) const {
    return Root() / "users" / user;
  }
};

int Fail(const Status& status) {
  std::cerr << "error: " << ErrorName(status.code()) << ": " << status.message()
            << "\n";
  return 1;
}

StatusOr<Ttp> OpenRegistry(Common& c) {
  TtpOptions options{std::max<std::size_t>(256, c.pool), c.pool};
  if (!fs::exists(c.Registry())) {
    return Ttp(Drbg(c.Seed(), "ttp"), options);
  }
  return Ttp::Load(c.Registry(), Drbg(c.Seed(), "ttp"));
}

Status EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return MakeError(ErrorCode::kIoError,
                     "cannot create " + dir.string() + ": " + ec.message());
  }
  return Status::Ok();
}

StatusOr<PufDevice> LoadPuf(const Common& c, const std::string& id) {
  TRCTEE_ASSIGN_OR_RETURN(std::string text,
                          ReadFileToString(c.DeviceDir(id) / "puf.seed"));
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.pop_back();
  TRCTEE_ASSIGN_OR_RETURN(Key32 seed, ArrayFromHex<32>(text));
  return PufDevice(seed);
}

Status CmdEnrollDevice(Common& c, const std::string& id) {
  TRCTEE_ASSIGN_OR_RETURN(Ttp ttp, OpenRegistry(c));
  Drbg fab(c.Seed(), "puf:" + id);
  Key32 seed = fab.Array<32>();
  PufDevice puf(seed);
  BootImage golden = MakeGoldenBootImage(ttp.public_key());
  TRCTEE_RETURN_IF_ERROR(ttp.EnrollDevice(id, puf, golden).status());
  TRCTEE_RETURN_IF_ERROR(EnsureDir(c.DeviceDir(id)));
  TRCTEE_RETURN_IF_ERROR(
      WriteFileAtomically(c.DeviceDir(id) / "puf.seed", ToHex(seed) + "\n"));
  TRCTEE_RETURN_IF_ERROR(SaveBootImage(golden, c.DeviceDir(id) / "boot"));
  TRCTEE_RETURN_IF_ERROR(ttp.Save(c.Registry()));
  std::cout << "enrolled device " << id << " ("
            << ttp.FindDevice(id)->crp_store.size() << " CRPs)\n";
  return Status::Ok();
}

Status CmdEnrollVtpm(Common& c, const std::string& user) {
  TRCTEE_ASSIGN_OR_RETURN(Ttp ttp, OpenRegistry(c));
  ttp.RegisterUser(user);
  TRCTEE_ASSIGN_OR_RETURN(VtpmBundle bundle, ttp.EnrollVtpm(user));
  TRCTEE_RETURN_IF_ERROR(EnsureDir(c.UserDir(user)));
  TRCTEE_RETURN_IF_ERROR(
      WriteFileAtomically(c.UserDir(user) / "vtpm.bundle", bundle.Serialize()));
  TRCTEE_RETURN_IF_ERROR(ttp.Save(c.Registry()));
  std::cout << "enrolled vTPM for " << user << " pk "
            << ToHex(bundle.tpm_key.public_key) << "\n";
  return Status::Ok();
}

Status CmdProvision(Common& c, const std::string& user,
                    const std::string& device) {
  TRCTEE_ASSIGN_OR_RETURN(Ttp ttp, OpenRegistry(c));
  TRCTEE_ASSIGN_OR_RETURN(DeviceProvisioning prov,
                          ttp.ProvisionUser(user, device, c.pool));
  fs::path dir = c.UserDir(user);
  TRCTEE_RETURN_IF_ERROR(EnsureDir(dir));
  TRCTEE_RETURN_IF_ERROR(prov.crps.SaveToFile(dir / (device + ".crps")));
  TRCTEE_RETURN_IF_ERROR(WriteFileAtomically(
      dir / (device + ".manifest"), SerializeManifest(prov.golden_manifest)));
  TRCTEE_RETURN_IF_ERROR(ttp.Save(c.Registry()));
  std::cout << "provisioned " << user << " for " << device << " ("
            << prov.crps.size() << " CRPs)\n";
  return Status::Ok();
}

Status CmdRun(Common& c, const std::string& path, const std::string& transport,
              const std::string& transcript_out) {
  TRCTEE_ASSIGN_OR_RETURN(std::string text, ReadFileToString(path));
  TRCTEE_ASSIGN_OR_RETURN(Scenario scenario, ParseScenario(text));
  RunOptions options;
  options.seed = c.Seed();
  options.rekey_threshold = c.threshold;
  options.pool = c.pool;
  options.work_dir = c.Root() / "scenario-work";
  options.transport =
      transport == "tcp" ? TransportKind::kTcp : TransportKind::kInProcess;
  options.timeout = Millis(c.timeout_ms);
  RunResult result = RunScenario(scenario, options);
  std::cout << result.ToText();
  if (!transcript_out.empty()) {
    std::ostringstream out;
    for (const auto& entry : result.transcript) {
      out << (entry.direction == Direction::kOutbound ? "out " : "in  ")
          << ToHex(entry.bytes) << "\n";
    }
    TRCTEE_RETURN_IF_ERROR(WriteFileAtomically(transcript_out, out.str()));
  }
  if (!result.passed()) {
    return MakeError(ErrorCode::kExpectationFailed,
                     "scenario expectations not met");
  }
  return Status::Ok();
}

Status CmdServe(Common& c, const std::string& id, const std::string& listen,
                bool once) {
  TRCTEE_ASSIGN_OR_RETURN(PufDevice puf, LoadPuf(c, id));
  TRCTEE_ASSIGN_OR_RETURN(BootImage image,
                          LoadBootImage(c.DeviceDir(id) / "boot"));
  FpgaSocDevice device(id, puf, c.DeviceDir(id) / "ree",
                       Drbg(c.Seed(), "device:" + id));
  TRCTEE_RETURN_IF_ERROR(device.Boot(image));
  TRCTEE_ASSIGN_OR_RETURN(HostPort address, ParseHostPort(listen));
  TRCTEE_ASSIGN_OR_RETURN(auto listener, TcpListener::Bind(address));
  std::cout << "device " << id << " listening on " << address.host << ":"
            << listener->port() << std::endl;
  std::atomic<bool> stop{false};
  do {
    auto channel = listener->Accept(Millis(60 * 60 * 1000));
    if (!channel.ok()) {
      if (channel.status().code() == ErrorCode::kTimeout) continue;
      return channel.status();
    }
    TRCTEE_RETURN_IF_ERROR(device.Serve(**channel, stop));
    std::cout << "connection closed" << std::endl;
  } while (!once);
  return Status::Ok();
}

// Ops: deploy:IP:KERNEL[:PARAMS_HEX], invoke:IP:INPUT_HEX[:FLAG],
// update-key[:CHALLENGE_HEX], pcr-read:N, get-random:N.
std::vector<std::string> SplitOp(const std::string& op) {
  std::vector<std::string> parts;
  std::istringstream in(op);
  for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
  if (!op.empty() && op.back() == ':') parts.emplace_back();
  return parts;
}

Status RunOp(UserClient& user, Vtpm& vtpm, const std::string& op) {
  std::vector<std::string> p = SplitOp(op);
  auto bad = [&] {
    return MakeError(ErrorCode::kInvalidArgument, "bad op '" + op + "'");
  };
  auto number = [&](const std::string& s, uint64_t max) -> StatusOr<uint64_t> {
    char* end = nullptr;
    uint64_t v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || v > max) return bad();
    return v;
  };
  if (p.empty()) return bad();
  if (p[0] == "deploy" && (p.size() == 3 || p.size() == 4)) {
    TRCTEE_ASSIGN_OR_RETURN(uint64_t ip, number(p[1], 0xFFFF));
    Bytes params;
    if (p.size() == 4) {
      TRCTEE_ASSIGN_OR_RETURN(params, FromHex(p[3]));
    }
    TRCTEE_ASSIGN_OR_RETURN(
        DeployTicket ticket,
        user.PrepareDeploy(static_cast<uint16_t>(ip), IpImage{p[2], params}));
    DeployOutcome out = user.Deploy(ticket);
    std::cout << "deploy " << ip << " rc " << out.response.response_code
              << " hash " << ToHex(out.response.bin_hash) << " "
              << VerdictName(out.verdict) << "\n";
    if (out.response.response_code != 0) return vtpm.last_error();
    return Status::Ok();
  }
  if (p[0] == "invoke" && (p.size() == 3 || p.size() == 4)) {
    TRCTEE_ASSIGN_OR_RETURN(uint64_t ip, number(p[1], 0xFFFF));
    TRCTEE_ASSIGN_OR_RETURN(Bytes input, FromHex(p[2]));
    uint64_t flag = 0;
    if (p.size() == 4) {
      TRCTEE_ASSIGN_OR_RETURN(flag, number(p[3], 0xFFFFFFFF));
    }
    InvokeOutcome out = user.Invoke(static_cast<uint16_t>(ip), input,
                                    static_cast<uint32_t>(flag));
    std::cout << "invoke " << ip << " rc " << out.response.response_code
              << " output " << ToHex(out.response.output) << " "
              << VerdictName(out.record.verdict) << "\n";
    if (out.response.response_code != 0) return vtpm.last_error();
    return Status::Ok();
  }
  if (p[0] == "update-key" && p.size() <= 2) {
    PufChallenge challenge = kAutoChallenge;
    if (p.size() == 2) {
      TRCTEE_ASSIGN_OR_RETURN(challenge, ArrayFromHex<kChallengeSize>(p[1]));
    }
    wire::UpdateResp resp = user.UpdateKey(challenge);
    std::cout << "update-key rc " << resp.return_code << " epoch "
              << (vtpm.session() ? vtpm.session()->state().epoch : 0) << "\n";
    if (resp.return_code != 0) return vtpm.last_error();
    return Status::Ok();
  }
  if (p[0] == "pcr-read" && p.size() == 2) {
    TRCTEE_ASSIGN_OR_RETURN(uint64_t n, number(p[1], kNumPcrs - 1));
    TRCTEE_ASSIGN_OR_RETURN(Digest48 value, user.PcrRead(n));
    std::cout << "pcr " << n << " " << ToHex(value) << "\n";
    return Status::Ok();
  }
  if (p[0] == "get-random" && p.size() == 2) {
    TRCTEE_ASSIGN_OR_RETURN(uint64_t n, number(p[1], 0xFFFF));
    TRCTEE_ASSIGN_OR_RETURN(Bytes bytes,
                            user.GetRandom(static_cast<uint16_t>(n)));
    std::cout << "random " << ToHex(bytes) << "\n";
    return Status::Ok();
  }
  return bad();
}

Status CmdConnect(Common& c, const std::string& user_id,
                  const std::string& device_id, const std::string& address,
                  const std::vector<std::string>& ops) {
  fs::path dir = c.UserDir(user_id);
  TRCTEE_ASSIGN_OR_RETURN(std::string bundle_text,
                          ReadFileToString(dir / "vtpm.bundle"));
  TRCTEE_ASSIGN_OR_RETURN(VtpmBundle bundle, VtpmBundle::Parse(bundle_text));
  fs::path crp_path = dir / (device_id + ".crps");
  TRCTEE_ASSIGN_OR_RETURN(CrpStore crps,
                          CrpStore::LoadFromFile(crp_path, CrpOwner::kUser));
  TRCTEE_ASSIGN_OR_RETURN(std::string manifest_text,
                          ReadFileToString(dir / (device_id + ".manifest")));
  TRCTEE_ASSIGN_OR_RETURN(GoldenManifest manifest,
                          ParseManifest(manifest_text));

  DeviceProvisioning prov{device_id, manifest, std::move(crps)};
  Vtpm vtpm(std::move(bundle), std::move(prov), Drbg(c.Seed(), "vtpm"),
            VtpmConfig{c.threshold, Millis(c.timeout_ms)});
  FileStore ree(c.DeviceDir(device_id) / "ree");
  UserClient user(vtpm, ree, Drbg(c.Seed(), "user"));

  TRCTEE_ASSIGN_OR_RETURN(HostPort hp, ParseHostPort(address));
  TRCTEE_ASSIGN_OR_RETURN(auto channel, TcpConnect(hp));
  Status status = vtpm.Connect(*channel);
  // Consumed CRPs stay consumed even when the session fails.
  Status saved = vtpm.crps().SaveToFile(crp_path);
  TRCTEE_RETURN_IF_ERROR(status);
  TRCTEE_RETURN_IF_ERROR(saved);
  std::cout << "session established with " << device_id << "\n";

  for (const std::string& op : ops) {
    status = RunOp(user, vtpm, op);
    TRCTEE_RETURN_IF_ERROR(vtpm.crps().SaveToFile(crp_path));
    if (!status.ok()) break;
  }
  channel->Close();

  fs::path session_dir = dir / (device_id + ".session");
  TRCTEE_RETURN_IF_ERROR(EnsureDir(session_dir));
  TRCTEE_RETURN_IF_ERROR(
      WriteFileAtomically(session_dir / "event.log", vtpm.ExportLog()));
  TRCTEE_RETURN_IF_ERROR(WriteFileAtomically(session_dir / "history.txt",
                                             user.history().Serialize()));
  TRCTEE_RETURN_IF_ERROR(WriteFileAtomically(
      session_dir / "pcrs.txt", SerializePcrSnapshot(vtpm.pcrs().values())));
  std::cout << "session files in " << session_dir.string() << "\n";
  return status;
}

Status CmdVerify(const std::string& log_path, const std::string& manifest_path,
                 const std::string& history_path,
                 const std::string& snapshot_path) {
  TRCTEE_ASSIGN_OR_RETURN(std::string log, ReadFileToString(log_path));
  TRCTEE_ASSIGN_OR_RETURN(std::string manifest_text,
                          ReadFileToString(manifest_path));
  TRCTEE_ASSIGN_OR_RETURN(GoldenManifest manifest,
                          ParseManifest(manifest_text));
  ExpectedHistory history;
  if (!history_path.empty()) {
    TRCTEE_ASSIGN_OR_RETURN(std::string text, ReadFileToString(history_path));
    TRCTEE_ASSIGN_OR_RETURN(history, ExpectedHistory::Parse(text));
  }
  std::optional<PcrValues> reported;
  if (!snapshot_path.empty()) {
    TRCTEE_ASSIGN_OR_RETURN(std::string text, ReadFileToString(snapshot_path));
    TRCTEE_ASSIGN_OR_RETURN(reported, ParsePcrSnapshot(text));
  }
  AttestationReport report =
      VerifyAttestation(log, manifest, history, reported);
  std::cout << report.ToText();
  if (!report.all_verified()) {
    return MakeError(ErrorCode::kExpectationFailed, "attestation mismatch");
  }
  return Status::Ok();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trctee: TPM-backed trusted FPGA deployment simulator"};
  app.require_subcommand(1);

  Common c;
  if (const char* env = std::getenv("TRCTEE_STORE")) c.store = env;
  if (c.store.empty()) c.store = "trctee-store";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "RNG seed (fresh entropy if unset)");
    sub->add_option("--threshold", c.threshold,
                    "frames per epoch before an automatic key update")
        ->check(CLI::Range(uint64_t{1}, std::numeric_limits<uint64_t>::max()));
    sub->add_option("--pool", c.pool, "CRPs per provisioning slice")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
    sub->add_option("--store", c.store, "file-store root ($TRCTEE_STORE)");
    sub->add_option("--timeout-ms", c.timeout_ms, "receive timeout")
        ->check(CLI::Range(1, 600000));
  };

  std::string id, user, device, scenario, transport = "inproc", transcript;
  std::string listen = "127.0.0.1:7800", address = "127.0.0.1:7800";
  std::string log, manifest, history, snapshot;
  std::vector<std::string> ops;
  bool once = false;

  auto* enroll_device =
      app.add_subcommand("enroll-device", "enroll a device with the TTP");
  enroll_device->add_option("--id", id)->required();

  auto* enroll_vtpm =
      app.add_subcommand("enroll-vtpm", "issue a vTPM key and certificate");
  enroll_vtpm->add_option("--user", user)->required();

  auto* provision =
      app.add_subcommand("provision", "hand a user a CRP slice for a device");
  provision->add_option("--user", user)->required();
  provision->add_option("--device", device)->required();

  auto* run = app.add_subcommand("run", "execute a scenario file");
  run->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  run->add_option("--transport", transport)
      ->check(CLI::IsMember({"inproc", "tcp"}));
  run->add_option("--transcript", transcript, "write the frame transcript");

  auto* serve = app.add_subcommand("serve", "boot a device and serve TCP");
  serve->add_option("--device", device)->required();
  serve->add_option("--listen", listen);
  serve->add_flag("--once", once, "exit after the first connection");

  auto* connect =
      app.add_subcommand("connect", "open a vTPM session to a device");
  connect->add_option("--user", user)->required();
  connect->add_option("--device", device)->required();
  connect->add_option("--address", address);
  connect->add_option("--op", ops,
                      "deploy:IP:KERNEL[:PARAMS], invoke:IP:INPUT[:FLAG], "
                      "update-key[:CHALLENGE], pcr-read:N, get-random:N");

  auto* verify = app.add_subcommand("verify", "check an exported event log");
  verify->add_option("log", log)->required()->check(CLI::ExistingFile);
  verify->add_option("--manifest", manifest)
      ->required()
      ->check(CLI::ExistingFile);
  verify->add_option("--history", history)->check(CLI::ExistingFile);
  verify->add_option("--snapshot", snapshot)->check(CLI::ExistingFile);

  for (auto* sub : {enroll_device, enroll_vtpm, provision, run, serve, connect})
    add_common(sub);

  CLI11_PARSE(app, argc, argv);

  Status status;
  if (enroll_device->parsed()) {
    status = CmdEnrollDevice(c, id);
  } else if (enroll_vtpm->parsed()) {
    status = CmdEnrollVtpm(c, user);
  } else if (provision->parsed()) {
    status = CmdProvision(c, user, device);
  } else if (run->parsed()) {
    status = CmdRun(c, scenario, transport, transcript);
  } else if (serve->parsed()) {
    status = CmdServe(c, device, listen, once);
  } else if (connect->parsed()) {
    status = CmdConnect(c, user, device, address, ops);
  } else if (verify->parsed()) {
    status = CmdVerify(log, manifest, history, snapshot);
  }
  if (!status.ok()) {
    if (status.code() == ErrorCode::kParseError) {
      Fail(status);
      return 2;
    }
    return Fail(status);
  }
  return 0;
}
