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

#include "trctee/puf.h"

#include <fstream>
#include <set>
#include <sstream>

namespace trctee {

PufResponse PufDevice::Respond(const PufChallenge& challenge) const {
  ByteWriter msg;
  msg.Str("trctee-sram-puf").Raw(challenge);
  return HmacSha256(seed_, msg.bytes());
}

std::size_t CrpStore::unused_count() const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.used ? 0 : 1;
  return n;
}

Status CrpStore::Add(const CrpRecord& record) {
  if (index_.count(record.challenge) != 0) {
    return MakeError(ErrorCode::kInvalidArgument,
                     "duplicate challenge " + ToHex(record.challenge));
  }
  index_.emplace(record.challenge, records_.size());
  records_.push_back(record);
  return Status::Ok();
}

StatusOr<CrpRecord> CrpStore::TakeUnused() {
  for (auto& r : records_) {
    if (!r.used) {
      r.used = true;
      return r;
    }
  }
  return MakeError(ErrorCode::kExhausted, "no unused CRP left");
}

StatusOr<CrpRecord> CrpStore::TakeChallenge(const PufChallenge& challenge) {
  auto it = index_.find(challenge);
  if (it == index_.end()) {
    return MakeError(ErrorCode::kNotFound,
                     "challenge " + ToHex(challenge) + " not in store");
  }
  CrpRecord& r = records_[it->second];
  if (r.used) {
    return MakeError(ErrorCode::kAlreadyUsed,
                     "challenge " + ToHex(challenge) + " already consumed");
  }
  r.used = true;
  return r;
}

StatusOr<CrpStore> CrpStore::SplitUnused(std::size_t n, CrpOwner new_owner) {
  if (unused_count() < n) {
    return MakeError(ErrorCode::kCrpExhausted,
                     "need " + std::to_string(n) + " unused CRPs, have " +
                         std::to_string(unused_count()));
  }
  CrpStore slice(new_owner);
  std::vector<CrpRecord> kept;
  for (const auto& r : records_) {
    if (!r.used && slice.size() < n) {
      TRCTEE_RETURN_IF_ERROR(slice.Add(r));
    } else {
      kept.push_back(r);
    }
  }
  records_.clear();
  index_.clear();
  for (const auto& r : kept) TRCTEE_RETURN_IF_ERROR(Add(r));
  return slice;
}

std::string CrpStore::Serialize() const {
  std::ostringstream out;
  for (const auto& r : records_) {
    out << ToHex(r.challenge) << ' ' << ToHex(r.response) << ' '
        << (r.used ? 1 : 0) << '\n';
  }
  return out.str();
}

StatusOr<CrpStore> CrpStore::Parse(std::string_view text, CrpOwner owner) {
  CrpStore store(owner);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string c, r, used, extra;
    if (!(fields >> c >> r >> used) || (fields >> extra) ||
        (used != "0" && used != "1")) {
      return MakeError(ErrorCode::kParseError,
                       "CRP line " + std::to_string(line_no));
    }
    auto challenge = ArrayFromHex<kChallengeSize>(c);
    auto response = ArrayFromHex<kPufResponseSize>(r);
    if (!challenge.ok() || !response.ok()) {
      return MakeError(ErrorCode::kParseError,
                       "CRP line " + std::to_string(line_no) + " hex");
    }
    TRCTEE_RETURN_IF_ERROR(
        store.Add(CrpRecord{*challenge, *response, used == "1"}));
  }
  return store;
}

Status CrpStore::SaveToFile(const std::filesystem::path& path) const {
  return WriteFileAtomically(path, Serialize());
}

StatusOr<CrpStore> CrpStore::LoadFromFile(const std::filesystem::path& path,
                                          CrpOwner owner) {
  TRCTEE_ASSIGN_OR_RETURN(std::string text, ReadFileToString(path));
  return Parse(text, owner);
}

StatusOr<CrpStore> EnrollCrps(const PufDevice& device, std::size_t n,
                              Drbg& rng) {
  if (n == 0) {
    return MakeError(ErrorCode::kInvalidArgument, "enroll at least one CRP");
  }
  CrpStore store(CrpOwner::kTtp);
  std::set<PufChallenge> drawn;
  while (store.size() < n) {
    PufChallenge c = rng.Array<kChallengeSize>();
    if (c == kAutoChallenge || !drawn.insert(c).second) continue;
    TRCTEE_RETURN_IF_ERROR(store.Add(CrpRecord{c, device.Respond(c), false}));
  }
  return store;
}

Status WriteFileAtomically(const std::filesystem::path& path,
                           std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      return MakeError(ErrorCode::kIoError, "cannot write " + tmp.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) {
      return MakeError(ErrorCode::kIoError, "short write " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    return MakeError(ErrorCode::kIoError,
                     "rename to " + path.string() + ": " + ec.message());
  }
  return Status::Ok();
}

StatusOr<std::string> ReadFileToString(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return MakeError(ErrorCode::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace trctee
