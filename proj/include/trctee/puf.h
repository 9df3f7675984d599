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

#ifndef TRCTEE_PUF_H_
#define TRCTEE_PUF_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <vector>

#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/status.h"

namespace trctee {

inline constexpr std::size_t kChallengeSize = 4;
inline constexpr std::size_t kPufResponseSize = 32;

using PufChallenge = ByteArray<kChallengeSize>;
using PufResponse = ByteArray<kPufResponseSize>;

// Reserved: an Update_CMD carrying this challenge asks the vTPM to pick the
// next unused CRP itself. Enrollment never draws it.
inline constexpr PufChallenge kAutoChallenge = {0, 0, 0, 0};

// Noiseless SRAM PUF: a keyed PRF of the fabrication seed.
class PufDevice {
 public:
  explicit PufDevice(const Key32& device_seed) : seed_(device_seed) {}

  PufResponse Respond(const PufChallenge& challenge) const;

 private:
  Key32 seed_;
};

struct CrpRecord {
  PufChallenge challenge{};
  PufResponse response{};
  bool used = false;
  bool operator==(const CrpRecord&) const = default;
};

enum class CrpOwner { kTtp, kUser };

class CrpStore {
 public:
  explicit CrpStore(CrpOwner owner) : owner_(owner) {}

  CrpOwner owner() const { return owner_; }
  std::size_t size() const { return records_.size(); }
  std::size_t unused_count() const;
  const std::vector<CrpRecord>& records() const { return records_; }

  // Fails with InvalidArgument on a duplicate challenge.
  Status Add(const CrpRecord& record);

  // Marks and returns the oldest unused record.
  StatusOr<CrpRecord> TakeUnused();

  // Marks and returns the record for a specific challenge. NotFound when the
  // store never held it, AlreadyUsed when it was consumed before.
  StatusOr<CrpRecord> TakeChallenge(const PufChallenge& challenge);

  // Removes up to `n` unused records and returns them as a new store.
  StatusOr<CrpStore> SplitUnused(std::size_t n, CrpOwner new_owner);

  // Line format: `hex(challenge) hex(response) used_flag`. Saving goes through
  // a temporary file and rename.
  std::string Serialize() const;
  static StatusOr<CrpStore> Parse(std::string_view text, CrpOwner owner);
  Status SaveToFile(const std::filesystem::path& path) const;
  static StatusOr<CrpStore> LoadFromFile(const std::filesystem::path& path,
                                         CrpOwner owner);

 private:
  CrpOwner owner_;
  std::vector<CrpRecord> records_;
  std::map<PufChallenge, std::size_t> index_;
};

// Draws `n` distinct challenges (never kAutoChallenge) and records the
// device's responses.
StatusOr<CrpStore> EnrollCrps(const PufDevice& device, std::size_t n,
                              Drbg& rng);

// Writes `contents` to `path` atomically (temp file in the same directory,
// then rename).
Status WriteFileAtomically(const std::filesystem::path& path,
                           std::string_view contents);
StatusOr<std::string> ReadFileToString(const std::filesystem::path& path);

}  // namespace trctee

#endif  // TRCTEE_PUF_H_
