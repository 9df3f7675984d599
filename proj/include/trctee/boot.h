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

#ifndef TRCTEE_BOOT_H_
#define TRCTEE_BOOT_H_

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "trctee/bytes.h"
#include "trctee/crypto.h"
#include "trctee/pcr_bank.h"
#include "trctee/status.h"

namespace trctee {

inline constexpr std::size_t kBootComponentCount = 8;

// Boot order; component k is measured into PCR k.
inline constexpr std::array<std::string_view, kBootComponentCount>
    kBootComponentNames = {"FSBL",   "PUF_bitstream", "PMU_FW", "ATF",
                           "OP-TEE", "U-Boot",        "Linux",  "Rootfs"};

StatusOr<std::size_t> BootComponentIndex(std::string_view name);

struct BootImage {
  std::array<Bytes, kBootComponentCount> components;
};

// FSBL layout: "FSBL" || PK_TTP(32) || code bytes.
Bytes MakeFsbl(const PublicKey& pk_ttp);
StatusOr<PublicKey> ExtractTtpKey(ByteSpan fsbl);

// Deterministic reference image with PK_TTP embedded in the FSBL.
BootImage MakeGoldenBootImage(const PublicKey& pk_ttp);

// Directory layout: one file per component, named after kBootComponentNames.
Status SaveBootImage(const BootImage& image, const std::filesystem::path& dir);
StatusOr<BootImage> LoadBootImage(const std::filesystem::path& dir);

// BootROM acting as CRTM: SHA-384 of each component, destined for PCR k.
// Sequence numbers are left at 0; the vTPM assigns them on extend.
std::vector<MeasurementEvent> TrustedBoot(const BootImage& image);

struct ManifestEntry {
  std::string name;
  Digest48 digest{};
  bool operator==(const ManifestEntry&) const = default;
};

using GoldenManifest = std::vector<ManifestEntry>;

GoldenManifest MeasureManifest(const BootImage& image);

// PCR0..PCR7 expected after booting the manifest's image from reset.
std::array<Digest48, kBootComponentCount> ExpectedBootPcrs(
    const GoldenManifest& manifest);

// Line format: `name hex(digest)`.
std::string SerializeManifest(const GoldenManifest& manifest);
StatusOr<GoldenManifest> ParseManifest(std::string_view text);

}  // namespace trctee

#endif  // TRCTEE_BOOT_H_
