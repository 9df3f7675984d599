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

#include "trctee/boot.h"

#include <fstream>
#include <sstream>

#include "trctee/puf.h"

namespace trctee {
namespace {

constexpr std::string_view kFsblMagic = "FSBL";

Bytes FillerBlob(std::string_view name, std::size_t size) {
  std::string banner = std::string(name) + " image v1.0 ";
  Bytes out;
  out.reserve(size);
  for (std::size_t i = 0; out.size() < size; ++i) {
    out.push_back(static_cast<uint8_t>(banner[i % banner.size()]));
  }
  return out;
}

}  // namespace

StatusOr<std::size_t> BootComponentIndex(std::string_view name) {
  for (std::size_t i = 0; i < kBootComponentNames.size(); ++i) {
    if (kBootComponentNames[i] == name) return i;
  }
  return MakeError(ErrorCode::kInvalidArgument,
                   "unknown boot component '" + std::string(name) + "'");
}

Bytes MakeFsbl(const PublicKey& pk_ttp) {
  ByteWriter w;
  w.Str(kFsblMagic).Raw(pk_ttp).Raw(FillerBlob("FSBL", 512));
  return std::move(w).Take();
}

StatusOr<PublicKey> ExtractTtpKey(ByteSpan fsbl) {
  ByteReader r(fsbl);
  auto magic = r.Raw(kFsblMagic.size());
  if (!magic || !std::equal(magic->begin(), magic->end(), kFsblMagic.begin())) {
    return MakeError(ErrorCode::kBadImage, "FSBL magic missing");
  }
  auto key = r.Array<kPublicKeySize>();
  if (!key) return MakeError(ErrorCode::kBadImage, "FSBL truncated");
  return *key;
}

BootImage MakeGoldenBootImage(const PublicKey& pk_ttp) {
  static constexpr std::array<std::size_t, kBootComponentCount> kSizes = {
      0, 2048, 1024, 1536, 4096, 3072, 8192, 6144};
  BootImage image;
  image.components[0] = MakeFsbl(pk_ttp);
  for (std::size_t i = 1; i < kBootComponentCount; ++i) {
    image.components[i] = FillerBlob(kBootComponentNames[i], kSizes[i]);
  }
  return image;
}

Status SaveBootImage(const BootImage& image, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return MakeError(ErrorCode::kIoError, ec.message());
  for (std::size_t i = 0; i < kBootComponentCount; ++i) {
    const Bytes& blob = image.components[i];
    TRCTEE_RETURN_IF_ERROR(WriteFileAtomically(
        dir / std::string(kBootComponentNames[i]),
        std::string_view(reinterpret_cast<const char*>(blob.data()),
                         blob.size())));
  }
  return Status::Ok();
}

StatusOr<BootImage> LoadBootImage(const std::filesystem::path& dir) {
  BootImage image;
  for (std::size_t i = 0; i < kBootComponentCount; ++i) {
    TRCTEE_ASSIGN_OR_RETURN(
        std::string raw,
        ReadFileToString(dir / std::string(kBootComponentNames[i])));
    image.components[i] = ToBytes(AsBytes(raw));
  }
  return image;
}

std::vector<MeasurementEvent> TrustedBoot(const BootImage& image) {
  std::vector<MeasurementEvent> events;
  events.reserve(kBootComponentCount);
  for (std::size_t k = 0; k < kBootComponentCount; ++k) {
    MeasurementEvent e;
    e.pcr_index = kPcrBootFirst + k;
    e.digest = Sha384(image.components[k]);
    e.kind = EventKind::kBootComponent;
    e.label = std::string(kBootComponentNames[k]);
    events.push_back(std::move(e));
  }
  return events;
}

GoldenManifest MeasureManifest(const BootImage& image) {
  GoldenManifest manifest;
  for (const auto& e : TrustedBoot(image)) {
    manifest.push_back(ManifestEntry{e.label, e.digest});
  }
  return manifest;
}

std::array<Digest48, kBootComponentCount> ExpectedBootPcrs(
    const GoldenManifest& manifest) {
  std::array<Digest48, kBootComponentCount> pcrs{};
  for (std::size_t k = 0; k < kBootComponentCount && k < manifest.size(); ++k) {
    pcrs[k] = ExtendDigest(Digest48{}, manifest[k].digest);
  }
  return pcrs;
}

std::string SerializeManifest(const GoldenManifest& manifest) {
  std::ostringstream out;
  for (const auto& e : manifest)
    out << e.name << ' ' << ToHex(e.digest) << '\n';
  return out.str();
}

StatusOr<GoldenManifest> ParseManifest(std::string_view text) {
  GoldenManifest manifest;
  std::istringstream in{std::string(text)};
  std::string name, hex;
  while (in >> name >> hex) {
    TRCTEE_ASSIGN_OR_RETURN(Digest48 d, ArrayFromHex<48>(hex));
    manifest.push_back(ManifestEntry{name, d});
  }
  if (manifest.size() != kBootComponentCount) {
    return MakeError(ErrorCode::kParseError,
                     "manifest must list 8 boot components");
  }
  for (std::size_t k = 0; k < kBootComponentCount; ++k) {
    if (manifest[k].name != kBootComponentNames[k]) {
      return MakeError(ErrorCode::kParseError,
                       "manifest out of boot order at " + manifest[k].name);
    }
  }
  return manifest;
}

}  // namespace trctee
