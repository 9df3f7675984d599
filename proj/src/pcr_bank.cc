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

#include "trctee/pcr_bank.h"

#include <charconv>
#include <sstream>

#include "trctee/crypto.h"

namespace trctee {
namespace {

Status IndexError(std::size_t index) {
  return MakeError(ErrorCode::kIndexOutOfRange,
                   "PCR index " + std::to_string(index) + " not in 0..23");
}

template <typename T>
bool ParseUnsigned(std::string_view s, T* out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Digest48 ExtendDigest(const Digest48& old_value, const Digest48& digest) {
  ByteWriter w(96);
  w.Raw(old_value).Raw(digest);
  return Sha384(w.bytes());
}

void PcrBank::Reset() {
  for (auto& r : registers_) r.fill(0);
}

StatusOr<Digest48> PcrBank::Extend(std::size_t index, const Digest48& digest) {
  if (index >= kNumPcrs) return IndexError(index);
  registers_[index] = ExtendDigest(registers_[index], digest);
  return registers_[index];
}

StatusOr<Digest48> PcrBank::Read(std::size_t index) const {
  if (index >= kNumPcrs) return IndexError(index);
  return registers_[index];
}

Digest48 PcrBank::Composite() const { return PcrComposite(registers_); }

Digest48 PcrComposite(const PcrValues& values) {
  ByteWriter w(kNumPcrs * 48);
  for (const auto& r : values) w.Raw(r);
  return Sha384(w.bytes());
}

std::string_view EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kBootComponent:
      return "BootComponent";
    case EventKind::kIpDeploy:
      return "IpDeploy";
    case EventKind::kIpInput:
      return "IpInput";
    case EventKind::kIpOutput:
      return "IpOutput";
    case EventKind::kOther:
      return "Other";
  }
  return "Other";
}

StatusOr<EventKind> ParseEventKind(std::string_view name) {
  for (EventKind k :
       {EventKind::kBootComponent, EventKind::kIpDeploy, EventKind::kIpInput,
        EventKind::kIpOutput, EventKind::kOther}) {
    if (EventKindName(k) == name) return k;
  }
  return MakeError(ErrorCode::kParseError,
                   "unknown event kind '" + std::string(name) + "'");
}

bool IsValidLabel(std::string_view label) {
  if (label.empty() || label.size() > 64) return false;
  for (char c : label) {
    if (c < 0x21 || c > 0x7E || c == ',') return false;
  }
  return true;
}

const MeasurementEvent& EventLog::Append(std::size_t pcr_index,
                                         const Digest48& digest, EventKind kind,
                                         std::string label) {
  events_.push_back(
      MeasurementEvent{next_seq_++, pcr_index, digest, kind, std::move(label)});
  return events_.back();
}

std::string EventLog::Export() const {
  std::ostringstream out;
  for (const auto& e : events_) {
    out << e.seq << ',' << e.pcr_index << ',' << EventKindName(e.kind) << ','
        << e.label << ',' << ToHex(e.digest) << '\n';
  }
  return out.str();
}

StatusOr<std::vector<MeasurementEvent>> ParseEventLog(std::string_view text) {
  std::vector<MeasurementEvent> events;
  std::size_t line_no = 0;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text =
        nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    auto fail = [&](const std::string& why) {
      return MakeError(ErrorCode::kParseError,
                       "log line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 5) return fail("expected 5 fields");

    MeasurementEvent e;
    if (!ParseUnsigned(fields[0], &e.seq)) return fail("bad seq");
    if (!ParseUnsigned(fields[1], &e.pcr_index) || e.pcr_index >= kNumPcrs) {
      return fail("bad pcr index");
    }
    auto kind = ParseEventKind(fields[2]);
    if (!kind.ok()) return fail(kind.status().message());
    e.kind = *kind;
    if (!IsValidLabel(fields[3])) return fail("bad label");
    e.label = std::string(fields[3]);
    auto digest = ArrayFromHex<48>(fields[4]);
    if (!digest.ok()) return fail("bad digest");
    e.digest = *digest;
    if (!events.empty() && e.seq <= events.back().seq) {
      return fail("sequence numbers must strictly increase");
    }
    events.push_back(std::move(e));
  }
  return events;
}

StatusOr<PcrValues> ReplayEvents(const std::vector<MeasurementEvent>& events) {
  PcrBank bank;
  for (const auto& e : events) {
    TRCTEE_ASSIGN_OR_RETURN(Digest48 ignored,
                            bank.Extend(e.pcr_index, e.digest));
    (void)ignored;
  }
  return bank.values();
}

}  // namespace trctee
