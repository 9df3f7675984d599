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

#ifndef TRCTEE_PCR_BANK_H_
#define TRCTEE_PCR_BANK_H_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "trctee/bytes.h"
#include "trctee/status.h"

namespace trctee {

inline constexpr std::size_t kNumPcrs = 24;

// Fixed register assignments.
inline constexpr std::size_t kPcrBootFirst = 0;  // PCR0..PCR7, boot order
inline constexpr std::size_t kPcrDeploy = 8;
inline constexpr std::size_t kPcrInvokeInput = 9;
inline constexpr std::size_t kPcrInvokeOutput = 10;

using PcrValues = std::array<Digest48, kNumPcrs>;

// SHA-384(old || digest).
Digest48 ExtendDigest(const Digest48& old_value, const Digest48& digest);

// Single SHA-384 bank of 24 registers, all zero at reset.
class PcrBank {
 public:
  PcrBank() { Reset(); }

  void Reset();
  StatusOr<Digest48> Extend(std::size_t index, const Digest48& digest);
  StatusOr<Digest48> Read(std::size_t index) const;
  const PcrValues& values() const { return registers_; }

  // SHA-384(PCR0 || ... || PCR23); the system-state salt used for rekeying.
  Digest48 Composite() const;

 private:
  PcrValues registers_;
};

Digest48 PcrComposite(const PcrValues& values);

enum class EventKind { kBootComponent, kIpDeploy, kIpInput, kIpOutput, kOther };

std::string_view EventKindName(EventKind kind);
StatusOr<EventKind> ParseEventKind(std::string_view name);

struct MeasurementEvent {
  uint64_t seq = 0;
  std::size_t pcr_index = 0;
  Digest48 digest{};
  EventKind kind = EventKind::kOther;
  std::string label;
  bool operator==(const MeasurementEvent&) const = default;
};

// Labels end up in a comma-separated export; they must be short printable
// text without commas.
bool IsValidLabel(std::string_view label);

class EventLog {
 public:
  // Assigns the next sequence number; returns the stored event.
  const MeasurementEvent& Append(std::size_t pcr_index, const Digest48& digest,
                                 EventKind kind, std::string label);

  const std::vector<MeasurementEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  // One record per line: `seq,pcr_index,kind,label,hex(digest)`.
  std::string Export() const;

 private:
  std::vector<MeasurementEvent> events_;
  uint64_t next_seq_ = 1;
};

// Parses an exported log. Rejects non-increasing sequence numbers and
// out-of-range registers.
StatusOr<std::vector<MeasurementEvent>> ParseEventLog(std::string_view text);

// Replays events over a reset bank.
StatusOr<PcrValues> ReplayEvents(const std::vector<MeasurementEvent>& events);

}  // namespace trctee

#endif  // TRCTEE_PCR_BANK_H_
