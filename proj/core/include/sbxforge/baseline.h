// Copyright 2026 The sbx-forge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Corruption-API baseline: inputs are lists of attacker writes into cage
// objects, applied once at the snapshot point.
#ifndef SBXFORGE_BASELINE_H_
#define SBXFORGE_BASELINE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "sbxforge/memory.h"

namespace sbxforge {

// Encoded as 11 bytes: object selector, offset, width selector, value (u64
// little-endian). The selector picks a cage object (modulo the number of
// objects), the offset is taken modulo the object size and the width
// selector's low two bits pick 1, 2, 4 or 8 bytes.
struct CageWrite {
  uint8_t object = 0;
  uint8_t offset = 0;
  uint8_t width_selector = 0;
  uint64_t value = 0;

  unsigned width() const { return 1u << (width_selector & 3); }
  friend bool operator==(const CageWrite&, const CageWrite&) = default;
};

inline constexpr size_t kCageWriteSize = 11;

// A trailing partial entry is ignored.
std::vector<CageWrite> DecodeWriteList(std::span<const uint8_t> bytes);
std::vector<uint8_t> EncodeWriteList(std::span<const CageWrite> writes);

// Applies the writes in order and returns how many landed. Writes are
// clipped at the cage end; nothing is applied when the cage has no objects.
size_t ApplyWriteList(CageMemory& cage, std::span<const CageWrite> writes);

}  // namespace sbxforge

#endif  // SBXFORGE_BASELINE_H_
