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


// Split address space of the sandbox VM: trusted regions (globals, trusted
// heap, stack) tracked at allocation granularity, and the flat cage.
#ifndef SBXFORGE_MEMORY_H_
#define SBXFORGE_MEMORY_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sbxforge {

inline constexpr uint64_t kGlobalRegionBase = 0x1000'0000;
inline constexpr uint64_t kHeapRegionBase = 0x2000'0000;
inline constexpr uint64_t kStackRegionBase = 0x7000'0000;
inline constexpr uint64_t kRegionSpan = 0x1000'0000;
inline constexpr uint64_t kTrustedEnd = kStackRegionBase + kRegionSpan;

inline constexpr uint64_t kDefaultCageBase = 0x1'0000'0000;
inline constexpr uint64_t kDefaultCageSize = 1 << 20;

// The cage: [cage_base, cage_base + cage_size). Everything else is trusted.
struct SandboxLayout {
  uint64_t cage_base = kDefaultCageBase;
  uint64_t cage_size = kDefaultCageSize;

  bool contains(uint64_t addr) const { return addr - cage_base < cage_size; }
  bool ContainsRange(uint64_t addr, uint64_t len) const {
    return contains(addr) && len <= cage_size - (addr - cage_base);
  }
  // Throws std::invalid_argument unless the size is a power of two and the
  // cage is disjoint from the trusted regions.
  void Check() const;
};

struct Allocation {
  uint64_t base = 0;
  uint64_t size = 0;
  bool live = true;
};

enum class AccessStatus : uint8_t { kOk, kOutOfBounds, kFreed };

// A bump-allocated trusted region. Allocations are separated by redzones and
// never overlap; freed heap allocations stay recorded (live = false).
class TrustedRegion {
 public:
  static constexpr uint64_t kRedzone = 16;

  TrustedRegion(uint64_t base, uint64_t limit) : base_(base), limit_(limit) {}

  uint64_t base() const { return base_; }
  bool InRegion(uint64_t addr) const { return addr - base_ < limit_; }

  // Returns the address of a new zero-filled allocation, or nullopt when the
  // region is exhausted.
  std::optional<uint64_t> Allocate(uint64_t size);

  // Status of [addr, addr + width). On failure `*bad` receives the first
  // offending byte address.
  AccessStatus Check(uint64_t addr, uint64_t width, uint64_t* bad) const;
  // Number of contiguous accessible bytes starting at addr (0 if none).
  uint64_t Accessible(uint64_t addr) const;
  const Allocation* Find(uint64_t addr) const;

  uint8_t* At(uint64_t addr) { return bytes_.data() + (addr - base_); }
  const uint8_t* At(uint64_t addr) const { return bytes_.data() + (addr - base_); }

  AccessStatus Free(uint64_t addr);

  // Stack discipline: drop every allocation made after the mark.
  struct Mark {
    size_t allocations;
    uint64_t top;
  };
  Mark mark() const { return {allocs_.size(), top_}; }
  void PopTo(Mark mark);

  const std::vector<Allocation>& allocations() const { return allocs_; }

 private:
  uint64_t base_;
  uint64_t limit_;
  uint64_t top_ = kRedzone;
  std::vector<uint8_t> bytes_;
  std::vector<Allocation> allocs_;
};

// Cage memory with page-granular dirty tracking, so restoring a snapshot
// only copies the pages an execution touched.
class CageMemory {
 public:
  static constexpr unsigned kPageShift = 12;

  explicit CageMemory(uint64_t size = kDefaultCageSize);

  uint64_t size() const { return bytes_.size(); }
  uint8_t* At(uint64_t offset) { return bytes_.data() + offset; }
  const uint8_t* At(uint64_t offset) const { return bytes_.data() + offset; }
  std::span<const uint8_t> bytes() const { return bytes_; }

  void MarkDirty(uint64_t offset, uint64_t len);
  // Copies every page dirtied since the last call from `source` (which must
  // have the same size) and clears the dirty set.
  void RestoreDirtyFrom(const CageMemory& source);
  void CopyFrom(const CageMemory& source);
  void ClearDirty();

  // Bump allocator; returns the cage offset or nullopt when full.
  std::optional<uint64_t> Allocate(uint64_t size);
  // (offset, size) of every cage allocation, in allocation order.
  const std::vector<std::pair<uint64_t, uint64_t>>& objects() const { return objects_; }

 private:
  std::vector<uint8_t> bytes_;
  std::vector<uint64_t> dirty_bits_;
  std::vector<uint32_t> dirty_pages_;
  uint64_t top_ = 0;
  std::vector<std::pair<uint64_t, uint64_t>> objects_;
};

}  // namespace sbxforge

#endif  // SBXFORGE_MEMORY_H_
