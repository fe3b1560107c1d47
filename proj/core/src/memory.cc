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


#include "sbxforge/memory.h"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include <fmt/format.h>

namespace sbxforge {
namespace {

constexpr uint64_t kAlign = 16;

uint64_t AlignUp(uint64_t v) { return (v + kAlign - 1) & ~(kAlign - 1); }

}  // namespace

void SandboxLayout::Check() const {
  if (cage_size == 0 || (cage_size & (cage_size - 1)) != 0) {
    throw std::invalid_argument(fmt::format("cage size {} is not a power of two", cage_size));
  }
  if (cage_base + cage_size < cage_base) {
    throw std::invalid_argument("cage wraps around the address space");
  }
  if (cage_base < kTrustedEnd && cage_base + cage_size > kGlobalRegionBase) {
    throw std::invalid_argument(
        fmt::format("cage [0x{:x}, 0x{:x}) overlaps the trusted regions", cage_base,
                    cage_base + cage_size));
  }
}

std::optional<uint64_t> TrustedRegion::Allocate(uint64_t size) {
  uint64_t start = AlignUp(top_);
  if (size > limit_ || start + size + kRedzone > limit_) return std::nullopt;
  uint64_t end = start + size;
  if (bytes_.size() < end + kRedzone) bytes_.resize(end + kRedzone, 0);
  std::memset(bytes_.data() + start, 0, size);
  allocs_.push_back({base_ + start, size, true});
  top_ = end + kRedzone;
  return base_ + start;
}

const Allocation* TrustedRegion::Find(uint64_t addr) const {
  auto it = std::upper_bound(allocs_.begin(), allocs_.end(), addr,
                             [](uint64_t a, const Allocation& alloc) { return a < alloc.base; });
  if (it == allocs_.begin()) return nullptr;
  const Allocation& alloc = *std::prev(it);
  // Zero-sized allocations own no bytes.
  if (addr - alloc.base < alloc.size) return &alloc;
  return nullptr;
}

AccessStatus TrustedRegion::Check(uint64_t addr, uint64_t width, uint64_t* bad) const {
  const Allocation* alloc = Find(addr);
  if (!alloc) {
    // Could sit inside a freed allocation's range: Find() only returns the
    // nearest allocation, which is enough since allocations never overlap.
    *bad = addr;
    return AccessStatus::kOutOfBounds;
  }
  if (!alloc->live) {
    *bad = addr;
    return AccessStatus::kFreed;
  }
  uint64_t end = alloc->base + alloc->size;
  if (width > end - addr) {
    *bad = end;
    return AccessStatus::kOutOfBounds;
  }
  return AccessStatus::kOk;
}

uint64_t TrustedRegion::Accessible(uint64_t addr) const {
  const Allocation* alloc = Find(addr);
  if (!alloc || !alloc->live) return 0;
  return alloc->base + alloc->size - addr;
}

AccessStatus TrustedRegion::Free(uint64_t addr) {
  auto it = std::lower_bound(allocs_.begin(), allocs_.end(), addr,
                             [](const Allocation& alloc, uint64_t a) { return alloc.base < a; });
  if (it == allocs_.end() || it->base != addr) return AccessStatus::kOutOfBounds;
  if (!it->live) return AccessStatus::kFreed;
  it->live = false;
  return AccessStatus::kOk;
}

void TrustedRegion::PopTo(Mark mark) {
  allocs_.resize(mark.allocations);
  top_ = mark.top;
}

CageMemory::CageMemory(uint64_t size)
    : bytes_(size, 0), dirty_bits_(((size >> kPageShift) + 63) / 64 + 1, 0) {}

void CageMemory::MarkDirty(uint64_t offset, uint64_t len) {
  if (len == 0) return;
  uint64_t first = offset >> kPageShift;
  uint64_t last = (offset + len - 1) >> kPageShift;
  for (uint64_t page = first; page <= last; ++page) {
    uint64_t& word = dirty_bits_[page >> 6];
    uint64_t bit = uint64_t{1} << (page & 63);
    if (!(word & bit)) {
      word |= bit;
      dirty_pages_.push_back(static_cast<uint32_t>(page));
    }
  }
}

void CageMemory::RestoreDirtyFrom(const CageMemory& source) {
  const uint64_t page_size = uint64_t{1} << kPageShift;
  for (uint32_t page : dirty_pages_) {
    uint64_t offset = uint64_t{page} << kPageShift;
    uint64_t len = std::min(page_size, bytes_.size() - offset);
    std::memcpy(bytes_.data() + offset, source.bytes_.data() + offset, len);
  }
  top_ = source.top_;
  objects_ = source.objects_;
  ClearDirty();
}

void CageMemory::CopyFrom(const CageMemory& source) {
  bytes_ = source.bytes_;
  top_ = source.top_;
  objects_ = source.objects_;
  dirty_bits_.assign(source.dirty_bits_.size(), 0);
  dirty_pages_.clear();
}

void CageMemory::ClearDirty() {
  for (uint32_t page : dirty_pages_) dirty_bits_[page >> 6] = 0;
  dirty_pages_.clear();
}

std::optional<uint64_t> CageMemory::Allocate(uint64_t size) {
  uint64_t start = AlignUp(top_);
  if (start > bytes_.size() || size > bytes_.size() - start) return std::nullopt;
  top_ = start + size;
  objects_.emplace_back(start, size);
  return start;
}

}  // namespace sbxforge
