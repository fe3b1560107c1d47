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


#include "sbxforge/interceptor.h"

#include <fmt/format.h>

namespace sbxforge {

uint64_t WidthMask(unsigned width) {
  return width >= 8 ? ~uint64_t{0} : (uint64_t{1} << (8 * width)) - 1;
}

uint64_t ReadLittleEndian(std::span<const uint8_t> bytes) {
  uint64_t value = 0;
  for (size_t i = bytes.size(); i-- > 0;) value = (value << 8) | bytes[i];
  return value;
}

void WriteLittleEndian(std::span<uint8_t> bytes, uint64_t value) {
  for (uint8_t& b : bytes) {
    b = static_cast<uint8_t>(value);
    value >>= 8;
  }
}

uint64_t MaskStream::NextMask(unsigned width) {
  uint64_t mask = 0;
  for (unsigned i = 0; i < width; ++i) {
    uint64_t pos = cursor_ + i;
    if (pos < bytes_.size()) mask |= uint64_t{bytes_[pos]} << (8 * i);
  }
  cursor_ += width;
  return mask;
}

std::string FormatRecord(const InterceptionRecord& r) {
  return fmt::format("{} 0x{:x} {} 0x{:x} 0x{:x} 0x{:x} {}", r.site, r.address, r.width,
                     r.original, r.mask, r.mutated, r.stream_offset);
}

uint64_t PassthroughInterceptor::Intercept(uint32_t, uint64_t, std::span<uint8_t> bytes) {
  ++calls_;
  return ReadLittleEndian(bytes);
}

uint64_t MaskInterceptor::Intercept(uint32_t site, uint64_t address, std::span<uint8_t> bytes) {
  const unsigned width = static_cast<unsigned>(bytes.size());
  const uint64_t offset = stream_.cursor();
  const uint64_t original = ReadLittleEndian(bytes);
  const uint64_t mask = stream_.NextMask(width);
  const uint64_t mutated = original ^ mask;
  if (mask != 0) WriteLittleEndian(bytes, mutated);
  if (log_) {
    log_->push_back({site, address, static_cast<uint8_t>(width), original, mask, mutated, offset});
  }
  return mutated;
}

}  // namespace sbxforge
