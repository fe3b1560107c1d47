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


#include "sbxforge/baseline.h"

#include <algorithm>

#include "sbxforge/interceptor.h"

namespace sbxforge {

std::vector<CageWrite> DecodeWriteList(std::span<const uint8_t> bytes) {
  std::vector<CageWrite> writes;
  for (size_t i = 0; i + kCageWriteSize <= bytes.size(); i += kCageWriteSize) {
    CageWrite w;
    w.object = bytes[i];
    w.offset = bytes[i + 1];
    w.width_selector = bytes[i + 2];
    w.value = ReadLittleEndian(bytes.subspan(i + 3, 8));
    writes.push_back(w);
  }
  return writes;
}

std::vector<uint8_t> EncodeWriteList(std::span<const CageWrite> writes) {
  std::vector<uint8_t> bytes;
  for (const CageWrite& w : writes) {
    uint8_t value[8];
    WriteLittleEndian(value, w.value);
    bytes.push_back(w.object);
    bytes.push_back(w.offset);
    bytes.push_back(w.width_selector);
    bytes.insert(bytes.end(), value, value + 8);
  }
  return bytes;
}

size_t ApplyWriteList(CageMemory& cage, std::span<const CageWrite> writes) {
  const auto& objects = cage.objects();
  if (objects.empty()) return 0;
  size_t applied = 0;
  for (const CageWrite& w : writes) {
    const auto& [base, size] = objects[w.object % objects.size()];
    uint64_t addr = base + (size ? w.offset % size : 0);
    if (addr >= cage.size()) continue;
    uint64_t width = std::min<uint64_t>(w.width(), cage.size() - addr);
    WriteLittleEndian({cage.At(addr), width}, w.value);
    cage.MarkDirty(addr, width);
    ++applied;
  }
  return applied;
}

}  // namespace sbxforge
