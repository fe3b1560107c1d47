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


#include "sbxforge/mutator.h"

#include <algorithm>

namespace sbxforge {

std::string_view MutationOpName(MutationOp op) {
  switch (op) {
    case MutationOp::kFlipBit:
      return "flip_bit";
    case MutationOp::kSetByte:
      return "set_byte";
    case MutationOp::kZeroByte:
      return "zero_byte";
    case MutationOp::kDuplicateChunk:
      return "duplicate_chunk";
    case MutationOp::kAppendZeros:
      return "append_zeros";
    case MutationOp::kAppendRandom:
      return "append_random";
    case MutationOp::kTruncate:
      return "truncate";
  }
  return "?";
}

void Mutator::Apply(MutationOp op, std::vector<uint8_t>& data, Rng& rng) const {
  const uint64_t size = data.size();
  const uint64_t room = config_.max_len > size ? config_.max_len - size : 0;
  switch (op) {
    case MutationOp::kFlipBit:
      if (size) {
        uint64_t bit = Below(rng, size * 8);
        data[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
      }
      break;
    case MutationOp::kSetByte:
      if (size) data[Below(rng, size)] = static_cast<uint8_t>(rng());
      break;
    case MutationOp::kZeroByte:
      if (size) data[Below(rng, size)] = 0;
      break;
    case MutationOp::kDuplicateChunk: {
      if (!size || !room) break;
      uint64_t from = Below(rng, size);
      uint64_t len = 1 + Below(rng, std::min<uint64_t>({size - from, config_.max_chunk, room}));
      uint64_t to = Below(rng, size + 1);
      std::vector<uint8_t> chunk(data.begin() + from, data.begin() + from + len);
      data.insert(data.begin() + to, chunk.begin(), chunk.end());
      break;
    }
    case MutationOp::kAppendZeros: {
      if (!room) break;
      uint64_t len = 1 + Below(rng, std::min<uint64_t>(config_.max_chunk, room));
      data.resize(size + len, 0);
      break;
    }
    case MutationOp::kAppendRandom: {
      if (!room) break;
      uint64_t len = 1 + Below(rng, std::min<uint64_t>(config_.max_chunk, room));
      for (uint64_t i = 0; i < len; ++i) data.push_back(static_cast<uint8_t>(rng()));
      break;
    }
    case MutationOp::kTruncate:
      if (size) data.resize(Below(rng, size));
      break;
  }
}

std::vector<uint8_t> Mutator::Mutate(const std::vector<uint8_t>& input, Rng& rng,
                                     std::vector<MutationOp>* applied) const {
  std::vector<uint8_t> out = input;
  if (out.size() > config_.max_len) out.resize(config_.max_len);
  const uint64_t depth = uint64_t{1} << Below(rng, config_.max_stack_log2 + 1);
  for (uint64_t i = 0; i < depth; ++i) {
    auto op = static_cast<MutationOp>(Below(rng, kNumMutationOps));
    if (applied) applied->push_back(op);
    Apply(op, out, rng);
  }
  return out;
}

}  // namespace sbxforge
