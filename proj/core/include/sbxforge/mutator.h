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


// Mask-stream mutators: stacked byte-level havoc in the AFL style.
#ifndef SBXFORGE_MUTATOR_H_
#define SBXFORGE_MUTATOR_H_

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sbxforge {

using Rng = std::mt19937_64;

// Uniform integer in [0, n). n must be nonzero. Platform independent, unlike
// std::uniform_int_distribution.
inline uint64_t Below(Rng& rng, uint64_t n) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

enum class MutationOp : uint8_t {
  kFlipBit,
  kSetByte,
  kZeroByte,
  kDuplicateChunk,
  kAppendZeros,
  kAppendRandom,
  kTruncate,
};
inline constexpr int kNumMutationOps = 7;

std::string_view MutationOpName(MutationOp op);

struct MutatorConfig {
  uint64_t max_len = 1 << 20;
  // Stack depth is 2^k with k uniform in [0, max_stack_log2].
  uint32_t max_stack_log2 = 6;
  // Append and duplicate sizes are uniform in [1, max_chunk].
  uint32_t max_chunk = 64;
};

class Mutator {
 public:
  explicit Mutator(MutatorConfig config = {}) : config_(config) {}

  // Applies a stack of random operations. Operations that do not apply to
  // the current length (e.g. a bit flip on an empty mask) leave it unchanged.
  // When `applied` is set it receives the chosen operations in order.
  std::vector<uint8_t> Mutate(const std::vector<uint8_t>& input, Rng& rng,
                              std::vector<MutationOp>* applied = nullptr) const;

  // One operation in place.
  void Apply(MutationOp op, std::vector<uint8_t>& data, Rng& rng) const;

  const MutatorConfig& config() const { return config_; }

 private:
  MutatorConfig config_;
};

}  // namespace sbxforge

#endif  // SBXFORGE_MUTATOR_H_
