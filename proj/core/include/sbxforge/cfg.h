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


// Control-flow edge enumeration used as the coverage-map key space.
#ifndef SBXFORGE_CFG_H_
#define SBXFORGE_CFG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sbxforge/ir.h"

namespace sbxforge {

using EdgeId = uint32_t;

struct Edge {
  enum class Kind : uint8_t { kBranch, kCall, kReturn };
  Kind kind = Kind::kBranch;
  uint32_t function = 0;  // function containing the branch or call site
  uint32_t block = 0;     // source block (branch) or call-site block
  uint32_t target = 0;    // successor block (branch) or callee index (call/return)
  uint32_t call_index = 0;  // ordinal of the call among the block's calls

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Dense edge ids: functions in order, blocks in order; within a block first
// each call site's (call, return) pair in instruction order, then the
// distinct successors of the terminator in operand order. Hook
// pseudo-instructions do not affect the numbering, so a program and its
// instrumented form share one id space.
class EdgeMap {
 public:
  explicit EdgeMap(const ir::Program& program);

  size_t size() const { return edges_.size(); }
  const Edge& edge(EdgeId id) const { return edges_[id]; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Id of the branch edge (fn, from_block) -> to_block.
  EdgeId BranchEdge(uint32_t fn, uint32_t from_block, uint32_t to_block) const;
  // Ids of the call/return edges of the n-th call in (fn, block).
  EdgeId CallEdge(uint32_t fn, uint32_t block, uint32_t call_index) const;
  EdgeId ReturnEdge(uint32_t fn, uint32_t block, uint32_t call_index) const;

  std::string Describe(const ir::Program& program, EdgeId id) const;

 private:
  std::vector<Edge> edges_;
  // first edge id of each (fn, block), indexed by block_base_[fn] + block
  std::vector<uint32_t> block_first_edge_;
  std::vector<uint32_t> block_base_;
};

std::vector<EdgeId> EdgesOf(const ir::Program& program);

}  // namespace sbxforge

#endif  // SBXFORGE_CFG_H_
