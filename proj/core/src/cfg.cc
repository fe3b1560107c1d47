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


#include "sbxforge/cfg.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace sbxforge {

EdgeMap::EdgeMap(const ir::Program& program) {
  for (uint32_t f = 0; f < program.functions.size(); ++f) {
    const ir::Function& fn = program.functions[f];
    block_base_.push_back(static_cast<uint32_t>(block_first_edge_.size()));
    for (uint32_t b = 0; b < fn.blocks.size(); ++b) {
      block_first_edge_.push_back(static_cast<uint32_t>(edges_.size()));
      const ir::BasicBlock& block = fn.blocks[b];
      uint32_t call_index = 0;
      for (const ir::Instr& instr : block.instrs) {
        if (instr.op != ir::Opcode::kCall) continue;
        uint32_t callee = static_cast<uint32_t>(program.FunctionIndex(instr.symbol));
        edges_.push_back({Edge::Kind::kCall, f, b, callee, call_index});
        edges_.push_back({Edge::Kind::kReturn, f, b, callee, call_index});
        ++call_index;
      }
      const ir::Instr& term = block.instrs.back();
      std::vector<std::string> succ = term.targets;
      if (term.default_target) succ.push_back(*term.default_target);
      std::vector<uint32_t> seen;
      for (const std::string& name : succ) {
        uint32_t to = static_cast<uint32_t>(fn.BlockIndex(name));
        if (std::find(seen.begin(), seen.end(), to) != seen.end()) continue;
        seen.push_back(to);
        edges_.push_back({Edge::Kind::kBranch, f, b, to, 0});
      }
    }
  }
  block_first_edge_.push_back(static_cast<uint32_t>(edges_.size()));
}

EdgeId EdgeMap::BranchEdge(uint32_t fn, uint32_t from_block, uint32_t to_block) const {
  uint32_t slot = block_base_[fn] + from_block;
  for (uint32_t id = block_first_edge_[slot]; id < block_first_edge_[slot + 1]; ++id) {
    const Edge& e = edges_[id];
    if (e.kind == Edge::Kind::kBranch && e.target == to_block) return id;
  }
  throw std::out_of_range("no such branch edge");
}

EdgeId EdgeMap::CallEdge(uint32_t fn, uint32_t block, uint32_t call_index) const {
  return block_first_edge_[block_base_[fn] + block] + 2 * call_index;
}

EdgeId EdgeMap::ReturnEdge(uint32_t fn, uint32_t block, uint32_t call_index) const {
  return CallEdge(fn, block, call_index) + 1;
}

std::string EdgeMap::Describe(const ir::Program& program, EdgeId id) const {
  const Edge& e = edges_[id];
  const ir::Function& fn = program.functions[e.function];
  switch (e.kind) {
    case Edge::Kind::kBranch:
      return fmt::format("{}:{}->{}", fn.name, fn.blocks[e.block].name,
                         fn.blocks[e.target].name);
    case Edge::Kind::kCall:
      return fmt::format("{}:{}#{}->{}", fn.name, fn.blocks[e.block].name, e.call_index,
                         program.functions[e.target].name);
    case Edge::Kind::kReturn:
      return fmt::format("{}->{}:{}#{}", program.functions[e.target].name, fn.name,
                         fn.blocks[e.block].name, e.call_index);
  }
  return "?";
}

std::vector<EdgeId> EdgesOf(const ir::Program& program) {
  std::vector<EdgeId> ids(EdgeMap(program).size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

}  // namespace sbxforge
