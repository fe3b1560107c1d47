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


#include "sbxforge/instrument.h"

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <utility>

#include <fmt/format.h>

namespace sbxforge {
namespace {

using ir::Opcode;

// A definition is either an instruction (block, index) or the implicit
// definition of a parameter register on function entry (block == kParamDef).
struct Def {
  static constexpr uint32_t kParamDef = UINT32_MAX;
  uint32_t block;
  uint32_t index;
  ir::Reg reg;

  friend auto operator<=>(const Def&, const Def&) = default;
};

// Classic reaching-definitions over one function.
class ReachingDefs {
 public:
  explicit ReachingDefs(const ir::Function& fn) : fn_(fn) {
    for (uint32_t r = 0; r < fn.params; ++r) defs_.push_back({Def::kParamDef, 0, r});
    for (uint32_t b = 0; b < fn.blocks.size(); ++b) {
      const auto& instrs = fn.blocks[b].instrs;
      for (uint32_t i = 0; i < instrs.size(); ++i) {
        if (instrs[i].dst) defs_.push_back({b, i, *instrs[i].dst});
      }
    }
    const size_t nblocks = fn.blocks.size();
    const size_t ndefs = defs_.size();
    std::vector<std::vector<int>> preds(nblocks);
    for (size_t b = 0; b < nblocks; ++b) {
      const ir::Instr& term = fn.blocks[b].instrs.back();
      std::vector<std::string> succ = term.targets;
      if (term.default_target) succ.push_back(*term.default_target);
      for (const auto& s : succ) preds[fn.BlockIndex(s)].push_back(static_cast<int>(b));
    }
    in_.assign(nblocks, std::vector<char>(ndefs, 0));
    std::vector<std::vector<char>> out(nblocks, std::vector<char>(ndefs, 0));
    auto transfer = [&](size_t b, const std::vector<char>& in) {
      std::vector<char> cur = in;
      for (size_t d = 0; d < ndefs; ++d) {
        if (defs_[d].block == b) {
          for (size_t k = 0; k < ndefs; ++k) {
            if (defs_[k].reg == defs_[d].reg) cur[k] = 0;
          }
        }
      }
      // Only the last definition of each register in the block survives.
      for (size_t d = 0; d < ndefs; ++d) {
        if (defs_[d].block != b) continue;
        bool last = true;
        for (size_t k = 0; k < ndefs; ++k) {
          if (defs_[k].block == b && defs_[k].reg == defs_[d].reg &&
              defs_[k].index > defs_[d].index) {
            last = false;
          }
        }
        if (last) cur[d] = 1;
      }
      return cur;
    };
    bool changed = true;
    while (changed) {
      changed = false;
      for (size_t b = 0; b < nblocks; ++b) {
        std::vector<char> in(ndefs, 0);
        if (b == 0) {
          for (size_t d = 0; d < ndefs; ++d) in[d] = defs_[d].block == Def::kParamDef;
        }
        for (int p : preds[b]) {
          for (size_t d = 0; d < ndefs; ++d) in[d] |= out[p][d];
        }
        std::vector<char> new_out = transfer(b, in);
        if (in != in_[b] || new_out != out[b]) {
          in_[b] = std::move(in);
          out[b] = std::move(new_out);
          changed = true;
        }
      }
    }
  }

  // Definitions of `reg` reaching the point just before (block, index).
  std::vector<Def> Reaching(uint32_t block, uint32_t index, ir::Reg reg) const {
    const auto& instrs = fn_.blocks[block].instrs;
    for (uint32_t i = index; i-- > 0;) {
      if (instrs[i].dst == reg) return {{block, i, reg}};
    }
    std::vector<Def> result;
    for (size_t d = 0; d < defs_.size(); ++d) {
      if (in_[block][d] && defs_[d].reg == reg) result.push_back(defs_[d]);
    }
    return result;
  }

 private:
  const ir::Function& fn_;
  std::vector<Def> defs_;
  std::vector<std::vector<char>> in_;
};

bool AllConstant(const ir::Function& fn, const std::vector<Def>& defs) {
  if (defs.empty()) return false;
  for (const Def& d : defs) {
    if (d.block == Def::kParamDef) return false;
    if (fn.blocks[d.block].instrs[d.index].op != Opcode::kConst) return false;
  }
  return true;
}

LoadClass ClassifyOne(const ir::Function& fn, const ReachingDefs& rd, InstrSite site) {
  const ir::Instr& load = fn.blocks[site.block].instrs[site.index];
  LoadClass result{site, LoadClassKind::kInteresting, LoadReason::kUnproven};

  // Breadth-first walk over the definitions the address may come from.
  std::set<Def> visited;
  std::deque<std::pair<Def, int>> queue;
  for (const Def& d : rd.Reaching(site.block, site.index, load.operands[0])) {
    queue.emplace_back(d, 0);
  }
  std::optional<LoadReason> first_reason;
  while (!queue.empty()) {
    auto [def, depth] = queue.front();
    queue.pop_front();
    if (!visited.insert(def).second) continue;
    if (depth > kMaxProvenanceDepth) return result;
    if (def.block == Def::kParamDef) return result;
    const ir::Instr& instr = fn.blocks[def.block].instrs[def.index];
    switch (instr.op) {
      case Opcode::kAlloca:
        if (!first_reason) first_reason = LoadReason::kProvenStack;
        break;
      case Opcode::kGlobalAddr:
        if (!first_reason) first_reason = LoadReason::kProvenGlobal;
        break;
      case Opcode::kHeapAlloc:
        if (!first_reason) first_reason = LoadReason::kProvenTrustedHeap;
        break;
      case Opcode::kAdd:
      case Opcode::kSub: {
        auto lhs = rd.Reaching(def.block, def.index, instr.operands[0]);
        auto rhs = rd.Reaching(def.block, def.index, instr.operands[1]);
        const std::vector<Def>* base = nullptr;
        if (AllConstant(fn, rhs)) {
          base = &lhs;
        } else if (instr.op == Opcode::kAdd && AllConstant(fn, lhs)) {
          base = &rhs;
        }
        if (!base) return result;  // variable offset
        for (const Def& d : *base) queue.emplace_back(d, depth + 1);
        break;
      }
      default:
        // cage_alloc, table_get (the table is trusted, but the reference it
        // yields may point into the cage), load, call results, constants
        // used as absolute addresses and any other arithmetic.
        return result;
    }
  }
  if (!first_reason) return result;
  result.kind = LoadClassKind::kUninteresting;
  result.reason = *first_reason;
  return result;
}

}  // namespace

std::string_view LoadReasonName(LoadReason reason) {
  switch (reason) {
    case LoadReason::kProvenStack:
      return "ProvenStack";
    case LoadReason::kProvenGlobal:
      return "ProvenGlobal";
    case LoadReason::kProvenTrustedHeap:
      return "ProvenTrustedHeap";
    case LoadReason::kUnproven:
      return "Unproven";
  }
  return "?";
}

std::vector<LoadClass> ClassifyLoads(const ir::Program& program) {
  std::vector<LoadClass> classes;
  for (uint32_t f = 0; f < program.functions.size(); ++f) {
    const ir::Function& fn = program.functions[f];
    std::optional<ReachingDefs> rd;
    for (uint32_t b = 0; b < fn.blocks.size(); ++b) {
      const auto& instrs = fn.blocks[b].instrs;
      for (uint32_t i = 0; i < instrs.size(); ++i) {
        if (instrs[i].op != Opcode::kLoad) continue;
        if (!rd) rd.emplace(fn);
        classes.push_back(ClassifyOne(fn, *rd, {f, b, i}));
      }
    }
  }
  return classes;
}

InstrumentedProgram Instrument(const ir::Program& program, bool prune) {
  for (const ir::Function& fn : program.functions) {
    for (const ir::BasicBlock& block : fn.blocks) {
      for (const ir::Instr& instr : block.instrs) {
        if (instr.op == Opcode::kHook) {
          throw ir::ValidateError(fmt::format("{}: program is already instrumented", fn.name));
        }
      }
    }
  }
  InstrumentedProgram out;
  out.classes = ClassifyLoads(program);
  out.program = program;
  size_t next_class = 0;
  for (uint32_t f = 0; f < program.functions.size(); ++f) {
    const ir::Function& src_fn = program.functions[f];
    ir::Function& dst_fn = out.program.functions[f];
    for (uint32_t b = 0; b < src_fn.blocks.size(); ++b) {
      const auto& src = src_fn.blocks[b].instrs;
      std::vector<ir::Instr> rewritten;
      rewritten.reserve(src.size());
      for (uint32_t i = 0; i < src.size(); ++i) {
        const ir::Instr& instr = src[i];
        if (instr.op == Opcode::kLoad) {
          const LoadClass& cls = out.classes[next_class++];
          ++out.stats.total;
          if (prune && cls.kind == LoadClassKind::kUninteresting) {
            ++out.stats.pruned;
          } else {
            ++out.stats.instrumented;
            ir::Instr hook;
            hook.op = Opcode::kHook;
            hook.imm = out.site_table.size();
            hook.operands = {instr.operands[0]};
            hook.width = instr.width;
            rewritten.push_back(std::move(hook));
            out.site_table.push_back({{f, b, i}, instr.width});
          }
        }
        rewritten.push_back(instr);
      }
      dst_fn.blocks[b].instrs = std::move(rewritten);
    }
  }
  return out;
}

InstrumentedProgram AdoptInstrumented(const ir::Program& program) {
  InstrumentedProgram out;
  out.program = program;
  ir::Program original = program;
  std::vector<std::pair<uint64_t, HookSite>> hooks;
  for (uint32_t f = 0; f < program.functions.size(); ++f) {
    for (uint32_t b = 0; b < program.functions[f].blocks.size(); ++b) {
      const auto& instrs = program.functions[f].blocks[b].instrs;
      std::vector<ir::Instr> stripped;
      for (uint32_t i = 0; i < instrs.size(); ++i) {
        const ir::Instr& instr = instrs[i];
        if (instr.op == Opcode::kHook) {
          if (i + 1 >= instrs.size() || instrs[i + 1].op != Opcode::kLoad) {
            throw ir::ValidateError(fmt::format("hook {} does not precede a load", instr.imm));
          }
          hooks.push_back({instr.imm, {{f, b, static_cast<uint32_t>(stripped.size())}, instr.width}});
          continue;
        }
        stripped.push_back(instr);
      }
      original.functions[f].blocks[b].instrs = std::move(stripped);
    }
  }
  std::sort(hooks.begin(), hooks.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  for (size_t i = 0; i < hooks.size(); ++i) {
    if (hooks[i].first != i) throw ir::ValidateError("hook site ids are not dense");
    out.site_table.push_back(hooks[i].second);
  }
  out.classes = ClassifyLoads(original);
  out.stats.total = out.classes.size();
  out.stats.instrumented = hooks.size();
  out.stats.pruned = out.stats.total - out.stats.instrumented;
  return out;
}

InstrumentedProgram Uninstrumented(const ir::Program& program) {
  InstrumentedProgram out;
  out.program = program;
  out.classes = ClassifyLoads(program);
  out.stats.total = out.classes.size();
  out.stats.pruned = out.stats.total;
  return out;
}

std::string FormatStats(const InstrumentedProgram& instrumented) {
  std::string text = fmt::format("{} {} {}\n", instrumented.stats.total,
                                 instrumented.stats.pruned, instrumented.stats.instrumented);
  std::set<InstrSite> hooked;
  for (const HookSite& h : instrumented.site_table) hooked.insert(h.load);
  for (const LoadClass& cls : instrumented.classes) {
    const ir::Function& fn = instrumented.program.functions[cls.site.function];
    text += fmt::format(
        "{}:{}:{} {} {} {}\n", fn.name, fn.blocks[cls.site.block].name, cls.site.index,
        cls.kind == LoadClassKind::kUninteresting ? "uninteresting" : "interesting",
        LoadReasonName(cls.reason), hooked.count(cls.site) ? "hooked" : "pruned");
  }
  return text;
}

}  // namespace sbxforge
