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


#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sbxforge/ir.h"

namespace sbxforge::ir {
namespace {

[[noreturn]] void Fail(const Function& fn, const BasicBlock& block, size_t index,
                       const std::string& message) {
  throw ValidateError(fmt::format("{}:{}:{}: {}", fn.name, block.name, index, message));
}

std::vector<std::string> Successors(const Instr& term) {
  std::vector<std::string> succ = term.targets;
  if (term.default_target) succ.push_back(*term.default_target);
  return succ;
}

size_t OperandCount(Opcode op) {
  switch (op) {
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kMul:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr:
    case Opcode::kCmp:
    case Opcode::kStore:
    case Opcode::kTablePut:
      return 2;
    case Opcode::kMemCopy:
      return 3;
    case Opcode::kHeapAlloc:
    case Opcode::kCageAlloc:
    case Opcode::kLoad:
    case Opcode::kTableGet:
    case Opcode::kFree:
    case Opcode::kSwitch:
    case Opcode::kBrIf:
    case Opcode::kHook:
      return 1;
    default:
      return 0;
  }
}

enum class DstRule { kRequired, kOptional, kForbidden };

DstRule DestinationRule(Opcode op) {
  if (op == Opcode::kCall) return DstRule::kOptional;
  if (IsBinaryOp(op)) return DstRule::kRequired;
  switch (op) {
    case Opcode::kConst:
    case Opcode::kCmp:
    case Opcode::kAlloca:
    case Opcode::kGlobalAddr:
    case Opcode::kHeapAlloc:
    case Opcode::kCageAlloc:
    case Opcode::kLoad:
    case Opcode::kTableGet:
      return DstRule::kRequired;
    default:
      return DstRule::kForbidden;
  }
}

void CheckInstr(const Program& program, const Function& fn, const BasicBlock& block,
                size_t index, const Instr& instr) {
  if (instr.op == Opcode::kCall) {
    // Arity is the callee's; checked below.
  } else if (instr.op == Opcode::kRet ? instr.operands.size() > 1
                                      : instr.operands.size() != OperandCount(instr.op)) {
    Fail(fn, block, index, "wrong operand count");
  }
  const DstRule rule = DestinationRule(instr.op);
  if (rule == DstRule::kRequired && !instr.dst) {
    Fail(fn, block, index, "missing destination register");
  }
  if (rule == DstRule::kForbidden && instr.dst) {
    Fail(fn, block, index, "unexpected destination register");
  }
  const bool branches =
      instr.op == Opcode::kBr || instr.op == Opcode::kBrIf || instr.op == Opcode::kSwitch;
  if ((!branches && !instr.targets.empty()) ||
      (instr.op != Opcode::kSwitch && instr.default_target)) {
    Fail(fn, block, index, "unexpected branch target");
  }
  switch (instr.op) {
    case Opcode::kLoad:
    case Opcode::kStore:
    case Opcode::kHook:
      if (!IsLegalWidth(instr.width)) {
        Fail(fn, block, index, fmt::format("illegal width {}", instr.width));
      }
      break;
    case Opcode::kAlloca:
      if (fn.SlotIndex(instr.symbol) < 0) {
        Fail(fn, block, index, fmt::format("unknown stack slot '{}'", instr.symbol));
      }
      break;
    case Opcode::kGlobalAddr:
      if (program.GlobalIndex(instr.symbol) < 0) {
        Fail(fn, block, index, fmt::format("unknown global '{}'", instr.symbol));
      }
      break;
    case Opcode::kCall: {
      const Function* callee = program.FindFunction(instr.symbol);
      if (!callee) Fail(fn, block, index, fmt::format("unknown function '{}'", instr.symbol));
      if (callee->params != instr.operands.size()) {
        Fail(fn, block, index,
             fmt::format("call to '{}' passes {} arguments, expected {}", instr.symbol,
                         instr.operands.size(), callee->params));
      }
      break;
    }
    case Opcode::kSwitch: {
      if (instr.case_values.size() != instr.targets.size()) {
        Fail(fn, block, index, "switch case/target mismatch");
      }
      std::set<uint64_t> seen;
      for (uint64_t v : instr.case_values) {
        if (!seen.insert(v).second) {
          Fail(fn, block, index, fmt::format("duplicate switch case {}", v));
        }
      }
      break;
    }
    case Opcode::kBr:
      if (instr.targets.size() != 1) Fail(fn, block, index, "br needs one target");
      break;
    case Opcode::kBrIf:
      if (instr.targets.size() != 2) Fail(fn, block, index, "br_if needs two targets");
      break;
    default:
      break;
  }
  for (const std::string& target : Successors(instr)) {
    if (fn.BlockIndex(target) < 0) {
      Fail(fn, block, index, fmt::format("unknown block '{}'", target));
    }
  }
}

// Forward "definitely assigned" analysis: every register use must be
// preceded by a definition on all paths from the entry block.
void CheckDefinitions(const Function& fn) {
  const uint32_t nregs = fn.RegisterCount();
  const size_t nblocks = fn.blocks.size();
  using Bits = std::vector<char>;
  std::vector<Bits> in(nblocks, Bits(nregs, 1));
  Bits entry(nregs, 0);
  for (uint32_t r = 0; r < fn.params; ++r) entry[r] = 1;
  in[0] = entry;

  std::vector<std::vector<int>> preds(nblocks);
  for (size_t b = 0; b < nblocks; ++b) {
    for (const std::string& target : Successors(fn.blocks[b].instrs.back())) {
      preds[fn.BlockIndex(target)].push_back(static_cast<int>(b));
    }
  }
  auto transfer = [&](size_t b) {
    Bits out = in[b];
    for (const Instr& instr : fn.blocks[b].instrs) {
      if (instr.dst) out[*instr.dst] = 1;
    }
    return out;
  };

  std::vector<Bits> out(nblocks);
  for (size_t b = 0; b < nblocks; ++b) out[b] = transfer(b);
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t b = 1; b < nblocks; ++b) {
      if (preds[b].empty()) continue;
      Bits meet(nregs, 1);
      for (int p : preds[b]) {
        for (uint32_t r = 0; r < nregs; ++r) meet[r] = meet[r] && out[p][r];
      }
      // The entry block may also be a loop header.
      if (meet != in[b]) {
        in[b] = meet;
        out[b] = transfer(b);
        changed = true;
      }
    }
    if (!preds[0].empty()) {
      Bits meet = entry;
      for (int p : preds[0]) {
        for (uint32_t r = 0; r < nregs; ++r) meet[r] = meet[r] && out[p][r];
      }
      if (meet != in[0]) {
        in[0] = meet;
        out[0] = transfer(0);
        changed = true;
      }
    }
  }

  for (size_t b = 0; b < nblocks; ++b) {
    Bits defined = in[b];
    const BasicBlock& block = fn.blocks[b];
    for (size_t i = 0; i < block.instrs.size(); ++i) {
      const Instr& instr = block.instrs[i];
      for (Reg r : instr.operands) {
        if (!defined[r]) {
          Fail(fn, block, i, fmt::format("register r{} used before definition", r));
        }
      }
      if (instr.dst) defined[*instr.dst] = 1;
    }
  }
}

}  // namespace

void Validate(const Program& program) {
  std::set<std::string> names;
  for (const Function& fn : program.functions) {
    if (!names.insert(fn.name).second) {
      throw ValidateError(fmt::format("duplicate function '{}'", fn.name));
    }
  }
  if (!program.FindFunction(program.entry)) {
    throw ValidateError(fmt::format("entry function '{}' not found", program.entry));
  }
  std::set<std::string> global_names;
  for (const GlobalDecl& global : program.globals) {
    if (!global_names.insert(global.name).second) {
      throw ValidateError(fmt::format("duplicate global '{}'", global.name));
    }
    if (global.init.empty()) {
      throw ValidateError(fmt::format("global '{}' has zero size", global.name));
    }
  }

  int fuzz_starts = 0;
  for (const Function& fn : program.functions) {
    if (fn.blocks.empty()) throw ValidateError(fmt::format("function '{}' has no blocks", fn.name));
    std::set<std::string> slot_names;
    for (const StackSlot& slot : fn.frame) {
      if (!slot_names.insert(slot.name).second) {
        throw ValidateError(fmt::format("{}: duplicate stack slot '{}'", fn.name, slot.name));
      }
      if (slot.size == 0) {
        throw ValidateError(fmt::format("{}: stack slot '{}' has zero size", fn.name, slot.name));
      }
    }
    std::set<std::string> block_names;
    for (const BasicBlock& block : fn.blocks) {
      if (!block_names.insert(block.name).second) {
        throw ValidateError(fmt::format("{}: duplicate block '{}'", fn.name, block.name));
      }
      if (block.instrs.empty() || !IsTerminator(block.instrs.back().op)) {
        throw ValidateError(
            fmt::format("{}:{}: block does not end in a terminator", fn.name, block.name));
      }
      for (size_t i = 0; i < block.instrs.size(); ++i) {
        const Instr& instr = block.instrs[i];
        if (IsTerminator(instr.op) && i + 1 != block.instrs.size()) {
          Fail(fn, block, i, "terminator in the middle of a block");
        }
        if (instr.op == Opcode::kFuzzStart && ++fuzz_starts > 1) {
          Fail(fn, block, i, "more than one fuzz_start in program");
        }
        CheckInstr(program, fn, block, i, instr);
      }
    }
    CheckDefinitions(fn);
  }
}

}  // namespace sbxforge::ir
