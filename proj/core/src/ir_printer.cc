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


#include <string>

#include <fmt/format.h>

#include "sbxforge/ir.h"

namespace sbxforge::ir {
namespace {

std::string R(Reg r) { return fmt::format("r{}", r); }

std::string Imm(uint64_t value) {
  if (value < (uint64_t{1} << 32)) return fmt::format("{}", value);
  return fmt::format("0x{:x}", value);
}

}  // namespace

std::string PrintInstr(const Instr& instr) {
  std::string_view name = OpcodeName(instr.op);
  const auto& ops = instr.operands;
  switch (instr.op) {
    case Opcode::kConst:
      return fmt::format("{} {}, {}", name, R(*instr.dst), Imm(instr.imm));
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kMul:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr:
      return fmt::format("{} {}, {}, {}", name, R(*instr.dst), R(ops[0]), R(ops[1]));
    case Opcode::kCmp:
      return fmt::format("{} {}, {}, {}, {}", name, R(*instr.dst), R(ops[0]), R(ops[1]),
                         CmpPredName(instr.pred));
    case Opcode::kAlloca:
    case Opcode::kGlobalAddr:
      return fmt::format("{} {}, {}", name, R(*instr.dst), instr.symbol);
    case Opcode::kHeapAlloc:
    case Opcode::kCageAlloc:
    case Opcode::kTableGet:
      return fmt::format("{} {}, {}", name, R(*instr.dst), R(ops[0]));
    case Opcode::kLoad:
      return fmt::format("{} {}, {}, {}", name, R(*instr.dst), R(ops[0]), instr.width);
    case Opcode::kStore:
      return fmt::format("{} {}, {}, {}", name, R(ops[0]), R(ops[1]), instr.width);
    case Opcode::kMemCopy:
      return fmt::format("{} {}, {}, {}", name, R(ops[0]), R(ops[1]), R(ops[2]));
    case Opcode::kTablePut:
      return fmt::format("{} {}, {}", name, R(ops[0]), R(ops[1]));
    case Opcode::kFree:
      return fmt::format("{} {}", name, R(ops[0]));
    case Opcode::kSwitch: {
      std::string text = fmt::format("{} {}, [", name, R(ops[0]));
      for (size_t i = 0; i < instr.case_values.size(); ++i) {
        if (i) text += ", ";
        text += fmt::format("{}: {}", Imm(instr.case_values[i]), instr.targets[i]);
      }
      text += "]";
      if (instr.default_target) text += fmt::format(", default {}", *instr.default_target);
      return text;
    }
    case Opcode::kBr:
      return fmt::format("{} {}", name, instr.targets[0]);
    case Opcode::kBrIf:
      return fmt::format("{} {}, {}, {}", name, R(ops[0]), instr.targets[0], instr.targets[1]);
    case Opcode::kCall: {
      std::string text(name);
      text += ' ';
      if (instr.dst) text += R(*instr.dst) + ", ";
      text += instr.symbol;
      for (Reg r : ops) text += ", " + R(r);
      return text;
    }
    case Opcode::kRet:
      return ops.empty() ? std::string(name) : fmt::format("{} {}", name, R(ops[0]));
    case Opcode::kFuzzStart:
    case Opcode::kHalt:
      return std::string(name);
    case Opcode::kHook:
      return fmt::format("{} {}, {}, {}", name, instr.imm, R(ops[0]), instr.width);
  }
  return "?";
}

std::string PrintProgram(const Program& program) {
  std::string out = fmt::format("entry {}\n", program.entry);
  for (const GlobalDecl& global : program.globals) {
    out += fmt::format("global {} [{}]\n", global.name, fmt::join(global.init, ", "));
  }
  for (const Function& fn : program.functions) {
    out += '\n';
    if (fn.params == 0) {
      out += fmt::format("fn {}() {{\n", fn.name);
    } else {
      out += fmt::format("fn {}(params={}) {{\n", fn.name, fn.params);
    }
    if (!fn.frame.empty()) {
      out += "  frame {";
      for (const StackSlot& slot : fn.frame) out += fmt::format(" {}: {}", slot.name, slot.size);
      out += " }\n";
    }
    for (const BasicBlock& block : fn.blocks) {
      out += fmt::format("{}:\n", block.name);
      for (const Instr& instr : block.instrs) out += fmt::format("  {}\n", PrintInstr(instr));
    }
    out += "}\n";
  }
  return out;
}

}  // namespace sbxforge::ir
