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


#include "sbxforge/ir.h"

#include <algorithm>
#include <array>
#include <utility>

#include <fmt/format.h>

namespace sbxforge::ir {
namespace {

constexpr std::array<std::pair<Opcode, std::string_view>, 28> kOpcodeNames = {{
    {Opcode::kConst, "const"},
    {Opcode::kAdd, "add"},
    {Opcode::kSub, "sub"},
    {Opcode::kMul, "mul"},
    {Opcode::kAnd, "and"},
    {Opcode::kOr, "or"},
    {Opcode::kXor, "xor"},
    {Opcode::kShl, "shl"},
    {Opcode::kShr, "shr"},
    {Opcode::kCmp, "cmp"},
    {Opcode::kAlloca, "alloca"},
    {Opcode::kGlobalAddr, "global_addr"},
    {Opcode::kHeapAlloc, "heap_alloc"},
    {Opcode::kCageAlloc, "cage_alloc"},
    {Opcode::kLoad, "load"},
    {Opcode::kStore, "store"},
    {Opcode::kMemCopy, "memcopy"},
    {Opcode::kTablePut, "table_put"},
    {Opcode::kTableGet, "table_get"},
    {Opcode::kFree, "free"},
    {Opcode::kSwitch, "switch"},
    {Opcode::kBr, "br"},
    {Opcode::kBrIf, "br_if"},
    {Opcode::kCall, "call"},
    {Opcode::kRet, "ret"},
    {Opcode::kFuzzStart, "fuzz_start"},
    {Opcode::kHalt, "halt"},
    {Opcode::kHook, "hook"},
}};

constexpr std::array<std::pair<CmpPred, std::string_view>, 6> kPredNames = {{
    {CmpPred::kEq, "eq"},
    {CmpPred::kNe, "ne"},
    {CmpPred::kUlt, "ult"},
    {CmpPred::kUle, "ule"},
    {CmpPred::kSlt, "slt"},
    {CmpPred::kSle, "sle"},
}};

}  // namespace

std::string_view OpcodeName(Opcode op) {
  for (const auto& [code, name] : kOpcodeNames) {
    if (code == op) return name;
  }
  return "?";
}

std::optional<Opcode> OpcodeFromName(std::string_view name) {
  for (const auto& [code, text] : kOpcodeNames) {
    if (text == name) return code;
  }
  return std::nullopt;
}

std::string_view CmpPredName(CmpPred pred) {
  for (const auto& [code, name] : kPredNames) {
    if (code == pred) return name;
  }
  return "?";
}

std::optional<CmpPred> CmpPredFromName(std::string_view name) {
  for (const auto& [code, text] : kPredNames) {
    if (text == name) return code;
  }
  return std::nullopt;
}

bool IsTerminator(Opcode op) {
  switch (op) {
    case Opcode::kSwitch:
    case Opcode::kBr:
    case Opcode::kBrIf:
    case Opcode::kRet:
    case Opcode::kHalt:
      return true;
    default:
      return false;
  }
}

bool IsBinaryOp(Opcode op) {
  switch (op) {
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kMul:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr:
      return true;
    default:
      return false;
  }
}

bool IsLegalWidth(uint64_t width) {
  return width == 1 || width == 2 || width == 4 || width == 8;
}

const BasicBlock* Function::FindBlock(std::string_view block_name) const {
  int index = BlockIndex(block_name);
  return index < 0 ? nullptr : &blocks[index];
}

int Function::BlockIndex(std::string_view block_name) const {
  for (size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].name == block_name) return static_cast<int>(i);
  }
  return -1;
}

int Function::SlotIndex(std::string_view slot_name) const {
  for (size_t i = 0; i < frame.size(); ++i) {
    if (frame[i].name == slot_name) return static_cast<int>(i);
  }
  return -1;
}

uint32_t Function::RegisterCount() const {
  uint32_t count = params;
  for (const BasicBlock& block : blocks) {
    for (const Instr& instr : block.instrs) {
      if (instr.dst) count = std::max(count, *instr.dst + 1);
      for (Reg r : instr.operands) count = std::max(count, r + 1);
    }
  }
  return count;
}

const Function* Program::FindFunction(std::string_view name) const {
  int index = FunctionIndex(name);
  return index < 0 ? nullptr : &functions[index];
}

int Program::FunctionIndex(std::string_view name) const {
  for (size_t i = 0; i < functions.size(); ++i) {
    if (functions[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Program::GlobalIndex(std::string_view name) const {
  for (size_t i = 0; i < globals.size(); ++i) {
    if (globals[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

ParseError::ParseError(int line, int col, const std::string& message)
    : std::runtime_error(fmt::format("{}:{}: {}", line, col, message)),
      line_(line),
      col_(col),
      message_(message) {}

}  // namespace sbxforge::ir
