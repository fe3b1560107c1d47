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

// The mini-IR: a register-based representation of "trusted engine routines".
//
// A Program is a list of functions plus global byte arrays. Each function
// owns an unlimited set of virtual 64-bit registers (r0, r1, ...), a list of
// stack slots, and a list of basic blocks. The first `params` registers hold
// the call arguments on entry. Arithmetic is 64-bit and wrapping.
//
// The textual format is described in docs/ir_format.md.
#ifndef SBXFORGE_IR_H_
#define SBXFORGE_IR_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sbxforge::ir {

using Reg = uint32_t;

enum class Opcode : uint8_t {
  kConst,
  kAdd,
  kSub,
  kMul,
  kAnd,
  kOr,
  kXor,
  kShl,
  kShr,
  kCmp,
  kAlloca,
  kGlobalAddr,
  kHeapAlloc,
  kCageAlloc,
  kLoad,
  kStore,
  kMemCopy,
  kTablePut,
  kTableGet,
  kFree,
  kSwitch,
  kBr,
  kBrIf,
  kCall,
  kRet,
  kFuzzStart,
  kHalt,
  // Interceptor hook inserted by the instrumenter: `hook SITE, rADDR, WIDTH`.
  kHook,
};

enum class CmpPred : uint8_t { kEq, kNe, kUlt, kUle, kSlt, kSle };

std::string_view OpcodeName(Opcode op);
std::optional<Opcode> OpcodeFromName(std::string_view name);
std::string_view CmpPredName(CmpPred pred);
std::optional<CmpPred> CmpPredFromName(std::string_view name);

bool IsTerminator(Opcode op);
bool IsBinaryOp(Opcode op);
bool IsLegalWidth(uint64_t width);

// One instruction. Which fields are meaningful depends on `op`:
//
//   const      dst, imm
//   binops     dst, operands = {a, b}
//   cmp        dst, operands = {a, b}, pred
//   alloca     dst, symbol = slot name
//   global_addr dst, symbol = global name
//   heap_alloc / cage_alloc  dst, operands = {size}
//   load       dst, operands = {addr}, width
//   store      operands = {addr, value}, width
//   memcopy    operands = {dst, src, len}
//   table_put  operands = {index, value}
//   table_get  dst, operands = {index}
//   free       operands = {addr}
//   switch     operands = {value}, case_values/targets, default_target
//   br         targets = {block}
//   br_if      operands = {cond}, targets = {true_block, false_block}
//   call       dst (optional), symbol = callee, operands = args
//   ret        operands = {} or {value}
//   hook       imm = site id, operands = {addr}, width
struct Instr {
  Opcode op = Opcode::kHalt;
  std::optional<Reg> dst;
  std::vector<Reg> operands;
  uint64_t imm = 0;
  uint8_t width = 0;
  CmpPred pred = CmpPred::kEq;
  std::string symbol;
  std::vector<std::string> targets;
  std::vector<uint64_t> case_values;
  std::optional<std::string> default_target;

  friend bool operator==(const Instr&, const Instr&) = default;
};

struct BasicBlock {
  std::string name;
  std::vector<Instr> instrs;

  friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct StackSlot {
  std::string name;
  uint64_t size = 0;

  friend bool operator==(const StackSlot&, const StackSlot&) = default;
};

struct Function {
  std::string name;
  uint32_t params = 0;
  std::vector<StackSlot> frame;
  std::vector<BasicBlock> blocks;

  const BasicBlock* FindBlock(std::string_view block_name) const;
  int BlockIndex(std::string_view block_name) const;
  int SlotIndex(std::string_view slot_name) const;
  // One past the highest register mentioned anywhere in the function
  // (at least `params`).
  uint32_t RegisterCount() const;

  friend bool operator==(const Function&, const Function&) = default;
};

struct GlobalDecl {
  std::string name;
  std::vector<uint8_t> init;

  uint64_t size() const { return init.size(); }
  friend bool operator==(const GlobalDecl&, const GlobalDecl&) = default;
};

struct Program {
  std::vector<GlobalDecl> globals;
  std::vector<Function> functions;
  std::string entry = "main";

  const Function* FindFunction(std::string_view name) const;
  int FunctionIndex(std::string_view name) const;
  int GlobalIndex(std::string_view name) const;

  friend bool operator==(const Program&, const Program&) = default;
};

// Syntax error with a 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& message);
  int line() const { return line_; }
  int col() const { return col_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  int col_;
  std::string message_;
};

// Semantic violation found by Validate().
class ValidateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses and validates IR text. Throws ParseError or ValidateError.
Program ParseProgram(std::string_view text);

// Canonical text form; ParseProgram(PrintProgram(p)) == p for valid p.
std::string PrintProgram(const Program& program);
std::string PrintInstr(const Instr& instr);

// Throws ValidateError on the first violated invariant.
void Validate(const Program& program);

}  // namespace sbxforge::ir

#endif  // SBXFORGE_IR_H_
