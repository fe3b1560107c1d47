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


#include <cctype>
#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "sbxforge/ir.h"

namespace sbxforge::ir {
namespace {

enum class TokenKind { kIdent, kNumber, kPunct, kEnd };

struct Token {
  TokenKind kind = TokenKind::kEnd;
  std::string text;
  uint64_t number = 0;
  int line = 0;
  int col = 0;
};

bool IsIdentStart(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

std::vector<Token> Tokenize(std::string_view text) {
  std::vector<Token> tokens;
  int line = 1;
  int col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == ';') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token tok;
    tok.line = line;
    tok.col = col;
    if (IsIdentStart(c)) {
      size_t start = i;
      while (i < text.size() && IsIdentChar(text[i])) advance(1);
      tok.kind = TokenKind::kIdent;
      tok.text = std::string(text.substr(start, i - start));
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
      size_t start = i;
      bool negative = false;
      if (c == '-') {
        negative = true;
        advance(1);
        if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) {
          throw ParseError(tok.line, tok.col, "expected digits after '-'");
        }
      }
      int base = 10;
      size_t digits_start = i;
      if (text[i] == '0' && i + 1 < text.size() &&
          (text[i + 1] == 'x' || text[i + 1] == 'X')) {
        base = 16;
        advance(2);
        digits_start = i;
      }
      while (i < text.size() && (std::isxdigit(static_cast<unsigned char>(text[i])) ||
                                 text[i] == '_')) {
        advance(1);
      }
      std::string digits;
      for (char d : text.substr(digits_start, i - digits_start)) {
        if (d != '_') digits.push_back(d);
      }
      uint64_t value = 0;
      auto [ptr, ec] =
          std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
      if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
        throw ParseError(tok.line, tok.col,
                         fmt::format("malformed number '{}'", text.substr(start, i - start)));
      }
      tok.kind = TokenKind::kNumber;
      tok.number = negative ? (~value + 1) : value;
      tok.text = std::string(text.substr(start, i - start));
    } else if (std::string_view("{}()[],:=").find(c) != std::string_view::npos) {
      tok.kind = TokenKind::kPunct;
      tok.text = std::string(1, c);
      advance(1);
    } else {
      throw ParseError(line, col, fmt::format("unexpected character '{}'", c));
    }
    tokens.push_back(std::move(tok));
  }
  Token end;
  end.kind = TokenKind::kEnd;
  end.line = line;
  end.col = col;
  tokens.push_back(end);
  return tokens;
}

std::optional<Reg> RegisterNumber(const Token& tok) {
  if (tok.kind != TokenKind::kIdent || tok.text.size() < 2 || tok.text[0] != 'r') {
    return std::nullopt;
  }
  Reg value = 0;
  auto [ptr, ec] = std::from_chars(tok.text.data() + 1, tok.text.data() + tok.text.size(), value);
  if (ec != std::errc() || ptr != tok.text.data() + tok.text.size()) return std::nullopt;
  return value;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(Tokenize(text)) {}

  Program Parse() {
    Program program;
    bool saw_entry = false;
    while (Peek().kind != TokenKind::kEnd) {
      const Token& tok = Peek();
      if (IsKeyword(tok, "entry")) {
        Next();
        if (saw_entry) Fail(tok, "duplicate entry directive");
        program.entry = ExpectIdent("entry function name");
        saw_entry = true;
      } else if (IsKeyword(tok, "global")) {
        program.globals.push_back(ParseGlobal());
      } else if (IsKeyword(tok, "fn")) {
        program.functions.push_back(ParseFunction());
      } else {
        Fail(tok, fmt::format("expected 'fn', 'global' or 'entry', got '{}'", tok.text));
      }
    }
    return program;
  }

 private:
  const Token& Peek(size_t ahead = 0) const {
    size_t index = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[index];
  }
  const Token& Next() {
    const Token& tok = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return tok;
  }

  [[noreturn]] void Fail(const Token& tok, const std::string& message) const {
    throw ParseError(tok.line, tok.col, message);
  }

  static bool IsKeyword(const Token& tok, std::string_view word) {
    return tok.kind == TokenKind::kIdent && tok.text == word;
  }
  static bool IsPunct(const Token& tok, char c) {
    return tok.kind == TokenKind::kPunct && tok.text[0] == c;
  }

  void Expect(char c) {
    const Token& tok = Next();
    if (!IsPunct(tok, c)) {
      Fail(tok, fmt::format("expected '{}', got '{}'", c, tok.text));
    }
  }
  bool Accept(char c) {
    if (IsPunct(Peek(), c)) {
      Next();
      return true;
    }
    return false;
  }
  std::string ExpectIdent(std::string_view what) {
    const Token& tok = Next();
    if (tok.kind != TokenKind::kIdent) {
      Fail(tok, fmt::format("expected {}, got '{}'", what, tok.text));
    }
    return tok.text;
  }
  uint64_t ExpectNumber(std::string_view what) {
    const Token& tok = Next();
    if (tok.kind != TokenKind::kNumber) {
      Fail(tok, fmt::format("expected {}, got '{}'", what, tok.text));
    }
    return tok.number;
  }
  Reg ExpectReg() {
    const Token& tok = Next();
    std::optional<Reg> reg = RegisterNumber(tok);
    if (!reg) Fail(tok, fmt::format("expected register, got '{}'", tok.text));
    return *reg;
  }
  uint8_t ExpectWidth() {
    uint64_t width = ExpectNumber("access width");
    if (!IsLegalWidth(width)) {
      throw ValidateError(fmt::format("illegal width {}", width));
    }
    return static_cast<uint8_t>(width);
  }

  GlobalDecl ParseGlobal() {
    Next();  // global
    GlobalDecl global;
    global.name = ExpectIdent("global name");
    Expect('[');
    if (!Accept(']')) {
      do {
        const Token& tok = Peek();
        uint64_t byte = ExpectNumber("byte value");
        if (byte > 0xff) Fail(tok, "global initializer byte out of range");
        global.init.push_back(static_cast<uint8_t>(byte));
      } while (Accept(','));
      Expect(']');
    }
    return global;
  }

  Function ParseFunction() {
    Next();  // fn
    Function fn;
    fn.name = ExpectIdent("function name");
    Expect('(');
    if (!Accept(')')) {
      const Token& tok = Peek();
      if (!IsKeyword(tok, "params")) Fail(tok, "expected 'params=N'");
      Next();
      Expect('=');
      fn.params = static_cast<uint32_t>(ExpectNumber("parameter count"));
      Expect(')');
    }
    Expect('{');
    if (IsKeyword(Peek(), "frame") && IsPunct(Peek(1), '{')) {
      Next();
      Next();
      while (!Accept('}')) {
        StackSlot slot;
        slot.name = ExpectIdent("slot name");
        Expect(':');
        slot.size = ExpectNumber("slot size");
        fn.frame.push_back(std::move(slot));
      }
    }
    while (!Accept('}')) {
      const Token& label = Peek();
      if (label.kind != TokenKind::kIdent || !IsPunct(Peek(1), ':')) {
        Fail(label, fmt::format("expected block label, got '{}'", label.text));
      }
      Next();
      Next();
      BasicBlock block;
      block.name = label.text;
      while (!AtBlockEnd()) block.instrs.push_back(ParseInstr());
      fn.blocks.push_back(std::move(block));
    }
    if (fn.blocks.empty()) {
      // Empty body: canonical single block that returns.
      BasicBlock block;
      block.name = "b0";
      Instr ret;
      ret.op = Opcode::kRet;
      block.instrs.push_back(ret);
      fn.blocks.push_back(std::move(block));
    }
    return fn;
  }

  bool AtBlockEnd() const {
    const Token& tok = Peek();
    if (tok.kind == TokenKind::kEnd || IsPunct(tok, '}')) return true;
    return tok.kind == TokenKind::kIdent && IsPunct(Peek(1), ':');
  }

  Instr ParseInstr() {
    const Token& tok = Next();
    if (tok.kind != TokenKind::kIdent) {
      Fail(tok, fmt::format("expected instruction, got '{}'", tok.text));
    }
    std::optional<Opcode> op = OpcodeFromName(tok.text);
    if (!op) Fail(tok, fmt::format("unknown instruction '{}'", tok.text));
    Instr instr;
    instr.op = *op;
    switch (*op) {
      case Opcode::kConst:
        instr.dst = ExpectReg();
        Expect(',');
        instr.imm = ExpectNumber("immediate");
        break;
      case Opcode::kAdd:
      case Opcode::kSub:
      case Opcode::kMul:
      case Opcode::kAnd:
      case Opcode::kOr:
      case Opcode::kXor:
      case Opcode::kShl:
      case Opcode::kShr:
        instr.dst = ExpectReg();
        Expect(',');
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.operands.push_back(ExpectReg());
        break;
      case Opcode::kCmp: {
        instr.dst = ExpectReg();
        Expect(',');
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.operands.push_back(ExpectReg());
        Expect(',');
        const Token& pred_tok = Peek();
        std::optional<CmpPred> pred = CmpPredFromName(ExpectIdent("predicate"));
        if (!pred) Fail(pred_tok, fmt::format("unknown predicate '{}'", pred_tok.text));
        instr.pred = *pred;
        break;
      }
      case Opcode::kAlloca:
      case Opcode::kGlobalAddr:
        instr.dst = ExpectReg();
        Expect(',');
        instr.symbol = ExpectIdent(*op == Opcode::kAlloca ? "slot name" : "global name");
        break;
      case Opcode::kHeapAlloc:
      case Opcode::kCageAlloc:
      case Opcode::kTableGet:
        instr.dst = ExpectReg();
        Expect(',');
        instr.operands.push_back(ExpectReg());
        break;
      case Opcode::kLoad:
        instr.dst = ExpectReg();
        Expect(',');
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.width = ExpectWidth();
        break;
      case Opcode::kStore:
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.width = ExpectWidth();
        break;
      case Opcode::kMemCopy:
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.operands.push_back(ExpectReg());
        break;
      case Opcode::kTablePut:
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.operands.push_back(ExpectReg());
        break;
      case Opcode::kFree:
        instr.operands.push_back(ExpectReg());
        break;
      case Opcode::kSwitch:
        instr.operands.push_back(ExpectReg());
        Expect(',');
        Expect('[');
        if (!Accept(']')) {
          do {
            instr.case_values.push_back(ExpectNumber("case value"));
            Expect(':');
            instr.targets.push_back(ExpectIdent("case block"));
          } while (Accept(','));
          Expect(']');
        }
        if (Accept(',')) {
          const Token& kw = Next();
          if (!IsKeyword(kw, "default")) Fail(kw, "expected 'default'");
          instr.default_target = ExpectIdent("default block");
        }
        break;
      case Opcode::kBr:
        instr.targets.push_back(ExpectIdent("branch target"));
        break;
      case Opcode::kBrIf:
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.targets.push_back(ExpectIdent("true target"));
        Expect(',');
        instr.targets.push_back(ExpectIdent("false target"));
        break;
      case Opcode::kCall:
        if (RegisterNumber(Peek())) {
          instr.dst = ExpectReg();
          Expect(',');
        }
        instr.symbol = ExpectIdent("callee name");
        while (Accept(',')) instr.operands.push_back(ExpectReg());
        break;
      case Opcode::kRet:
        if (RegisterNumber(Peek()) && !IsPunct(Peek(1), ':')) {
          instr.operands.push_back(ExpectReg());
        }
        break;
      case Opcode::kFuzzStart:
      case Opcode::kHalt:
        break;
      case Opcode::kHook:
        instr.imm = ExpectNumber("site id");
        Expect(',');
        instr.operands.push_back(ExpectReg());
        Expect(',');
        instr.width = ExpectWidth();
        break;
    }
    return instr;
  }

  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

}  // namespace

Program ParseProgram(std::string_view text) {
  Program program = Parser(text).Parse();
  Validate(program);
  return program;
}

}  // namespace sbxforge::ir
