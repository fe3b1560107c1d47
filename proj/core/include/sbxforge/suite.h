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


// The shipped target suite: benign seed programs plus seeded-bug programs,
// each with a frozen minimal trigger.
#ifndef SBXFORGE_SUITE_H_
#define SBXFORGE_SUITE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sbxforge/crash_report.h"
#include "sbxforge/executor.h"
#include "sbxforge/ir.h"

namespace sbxforge {

enum class BugClass : uint8_t {
  kDoubleFetch,
  kTableIndex,
  kUnknownEnum,
  kIntOverflowAlloc,
  kReadShadowedWrite,
  kLengthDoubleFetch,
};

std::string_view BugClassName(BugClass cls);
std::optional<BugClass> BugClassFromName(std::string_view name);

struct SeededBug {
  BugClass bug_class = BugClass::kDoubleFetch;
  CrashKind kind = CrashKind::kOobWrite;
  std::string site;  // fn:block:idx
  uint64_t trigger_offset = 0;
  std::vector<uint8_t> trigger_bytes;

  // trigger_offset zero bytes followed by trigger_bytes.
  std::vector<uint8_t> TriggerMask() const;
};

struct SuiteEntry {
  std::string id;
  std::filesystem::path path;
  std::string text;
  ir::Program program;
  std::optional<SeededBug> bug;
};

struct Suite {
  std::vector<SuiteEntry> entries;  // sorted by id

  const SuiteEntry* Find(std::string_view id) const;
  std::vector<const SuiteEntry*> bugs() const;
  std::vector<const SuiteEntry*> benign() const;
  std::vector<ir::Program> programs() const;
};

// Loads every .sir file under `dir` and the seeded bugs listed in
// dir/manifest.txt ("id class kind site trigger-file" per line). Throws
// LoadError, ir::ParseError or ir::ValidateError.
Suite BuildSuite(const std::filesystem::path& dir);

class TriggerRegression : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TriggerCheck {
  std::string id;
  bool ok = false;
  std::string detail;
};

struct TriggerReport {
  std::vector<TriggerCheck> checks;
  bool ok() const;
  std::string Format() const;
};

// Default-context execution of `mask` against an entry (pruned
// instrumentation, fork point on).
ExecOutcome RunEntry(const SuiteEntry& entry, std::span<const uint8_t> mask,
                     const ExecContext& context = {});

// Every entry must finish with a zero mask; every seeded bug must crash with
// its expected (kind, site) under its trigger. Throws TriggerRegression
// carrying the formatted report when anything mismatches.
TriggerReport VerifyTriggers(const Suite& suite, const ExecContext& context = {});

}  // namespace sbxforge

#endif  // SBXFORGE_SUITE_H_
