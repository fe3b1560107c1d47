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


#ifndef SBXFORGE_CRASH_REPORT_H_
#define SBXFORGE_CRASH_REPORT_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sbxforge {

enum class CrashKind : uint8_t { kOobWrite, kUafWrite, kUndefinedSwitch, kTableIndexOob };

std::string_view CrashKindName(CrashKind kind);
std::optional<CrashKind> CrashKindFromName(std::string_view name);

// A sandbox-escape finding. Memory kinds carry the first offending
// trusted-domain address and the access width.
struct CrashReport {
  CrashKind kind = CrashKind::kOobWrite;
  std::string function;
  std::string block;
  uint32_t instr = 0;
  uint64_t address = 0;
  uint32_t width = 0;
  uint64_t mask_prefix = 0;  // mask bytes consumed when the crash happened
  std::string seed_id;

  // (kind, site) is the deduplication key.
  std::string DedupKey() const;
  std::string Site() const;
  bool SameFinding(const CrashReport& other) const {
    return kind == other.kind && function == other.function && block == other.block &&
           instr == other.instr && address == other.address;
  }

  friend bool operator==(const CrashReport&, const CrashReport&) = default;
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// key=value lines in fixed order: kind, site, address, width, mask_prefix,
// seed.
std::string SerializeCrashReport(const CrashReport& report);
// Parses the fields written by SerializeCrashReport; unknown keys are
// ignored. Throws LoadError on missing or malformed fields.
CrashReport ParseCrashReport(std::string_view text);

}  // namespace sbxforge

#endif  // SBXFORGE_CRASH_REPORT_H_
