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


#include "sbxforge/crash_report.h"

#include <charconv>
#include <map>
#include <string>

#include <fmt/format.h>

namespace sbxforge {
namespace {

uint64_t ParseNumber(const std::map<std::string, std::string>& fields, const char* key) {
  auto it = fields.find(key);
  if (it == fields.end()) throw LoadError(fmt::format("crash report: missing '{}'", key));
  std::string_view text = it->second;
  int base = 10;
  if (text.starts_with("0x")) {
    text.remove_prefix(2);
    base = 16;
  }
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw LoadError(fmt::format("crash report: malformed '{}' value '{}'", key, it->second));
  }
  return value;
}

}  // namespace

std::string_view CrashKindName(CrashKind kind) {
  switch (kind) {
    case CrashKind::kOobWrite:
      return "OobWrite";
    case CrashKind::kUafWrite:
      return "UafWrite";
    case CrashKind::kUndefinedSwitch:
      return "UndefinedSwitch";
    case CrashKind::kTableIndexOob:
      return "TableIndexOob";
  }
  return "?";
}

std::optional<CrashKind> CrashKindFromName(std::string_view name) {
  for (CrashKind k : {CrashKind::kOobWrite, CrashKind::kUafWrite, CrashKind::kUndefinedSwitch,
                      CrashKind::kTableIndexOob}) {
    if (CrashKindName(k) == name) return k;
  }
  return std::nullopt;
}

std::string CrashReport::Site() const { return fmt::format("{}:{}:{}", function, block, instr); }

std::string CrashReport::DedupKey() const {
  return fmt::format("{}-{}-{}-{}", CrashKindName(kind), function, block, instr);
}

std::string SerializeCrashReport(const CrashReport& r) {
  return fmt::format(
      "kind={}\nsite={}\naddress=0x{:x}\nwidth={}\nmask_prefix={}\nseed={}\n",
      CrashKindName(r.kind), r.Site(), r.address, r.width, r.mask_prefix, r.seed_id);
}

CrashReport ParseCrashReport(std::string_view text) {
  std::map<std::string, std::string> fields;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw LoadError(fmt::format("crash report: malformed line '{}'", line));
    }
    fields[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  CrashReport report;
  auto kind_it = fields.find("kind");
  if (kind_it == fields.end()) throw LoadError("crash report: missing 'kind'");
  std::optional<CrashKind> kind = CrashKindFromName(kind_it->second);
  if (!kind) throw LoadError(fmt::format("crash report: unknown kind '{}'", kind_it->second));
  report.kind = *kind;

  auto site_it = fields.find("site");
  if (site_it == fields.end()) throw LoadError("crash report: missing 'site'");
  const std::string& site = site_it->second;
  size_t c1 = site.find(':');
  size_t c2 = site.rfind(':');
  if (c1 == std::string::npos || c1 == c2) {
    throw LoadError(fmt::format("crash report: malformed site '{}'", site));
  }
  report.function = site.substr(0, c1);
  report.block = site.substr(c1 + 1, c2 - c1 - 1);
  std::map<std::string, std::string> idx{{"instr", site.substr(c2 + 1)}};
  report.instr = static_cast<uint32_t>(ParseNumber(idx, "instr"));
  report.address = ParseNumber(fields, "address");
  report.width = static_cast<uint32_t>(ParseNumber(fields, "width"));
  report.mask_prefix = ParseNumber(fields, "mask_prefix");
  auto seed_it = fields.find("seed");
  if (seed_it == fields.end()) throw LoadError("crash report: missing 'seed'");
  report.seed_id = seed_it->second;
  return report;
}

}  // namespace sbxforge
