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


#include "sbxforge/suite.h"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "sbxforge/file_util.h"

namespace sbxforge {
namespace {

namespace fs = std::filesystem;

constexpr BugClass kClasses[] = {BugClass::kDoubleFetch,      BugClass::kTableIndex,
                                 BugClass::kUnknownEnum,      BugClass::kIntOverflowAlloc,
                                 BugClass::kReadShadowedWrite, BugClass::kLengthDoubleFetch};

SeededBug ParseTrigger(const fs::path& path, SeededBug bug) {
  std::istringstream in(ReadTextFile(path));
  std::string line;
  bool have_offset = false;
  bool have_bytes = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw LoadError(fmt::format("{}: bad line '{}'", path.string(), line));
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "offset") {
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), bug.trigger_offset);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw LoadError(fmt::format("{}: bad offset '{}'", path.string(), value));
      }
      have_offset = true;
    } else if (key == "bytes") {
      bug.trigger_bytes = HexDecode(value);
      have_bytes = true;
    }
  }
  if (!have_offset || !have_bytes) throw LoadError(fmt::format("{}: needs offset= and bytes=", path.string()));
  return bug;
}

}  // namespace

std::string_view BugClassName(BugClass cls) {
  switch (cls) {
    case BugClass::kDoubleFetch:
      return "DoubleFetch";
    case BugClass::kTableIndex:
      return "TableIndex";
    case BugClass::kUnknownEnum:
      return "UnknownEnum";
    case BugClass::kIntOverflowAlloc:
      return "IntOverflowAlloc";
    case BugClass::kReadShadowedWrite:
      return "ReadShadowedWrite";
    case BugClass::kLengthDoubleFetch:
      return "LengthDoubleFetch";
  }
  return "?";
}

std::optional<BugClass> BugClassFromName(std::string_view name) {
  for (BugClass c : kClasses) {
    if (BugClassName(c) == name) return c;
  }
  return std::nullopt;
}

std::vector<uint8_t> SeededBug::TriggerMask() const {
  std::vector<uint8_t> mask(trigger_offset, 0);
  mask.insert(mask.end(), trigger_bytes.begin(), trigger_bytes.end());
  return mask;
}

const SuiteEntry* Suite::Find(std::string_view id) const {
  for (const SuiteEntry& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<const SuiteEntry*> Suite::bugs() const {
  std::vector<const SuiteEntry*> out;
  for (const SuiteEntry& e : entries) {
    if (e.bug) out.push_back(&e);
  }
  return out;
}

std::vector<const SuiteEntry*> Suite::benign() const {
  std::vector<const SuiteEntry*> out;
  for (const SuiteEntry& e : entries) {
    if (!e.bug) out.push_back(&e);
  }
  return out;
}

std::vector<ir::Program> Suite::programs() const {
  std::vector<ir::Program> out;
  for (const SuiteEntry& e : entries) out.push_back(e.program);
  return out;
}

Suite BuildSuite(const fs::path& dir) {
  Suite suite;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".sir") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    SuiteEntry e;
    e.id = file.stem().string();
    e.path = file;
    e.text = ReadTextFile(file);
    e.program = ir::ParseProgram(e.text);
    suite.entries.push_back(std::move(e));
  }

  std::istringstream manifest(ReadTextFile(dir / "manifest.txt"));
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string id, cls, kind, site, trigger;
    if (!(fields >> id)) continue;
    if (!(fields >> cls >> kind >> site >> trigger)) {
      throw LoadError(fmt::format("manifest.txt:{}: expected 5 fields", line_no));
    }
    auto it = std::find_if(suite.entries.begin(), suite.entries.end(),
                           [&](const SuiteEntry& e) { return e.id == id; });
    if (it == suite.entries.end()) {
      throw LoadError(fmt::format("manifest.txt:{}: no program {}.sir", line_no, id));
    }
    SeededBug bug;
    auto c = BugClassFromName(cls);
    auto k = CrashKindFromName(kind);
    if (!c || !k) throw LoadError(fmt::format("manifest.txt:{}: bad class or kind", line_no));
    bug.bug_class = *c;
    bug.kind = *k;
    bug.site = site;
    it->bug = ParseTrigger(dir / trigger, std::move(bug));
  }
  return suite;
}

bool TriggerReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const TriggerCheck& c) { return c.ok; });
}

std::string TriggerReport::Format() const {
  std::string out;
  for (const TriggerCheck& c : checks) {
    out += fmt::format("{} {} {}\n", c.ok ? "ok  " : "FAIL", c.id, c.detail);
  }
  return out;
}

ExecOutcome RunEntry(const SuiteEntry& entry, std::span<const uint8_t> mask,
                     const ExecContext& context) {
  SeedExecutor exec(entry.program, entry.id, context);
  return exec.Run(mask);
}

TriggerReport VerifyTriggers(const Suite& suite, const ExecContext& context) {
  TriggerReport report;
  for (const SuiteEntry& entry : suite.entries) {
    TriggerCheck dormant{entry.id + "/zero-mask", false, ""};
    try {
      SeedExecutor exec(entry.program, entry.id, context);
      ExecOutcome zero = exec.Run({});
      dormant.ok = zero.finished();
      dormant.detail = zero.crashed() ? "crashed: " + zero.crash->DedupKey()
                       : zero.finished() ? "finished"
                                         : "limit exceeded";
      report.checks.push_back(dormant);
      if (!entry.bug) continue;

      TriggerCheck trig{entry.id + "/trigger", false, ""};
      ExecOutcome out = exec.Run(entry.bug->TriggerMask());
      if (!out.crashed()) {
        trig.detail = "no crash";
      } else {
        trig.ok = out.crash->kind == entry.bug->kind && out.crash->Site() == entry.bug->site;
        trig.detail = fmt::format("{} at {} (expected {} at {})", CrashKindName(out.crash->kind),
                                  out.crash->Site(), CrashKindName(entry.bug->kind),
                                  entry.bug->site);
      }
      report.checks.push_back(trig);
    } catch (const SnapshotUnreachable& e) {
      dormant.detail = e.what();
      report.checks.push_back(dormant);
    }
  }
  if (!report.ok()) throw TriggerRegression(report.Format());
  return report;
}

}  // namespace sbxforge
