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


#include "sbxforge/replay.h"

#include <charconv>
#include <map>

#include <fmt/format.h>

#include "sbxforge/campaign.h"
#include "sbxforge/file_util.h"

namespace sbxforge {
namespace {

namespace fs = std::filesystem;

std::map<std::string, std::string, std::less<>> ParseKeyValues(std::string_view text) {
  std::map<std::string, std::string, std::less<>> out;
  while (!text.empty()) {
    size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return out;
}

uint64_t Number(const std::map<std::string, std::string, std::less<>>& kv, std::string_view key,
                uint64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  uint64_t v = 0;
  const std::string& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw LoadError(fmt::format("malformed {}='{}'", key, s));
  }
  return v;
}

bool Flag(const std::map<std::string, std::string, std::less<>>& kv, std::string_view key,
          bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw LoadError(fmt::format("malformed {}='{}'", key, it->second));
}

ir::Program LoadProgram(const fs::path& path) {
  try {
    return ir::ParseProgram(ReadTextFile(path));
  } catch (const ir::ParseError& e) {
    throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ir::ValidateError& e) {
    throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace

std::string_view ExecStatusName(ExecStatus status) {
  switch (status) {
    case ExecStatus::kFinished:
      return "finished";
    case ExecStatus::kCrash:
      return "crash";
    case ExecStatus::kLimitExceeded:
      return "limit_exceeded";
  }
  return "?";
}

std::optional<ExecStatus> ExecStatusFromName(std::string_view name) {
  for (ExecStatus s : {ExecStatus::kFinished, ExecStatus::kCrash, ExecStatus::kLimitExceeded}) {
    if (ExecStatusName(s) == name) return s;
  }
  return std::nullopt;
}

uint64_t EdgeTraceHash(std::span<const EdgeId> trace) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (EdgeId id : trace) {
    for (int i = 0; i < 4; ++i) {
      h ^= (id >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

ExecContext ParseContext(std::string_view text) {
  auto kv = ParseKeyValues(text);
  ExecContext context;
  auto mode_it = kv.find("mode");
  if (mode_it != kv.end()) {
    auto mode = ModeFromName(mode_it->second);
    if (!mode) throw LoadError(fmt::format("unknown mode '{}'", mode_it->second));
    context.prune = ModePrunes(*mode);
    context.write_list = *mode == Mode::kBaseline;
  }
  context.prune = Flag(kv, "prune", context.prune);
  context.fork_point = Flag(kv, "fork_point", context.fork_point);
  context.layout.cage_size = Number(kv, "cage_size", context.layout.cage_size);
  context.limits.max_steps = Number(kv, "max_steps", context.limits.max_steps);
  context.limits.max_call_depth =
      static_cast<uint32_t>(Number(kv, "max_call_depth", context.limits.max_call_depth));
  try {
    context.layout.Check();
  } catch (const std::invalid_argument& e) {
    throw LoadError(e.what());
  }
  return context;
}

ReplayArtifact LoadArtifact(const fs::path& path) {
  ReplayArtifact artifact;
  std::error_code ec;
  if (fs::is_directory(path, ec) || path.filename() == "repro") {
    const fs::path dir = fs::is_directory(path, ec) ? path : path.parent_path();
    const std::string report = ReadTextFile(dir / "report.txt");
    artifact.expected_crash = ParseCrashReport(report);
    artifact.expected_status = ExecStatus::kCrash;
    artifact.context = ParseContext(report);
    artifact.seed_id = artifact.expected_crash->seed_id;
    artifact.input = ReadBinaryFile(dir / "repro");
    artifact.program = LoadProgram(dir / "seed.sir");
    return artifact;
  }
  if (path.extension() == ".mask") {
    fs::path meta_path = path;
    meta_path.replace_extension(".meta");
    const std::string meta = ReadTextFile(meta_path);
    auto kv = ParseKeyValues(meta);
    auto seed = kv.find("seed");
    if (seed == kv.end()) throw LoadError(fmt::format("{}: missing seed", meta_path.string()));
    artifact.seed_id = seed->second;
    artifact.context = ParseContext(meta);
    if (auto it = kv.find("outcome"); it != kv.end()) {
      artifact.expected_status = ExecStatusFromName(it->second);
      if (!artifact.expected_status) throw LoadError(fmt::format("bad outcome '{}'", it->second));
    }
    if (kv.count("edge_hash")) {
      const std::string& h = kv.find("edge_hash")->second;
      uint64_t v = 0;
      auto [ptr, err] = std::from_chars(h.data(), h.data() + h.size(), v, 16);
      if (err != std::errc() || ptr != h.data() + h.size()) throw LoadError("bad edge_hash");
      artifact.expected_edge_hash = v;
    }
    artifact.input = ReadBinaryFile(path);
    artifact.program = LoadProgram(path.parent_path() / "seed.sir");
    return artifact;
  }
  throw LoadError(fmt::format("{} is neither a crash directory, a repro nor a .mask file",
                              path.string()));
}

ReplayResult Replay(const ReplayArtifact& artifact) {
  SeedExecutor exec(artifact.program, artifact.seed_id, artifact.context);
  ReplayResult result;
  exec.set_interception_log(&result.interceptions);
  ExecObservers observers;
  observers.edge_trace = &result.edge_trace;
  result.outcome = exec.Run(artifact.input, observers);
  result.edge_hash = EdgeTraceHash(result.edge_trace);

  if (artifact.expected_status && *artifact.expected_status != result.outcome.status) {
    throw ReplayMismatch(fmt::format("expected outcome {}, got {}",
                                     ExecStatusName(*artifact.expected_status),
                                     ExecStatusName(result.outcome.status)));
  }
  if (artifact.expected_crash) {
    if (!result.outcome.crash || !(*result.outcome.crash == *artifact.expected_crash)) {
      throw ReplayMismatch(fmt::format(
          "expected crash\n{}got\n{}", SerializeCrashReport(*artifact.expected_crash),
          result.outcome.crash ? SerializeCrashReport(*result.outcome.crash) : "none\n"));
    }
  }
  if (artifact.expected_edge_hash && *artifact.expected_edge_hash != result.edge_hash) {
    throw ReplayMismatch(fmt::format("edge trace hash {:016x} differs from recorded {:016x}",
                                     result.edge_hash, *artifact.expected_edge_hash));
  }
  return result;
}

}  // namespace sbxforge
