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


// Replays persisted crash reproducers and corpus entries.
#ifndef SBXFORGE_REPLAY_H_
#define SBXFORGE_REPLAY_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbxforge/cfg.h"
#include "sbxforge/crash_report.h"
#include "sbxforge/executor.h"
#include "sbxforge/interceptor.h"
#include "sbxforge/ir.h"
#include "sbxforge/vm.h"

namespace sbxforge {

// The recorded outcome could not be reproduced. Replays are deterministic,
// so this always points at a framework bug.
class ReplayMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplayArtifact {
  std::string seed_id;
  ir::Program program;
  std::vector<uint8_t> input;
  ExecContext context;
  std::optional<CrashReport> expected_crash;
  std::optional<ExecStatus> expected_status;
  std::optional<uint64_t> expected_edge_hash;
};

// Accepts a crash directory, the `repro` file inside one, or a corpus
// `.mask` file next to its `.meta`. Throws LoadError on missing or corrupt
// files.
ReplayArtifact LoadArtifact(const std::filesystem::path& path);

// Parses the context keys (mode, prune, fork_point, cage_size, max_steps,
// max_call_depth) of a report or meta file.
ExecContext ParseContext(std::string_view text);

struct ReplayResult {
  ExecOutcome outcome;
  std::vector<EdgeId> edge_trace;
  uint64_t edge_hash = 0;
  std::vector<InterceptionRecord> interceptions;
};

// Runs the input through the same snapshot path the campaign uses and
// checks it against the recorded expectations. Throws ReplayMismatch.
ReplayResult Replay(const ReplayArtifact& artifact);

// FNV-1a over the edge ids.
uint64_t EdgeTraceHash(std::span<const EdgeId> trace);

std::string_view ExecStatusName(ExecStatus status);
std::optional<ExecStatus> ExecStatusFromName(std::string_view name);

}  // namespace sbxforge

#endif  // SBXFORGE_REPLAY_H_
