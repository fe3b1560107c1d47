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


// The fuzzing monitor: corpus of (seed program, mask) test cases,
// coverage-guided scheduling and the campaign loop for every mode.
#ifndef SBXFORGE_CAMPAIGN_H_
#define SBXFORGE_CAMPAIGN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sbxforge/cfg.h"
#include "sbxforge/crash_report.h"
#include "sbxforge/instrument.h"
#include "sbxforge/ir.h"
#include "sbxforge/mutator.h"
#include "sbxforge/vm.h"

namespace sbxforge {

// sbxbrk:   mask-stream faults, pruned instrumentation, coverage feedback.
// noprune:  as sbxbrk, every load hooked.
// nocov:    as sbxbrk, the corpus never grows past the initial entries.
// baseline: inputs are cage write lists applied at the snapshot; no
//           interception.
enum class Mode : uint8_t { kSbxbrk, kNocov, kNoprune, kBaseline };

std::string_view ModeName(Mode mode);
std::optional<Mode> ModeFromName(std::string_view name);
inline bool ModePrunes(Mode mode) { return mode != Mode::kNoprune; }
inline bool ModeUsesCoverage(Mode mode) { return mode != Mode::kNocov; }

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Budget {
  enum class Kind : uint8_t { kExecs, kSeconds };
  Kind kind = Kind::kExecs;
  uint64_t value = 10'000;
};

inline constexpr uint64_t kCampaignMaxSteps = 200'000;

struct CampaignConfig {
  Mode mode = Mode::kSbxbrk;
  std::filesystem::path seeds;  // a directory of .sir files, or one file
  std::filesystem::path out;    // empty: keep everything in memory
  Budget budget;                // per worker
  uint32_t workers = 1;
  uint64_t rng_seed = 0;
  uint64_t cage_size = kDefaultCageSize;
  // Campaigns cap executions far below the VM default: corrupted loop
  // bounds otherwise spend most of the budget spinning to the step limit.
  ExecLimits limits{kCampaignMaxSteps, ExecLimits{}.max_call_depth};
  bool fork_point = true;
  MutatorConfig mutator;
  // Probability of picking among the `recent_window` newest corpus entries
  // instead of the next entry in queue order.
  double recent_bias = 0.5;
  uint32_t recent_window = 8;

  // Throws ConfigError.
  void Check() const;
};

// Parses "key=value" lines on top of `base`; unknown keys are a ConfigError.
CampaignConfig ParseConfigText(std::string_view text, CampaignConfig base = {});
std::string FormatConfig(const CampaignConfig& config);

struct Seed {
  std::string id;  // file stem
  std::filesystem::path path;
  std::string text;
  ir::Program program;
};

// Seeds sorted by id. Throws ConfigError when none are found and
// ParseError/ValidateError for malformed programs.
std::vector<Seed> LoadSeeds(const std::filesystem::path& path);

// Exact-id edge coverage over one program.
class CoverageMap {
 public:
  explicit CoverageMap(size_t edges = 0) : counters_(edges, 0) {}

  // Counts the run and returns true if it hit a never-seen edge.
  bool Merge(std::span<const EdgeId> touched);
  bool seen(EdgeId id) const { return counters_[id] != 0; }
  size_t covered() const { return covered_; }
  size_t size() const { return counters_.size(); }
  const std::vector<uint64_t>& counters() const { return counters_; }

 private:
  std::vector<uint64_t> counters_;
  size_t covered_ = 0;
};

struct TestCase {
  uint64_t id = 0;
  uint32_t worker = 0;
  std::string seed_id;
  std::vector<uint8_t> mask;
  std::optional<uint64_t> parent;
  uint64_t execs_at_discovery = 0;
  bool initial = false;

  // "000042", or "w1-000042" for workers other than 0.
  std::string Name() const;
};

struct Finding {
  std::string key;  // "<seed>.<Kind>-<fn>-<block>-<idx>"
  CrashReport report;
  std::vector<uint8_t> input;
  uint32_t worker = 0;
  uint64_t found_at_exec = 0;
};

std::string FindingKey(const CrashReport& report);

struct CampaignStats {
  uint64_t executions = 0;
  double elapsed_seconds = 0;
  uint64_t corpus_size = 0;
  uint64_t crash_executions = 0;
  std::map<std::string, uint64_t> unique_crashes_by_kind;
  uint64_t limit_exceeded = 0;
  uint64_t tolerated_reads = 0;
  uint64_t interceptions = 0;
  uint64_t hook_checks = 0;
  uint64_t edges_covered = 0;
  uint64_t edges_total = 0;
  PruningStats pruning;

  double execs_per_sec() const {
    return elapsed_seconds > 0 ? static_cast<double>(executions) / elapsed_seconds : 0;
  }
  double interceptions_per_exec() const {
    return executions ? static_cast<double>(interceptions) / static_cast<double>(executions) : 0;
  }
  // key=value lines.
  std::string Format() const;
};

struct CampaignResult {
  CampaignStats stats;
  std::vector<Finding> findings;
  std::vector<TestCase> corpus;

  const Finding* Find(std::string_view seed_id, CrashKind kind, std::string_view site) const;
};

// Runs `config.workers` independent workers (rng seeds rng_seed + i) and
// merges their results. Writes corpus/, crashes/, stats.log and
// summary.txt under config.out when it is set. Throws ConfigError.
CampaignResult RunCampaign(const CampaignConfig& config);

// Same as RunCampaign for mode=baseline; rejects other modes.
CampaignResult RunBaseline(const CampaignConfig& config);

// Runs one worker on already loaded seeds. Building block of RunCampaign.
CampaignResult RunWorker(const CampaignConfig& config, const std::vector<Seed>& seeds,
                         uint32_t worker);

}  // namespace sbxforge

#endif  // SBXFORGE_CAMPAIGN_H_
