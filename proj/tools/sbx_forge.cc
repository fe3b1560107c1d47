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


// sbx-forge: instrument, fuzz, replay, verify the target suite and price
// interception designs.
//
// Exit codes: 0 success, 1 findings present (or a replayed crash), 2
// configuration or usage error, 3 replay mismatch.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sbxforge/campaign.h"
#include "sbxforge/cost_model.h"
#include "sbxforge/file_util.h"
#include "sbxforge/instrument.h"
#include "sbxforge/ir.h"
#include "sbxforge/replay.h"
#include "sbxforge/suite.h"

namespace {

namespace fs = std::filesystem;
using namespace sbxforge;

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMismatch = 3;

#ifndef SBXFORGE_DEFAULT_TARGETS
#define SBXFORGE_DEFAULT_TARGETS "targets"
#endif

struct InstrumentArgs {
  std::string in;
  std::string out;
  bool no_prune = false;
  std::string stats;
};

struct FuzzArgs {
  std::string mode = "sbxbrk";
  std::string seeds;
  std::string out;
  uint64_t budget_execs = 0;
  uint64_t budget_seconds = 0;
  uint32_t workers = 1;
  uint64_t rng_seed = 0;
  uint64_t cage_size = kDefaultCageSize;
  uint64_t max_steps = kCampaignMaxSteps;
  uint32_t max_call_depth = ExecLimits{}.max_call_depth;
  bool no_fork_point = false;
  std::string config;
};

struct ReplayArgs {
  std::string path;
  bool trace = false;
  bool log_interceptions = false;
};

struct BenchArgs {
  std::string targets = SBXFORGE_DEFAULT_TARGETS;
  double c_trap = CostModel{}.c_trap;
  double c_soft = CostModel{}.c_soft;
  double c_check = CostModel{}.c_check;
  bool no_prune = false;
};

int RunInstrument(const InstrumentArgs& args) {
  ir::Program program = ir::ParseProgram(ReadTextFile(args.in));
  InstrumentedProgram instrumented = Instrument(program, !args.no_prune);
  std::string text = ir::PrintProgram(instrumented.program);
  if (args.out.empty() || args.out == "-") {
    std::cout << text;
  } else {
    AtomicWriteFile(args.out, text);
  }
  if (!args.stats.empty()) AtomicWriteFile(args.stats, FormatStats(instrumented));
  return kExitOk;
}

int RunFuzz(const FuzzArgs& args) {
  if (args.budget_execs && args.budget_seconds) {
    throw ConfigError("give exactly one of --budget-execs and --budget-seconds");
  }
  CampaignConfig config;
  auto mode = ModeFromName(args.mode);
  if (!mode) throw ConfigError(fmt::format("unknown mode '{}'", args.mode));
  config.mode = *mode;
  config.seeds = args.seeds;
  config.out = args.out;
  if (config.out.empty()) {
    if (const char* env = std::getenv("SBXFORGE_OUT")) config.out = env;
  }
  if (args.budget_seconds) {
    config.budget = {Budget::Kind::kSeconds, args.budget_seconds};
  } else if (args.budget_execs) {
    config.budget = {Budget::Kind::kExecs, args.budget_execs};
  }
  config.workers = args.workers;
  config.rng_seed = args.rng_seed;
  config.cage_size = args.cage_size;
  config.limits.max_steps = args.max_steps;
  config.limits.max_call_depth = args.max_call_depth;
  config.fork_point = !args.no_fork_point;
  // The config file wins over flags.
  if (!args.config.empty()) config = ParseConfigText(ReadTextFile(args.config), config);
  if (config.out.empty()) throw ConfigError("no output directory (--out or SBXFORGE_OUT)");
  config.Check();

  CampaignResult result = RunCampaign(config);
  std::cout << result.stats.Format();
  for (const Finding& f : result.findings) {
    std::cout << fmt::format("finding {} after {} executions\n", f.key, f.found_at_exec);
  }
  return result.findings.empty() ? kExitOk : kExitFindings;
}

int RunReplay(const ReplayArgs& args) {
  ReplayArtifact artifact = LoadArtifact(args.path);
  std::vector<TraceEntry> trace;
  ReplayResult result;
  try {
    result = Replay(artifact);
  } catch (const ReplayMismatch& e) {
    std::cerr << "replay mismatch: " << e.what() << "\n";
    return kExitMismatch;
  }
  if (args.trace) {
    SeedExecutor exec(artifact.program, artifact.seed_id, artifact.context);
    ExecObservers observers;
    observers.trace = &trace;
    exec.Run(artifact.input, observers);
    for (const TraceEntry& e : trace) std::cout << FormatTraceEntry(exec.program(), e) << "\n";
  }
  if (args.log_interceptions) {
    for (const InterceptionRecord& r : result.interceptions) std::cout << FormatRecord(r) << "\n";
  }
  std::cout << fmt::format("outcome={}\nedge_hash={:016x}\n", ExecStatusName(result.outcome.status),
                           result.edge_hash);
  if (result.outcome.crash) {
    std::cout << SerializeCrashReport(*result.outcome.crash);
    return kExitFindings;
  }
  return kExitOk;
}

int RunVerifySuite(const std::string& targets) {
  Suite suite = BuildSuite(targets);
  try {
    TriggerReport report = VerifyTriggers(suite);
    std::cout << report.Format();
    std::cout << fmt::format("{} programs, {} seeded bugs: all triggers verified\n",
                             suite.entries.size(), suite.bugs().size());
    return kExitOk;
  } catch (const TriggerRegression& e) {
    std::cout << e.what();
    std::cout << "trigger regression\n";
    return kExitFindings;
  }
}

int RunBench(const BenchArgs& args) {
  Suite suite = BuildSuite(args.targets);
  CostModel model{args.c_check, args.c_soft, args.c_trap};
  model.Check();
  InterceptionCost cost = SimulateInterceptionCost(suite.programs(), model, !args.no_prune);
  std::cout << fmt::format("programs={}\nc_check={} c_soft={} c_trap={}\n", suite.entries.size(),
                           model.c_check, model.c_soft, model.c_trap);
  std::cout << cost.Format();
  return kExitOk;
}

int RunStats(const std::string& dir) {
  const fs::path run(dir);
  std::cout << ReadTextFile(run / "summary.txt");
  std::error_code ec;
  if (fs::is_directory(run / "crashes", ec)) {
    std::vector<std::string> keys;
    for (const auto& entry : fs::directory_iterator(run / "crashes")) {
      keys.push_back(entry.path().filename().string());
    }
    std::sort(keys.begin(), keys.end());
    for (const std::string& k : keys) std::cout << "crash " << k << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sbx-forge: fault-injection fuzzing of sandbox trust boundaries"};
  app.require_subcommand(1);

  InstrumentArgs instrument_args;
  auto* instrument = app.add_subcommand("instrument", "Insert load hooks into a .sir program");
  instrument->add_option("--in", instrument_args.in, "Input program")->required();
  instrument->add_option("--out", instrument_args.out, "Output program (default stdout)");
  instrument->add_flag("--no-prune", instrument_args.no_prune, "Hook every load");
  instrument->add_option("--stats", instrument_args.stats, "Write load classification stats to FILE");

  FuzzArgs fuzz_args;
  auto* fuzz = app.add_subcommand("fuzz", "Run a fuzzing campaign");
  fuzz->add_option("--mode", fuzz_args.mode, "sbxbrk | nocov | noprune | baseline");
  fuzz->add_option("--seeds", fuzz_args.seeds, "Seed directory or .sir file");
  fuzz->add_option("--out", fuzz_args.out, "Output directory (default $SBXFORGE_OUT)");
  fuzz->add_option("--budget-execs", fuzz_args.budget_execs, "Executions per worker");
  fuzz->add_option("--budget-seconds", fuzz_args.budget_seconds, "Wall-clock seconds per worker");
  fuzz->add_option("--workers", fuzz_args.workers, "Independent workers");
  fuzz->add_option("--rng-seed", fuzz_args.rng_seed, "Base rng seed");
  fuzz->add_option("--cage-size", fuzz_args.cage_size, "Cage size in bytes (power of two)");
  fuzz->add_option("--max-steps", fuzz_args.max_steps, "Step limit per execution");
  fuzz->add_option("--max-call-depth", fuzz_args.max_call_depth, "Call depth limit");
  fuzz->add_flag("--no-fork-point", fuzz_args.no_fork_point, "Ignore fuzz_start; fuzz from entry");
  fuzz->add_option("--config", fuzz_args.config, "key=value config file (wins over flags)");

  ReplayArgs replay_args;
  auto* replay = app.add_subcommand("replay", "Replay a crash reproducer or corpus entry");
  replay->add_option("path", replay_args.path, "Crash dir, repro file or .mask file")->required();
  replay->add_flag("--trace", replay_args.trace, "Dump the instruction trace");
  replay->add_flag("--log-interceptions", replay_args.log_interceptions,
                   "Dump interception records");

  std::string verify_targets = SBXFORGE_DEFAULT_TARGETS;
  auto* verify = app.add_subcommand("verify-suite", "Check dormancy and every known trigger");
  verify->add_option("--targets", verify_targets, "Suite directory");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench-interception", "Trap vs. soft-hook cost model");
  bench->add_option("--targets", bench_args.targets, "Suite directory");
  bench->add_option("--c-trap", bench_args.c_trap, "Cost per trapped cage access");
  bench->add_option("--c-soft", bench_args.c_soft, "Cost per soft interception");
  bench->add_option("--c-check", bench_args.c_check, "Cost per inline check");
  bench->add_flag("--no-prune", bench_args.no_prune, "Hook every load");

  std::string stats_dir;
  auto* stats = app.add_subcommand("stats", "Summarize a campaign output directory");
  stats->add_option("dir", stats_dir, "Campaign output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*instrument) return RunInstrument(instrument_args);
    if (*fuzz) return RunFuzz(fuzz_args);
    if (*replay) return RunReplay(replay_args);
    if (*verify) return RunVerifySuite(verify_targets);
    if (*bench) return RunBench(bench_args);
    if (*stats) return RunStats(stats_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ir::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ir::ValidateError& e) {
    std::cerr << "invalid program: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SnapshotUnreachable& e) {
    std::cerr << "snapshot: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
