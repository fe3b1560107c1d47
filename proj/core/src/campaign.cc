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


#include "sbxforge/campaign.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "sbxforge/executor.h"
#include "sbxforge/file_util.h"
#include "sbxforge/replay.h"

namespace sbxforge {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

uint64_t ParseUnsigned(std::string_view key, std::string_view value) {
  uint64_t out = 0;
  int base = 10;
  if (value.size() > 2 && value[0] == '0' && (value[1] == 'x' || value[1] == 'X')) {
    value.remove_prefix(2);
    base = 16;
  }
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out, base);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError(fmt::format("{}: expected an unsigned integer, got '{}'", key, value));
  }
  return out;
}

bool ParseBool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, value));
}

ExecContext ContextFor(const CampaignConfig& config) {
  ExecContext context;
  context.prune = ModePrunes(config.mode);
  context.write_list = config.mode == Mode::kBaseline;
  context.fork_point = config.fork_point;
  context.layout.cage_size = config.cage_size;
  context.limits = config.limits;
  return context;
}

// Per-worker progress visible to the coordinator's stats thread.
struct Progress {
  std::atomic<uint64_t> executions{0};
  std::atomic<uint64_t> corpus{0};
  std::atomic<uint64_t> crashes{0};
};

class Worker {
 public:
  Worker(const CampaignConfig& config, const std::vector<Seed>& seeds, uint32_t worker,
         Progress* progress)
      : config_(config),
        worker_(worker),
        progress_(progress),
        rng_(config.rng_seed + worker),
        mutator_(config.mutator) {
    const ExecContext context = ContextFor(config);
    for (const Seed& seed : seeds) {
      auto exec = std::make_unique<SeedExecutor>(seed.program, seed.id, context);
      coverage_.emplace_back(exec->program().edges().size());
      const PruningStats& p = exec->program().source().stats;
      result_.stats.pruning.total += p.total;
      result_.stats.pruning.pruned += p.pruned;
      result_.stats.pruning.instrumented += p.instrumented;
      result_.stats.edges_total += exec->program().edges().size();
      executors_.push_back(std::move(exec));
    }
  }

  CampaignResult Run() {
    const auto start = Clock::now();
    const Budget budget = config_.budget;
    auto exhausted = [&] {
      if (budget.kind == Budget::Kind::kExecs) return executions_ >= budget.value;
      if (executions_ % 64 != 0) return false;
      return Clock::now() - start >= std::chrono::seconds(budget.value);
    };

    // Initial corpus: every seed with an empty mask.
    for (uint32_t s = 0; s < executors_.size() && !exhausted(); ++s) {
      Execute(s, {}, std::nullopt, /*initial=*/true);
    }
    while (!corpus_.empty() && !exhausted()) {
      const size_t pick = Schedule();
      std::vector<uint8_t> child = mutator_.Mutate(corpus_[pick].mask, rng_);
      Execute(seed_of_[pick], std::move(child), corpus_[pick].id, /*initial=*/false);
    }

    CampaignStats& stats = result_.stats;
    stats.executions = executions_;
    stats.elapsed_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    stats.corpus_size = corpus_.size();
    for (const CoverageMap& map : coverage_) stats.edges_covered += map.covered();
    result_.corpus = std::move(corpus_);
    return std::move(result_);
  }

 private:
  size_t Schedule() {
    const size_t n = corpus_.size();
    const size_t window = std::min<size_t>(config_.recent_window, n);
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    if (window > 0 && u < config_.recent_bias) return n - 1 - Below(rng_, window);
    return cursor_++ % n;
  }

  void Execute(uint32_t s, std::vector<uint8_t> input, std::optional<uint64_t> parent,
               bool initial) {
    SeedExecutor& exec = *executors_[s];
    ExecOutcome outcome = exec.Run(input);
    ++executions_;
    ExecCounters counters = exec.LastCounters();
    CampaignStats& stats = result_.stats;
    stats.tolerated_reads += counters.tolerated_reads;
    stats.interceptions += counters.interceptions;
    stats.hook_checks += counters.hook_checks;
    const bool fresh = coverage_[s].Merge(exec.touched());

    if (outcome.crashed()) {
      ++stats.crash_executions;
      const std::string key = FindingKey(*outcome.crash);
      if (seen_keys_.insert(key).second) {
        ++stats.unique_crashes_by_kind[std::string(CrashKindName(outcome.crash->kind))];
        result_.findings.push_back({key, *outcome.crash, std::move(input), worker_, executions_});
        progress_->crashes.store(result_.findings.size(), std::memory_order_relaxed);
      }
    } else {
      if (outcome.status == ExecStatus::kLimitExceeded) ++stats.limit_exceeded;
      if (initial || (fresh && ModeUsesCoverage(config_.mode))) {
        TestCase tc;
        tc.id = next_id_++;
        tc.worker = worker_;
        tc.seed_id = exec.seed_id();
        tc.mask = std::move(input);
        tc.parent = parent;
        tc.execs_at_discovery = executions_;
        tc.initial = initial;
        corpus_.push_back(std::move(tc));
        seed_of_.push_back(s);
        progress_->corpus.store(corpus_.size(), std::memory_order_relaxed);
      }
    }
    progress_->executions.store(executions_, std::memory_order_relaxed);
  }

  const CampaignConfig& config_;
  uint32_t worker_;
  Progress* progress_;
  Rng rng_;
  Mutator mutator_;
  std::vector<std::unique_ptr<SeedExecutor>> executors_;
  std::vector<CoverageMap> coverage_;
  std::vector<TestCase> corpus_;
  std::vector<uint32_t> seed_of_;
  std::set<std::string> seen_keys_;
  CampaignResult result_;
  uint64_t executions_ = 0;
  uint64_t next_id_ = 0;
  size_t cursor_ = 0;
};

std::string ContextLines(const CampaignConfig& config) {
  return fmt::format(
      "mode={}\nprune={}\nfork_point={}\ncage_size={}\nmax_steps={}\nmax_call_depth={}\n",
      ModeName(config.mode), ModePrunes(config.mode), config.fork_point, config.cage_size,
      config.limits.max_steps, config.limits.max_call_depth);
}

void WriteArtifacts(const CampaignConfig& config, const std::vector<Seed>& seeds,
                    const CampaignResult& result) {
  const fs::path& out = config.out;
  std::map<std::string, const Seed*> by_id;
  for (const Seed& seed : seeds) by_id[seed.id] = &seed;

  for (const Finding& f : result.findings) {
    const fs::path dir = out / "crashes" / f.key;
    std::string report = SerializeCrashReport(f.report);
    report += ContextLines(config);
    report += fmt::format("rng_seed={}\nworker={}\nfound_at_exec={}\n", config.rng_seed + f.worker,
                          f.worker, f.found_at_exec);
    AtomicWriteFile(dir / "repro", std::span<const uint8_t>(f.input));
    AtomicWriteFile(dir / "seed.sir", by_id.at(f.report.seed_id)->text);
    AtomicWriteFile(dir / "report.txt", report);
  }
  // Corpus metadata records the outcome and edge trace for replay checks.
  std::map<std::string, std::unique_ptr<SeedExecutor>> executors;
  for (const TestCase& tc : result.corpus) {
    const fs::path dir = out / "corpus" / tc.seed_id;
    auto& exec = executors[tc.seed_id];
    if (!exec) {
      const Seed& seed = *by_id.at(tc.seed_id);
      exec = std::make_unique<SeedExecutor>(seed.program, seed.id, ContextFor(config));
      AtomicWriteFile(dir / "seed.sir", seed.text);
    }
    std::vector<EdgeId> trace;
    ExecObservers observers;
    observers.edge_trace = &trace;
    const ExecOutcome outcome = exec->Run(tc.mask, observers);
    std::string meta = fmt::format("id={}\nseed={}\nparent={}\nexecs_at_discovery={}\nworker={}\n",
                                   tc.Name(), tc.seed_id,
                                   tc.parent ? fmt::format("{}", *tc.parent) : "none",
                                   tc.execs_at_discovery, tc.worker);
    meta += fmt::format("outcome={}\nedge_hash={:016x}\n", ExecStatusName(outcome.status),
                        EdgeTraceHash(trace));
    meta += ContextLines(config);
    AtomicWriteFile(dir / (tc.Name() + ".mask"), std::span<const uint8_t>(tc.mask));
    AtomicWriteFile(dir / (tc.Name() + ".meta"), meta);
  }
  AtomicWriteFile(out / "summary.txt", ContextLines(config) + result.stats.Format());
}

}  // namespace

std::string_view ModeName(Mode mode) {
  switch (mode) {
    case Mode::kSbxbrk:
      return "sbxbrk";
    case Mode::kNocov:
      return "nocov";
    case Mode::kNoprune:
      return "noprune";
    case Mode::kBaseline:
      return "baseline";
  }
  return "?";
}

std::optional<Mode> ModeFromName(std::string_view name) {
  for (Mode m : {Mode::kSbxbrk, Mode::kNocov, Mode::kNoprune, Mode::kBaseline}) {
    if (ModeName(m) == name) return m;
  }
  return std::nullopt;
}

void CampaignConfig::Check() const {
  if (seeds.empty()) throw ConfigError("no seed path given");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (budget.value == 0) throw ConfigError("budget must be positive");
  if (cage_size == 0 || (cage_size & (cage_size - 1)) != 0) {
    throw ConfigError(fmt::format("cage size {} is not a power of two", cage_size));
  }
  if (limits.max_steps == 0 || limits.max_call_depth == 0) throw ConfigError("limits must be positive");
  if (mutator.max_len == 0 || mutator.max_chunk == 0) throw ConfigError("mutator sizes must be positive");
  if (!(recent_bias >= 0 && recent_bias <= 1)) throw ConfigError("recent_bias must be in [0, 1]");
}

CampaignConfig ParseConfigText(std::string_view text, CampaignConfig config) {
  bool saw_execs = false;
  bool saw_seconds = false;
  size_t line_no = 0;
  while (!text.empty()) {
    size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("config line {}: expected key=value", line_no));
    }
    std::string_view key = Trim(line.substr(0, eq));
    std::string_view value = Trim(line.substr(eq + 1));
    if (key == "mode") {
      auto mode = ModeFromName(value);
      if (!mode) throw ConfigError(fmt::format("unknown mode '{}'", value));
      config.mode = *mode;
    } else if (key == "seeds") {
      config.seeds = std::string(value);
    } else if (key == "out") {
      config.out = std::string(value);
    } else if (key == "budget_execs") {
      config.budget = {Budget::Kind::kExecs, ParseUnsigned(key, value)};
      saw_execs = true;
    } else if (key == "budget_seconds") {
      config.budget = {Budget::Kind::kSeconds, ParseUnsigned(key, value)};
      saw_seconds = true;
    } else if (key == "workers") {
      config.workers = static_cast<uint32_t>(ParseUnsigned(key, value));
    } else if (key == "rng_seed") {
      config.rng_seed = ParseUnsigned(key, value);
    } else if (key == "cage_size") {
      config.cage_size = ParseUnsigned(key, value);
    } else if (key == "max_steps") {
      config.limits.max_steps = ParseUnsigned(key, value);
    } else if (key == "max_call_depth") {
      config.limits.max_call_depth = static_cast<uint32_t>(ParseUnsigned(key, value));
    } else if (key == "fork_point") {
      config.fork_point = ParseBool(key, value);
    } else if (key == "max_mask_len") {
      config.mutator.max_len = ParseUnsigned(key, value);
    } else {
      throw ConfigError(fmt::format("config line {}: unknown key '{}'", line_no, key));
    }
  }
  if (saw_execs && saw_seconds) throw ConfigError("exactly one budget kind may be given");
  return config;
}

std::string FormatConfig(const CampaignConfig& c) {
  return fmt::format(
      "mode={}\nseeds={}\nout={}\n{}={}\nworkers={}\nrng_seed={}\ncage_size={}\nmax_steps={}\n"
      "max_call_depth={}\nfork_point={}\nmax_mask_len={}\n",
      ModeName(c.mode), c.seeds.string(), c.out.string(),
      c.budget.kind == Budget::Kind::kExecs ? "budget_execs" : "budget_seconds", c.budget.value,
      c.workers, c.rng_seed, c.cage_size, c.limits.max_steps, c.limits.max_call_depth,
      c.fork_point, c.mutator.max_len);
}

std::vector<Seed> LoadSeeds(const fs::path& path) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".sir") files.push_back(entry.path());
    }
  } else if (fs::is_regular_file(path, ec)) {
    files.push_back(path);
  } else {
    throw ConfigError(fmt::format("seed path {} does not exist", path.string()));
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(fmt::format("no .sir seeds under {}", path.string()));
  std::vector<Seed> seeds;
  for (const fs::path& file : files) {
    Seed seed;
    seed.id = file.stem().string();
    seed.path = file;
    seed.text = ReadTextFile(file);
    seed.program = ir::ParseProgram(seed.text);
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

bool CoverageMap::Merge(std::span<const EdgeId> touched) {
  bool fresh = false;
  for (EdgeId id : touched) {
    if (counters_[id]++ == 0) {
      fresh = true;
      ++covered_;
    }
  }
  return fresh;
}

std::string TestCase::Name() const {
  return worker == 0 ? fmt::format("{:06}", id) : fmt::format("w{}-{:06}", worker, id);
}

std::string FindingKey(const CrashReport& report) {
  return fmt::format("{}.{}", report.seed_id, report.DedupKey());
}

std::string CampaignStats::Format() const {
  std::string out = fmt::format(
      "executions={}\nelapsed_seconds={:.3f}\nexecs_per_sec={:.1f}\ncorpus_size={}\n"
      "crash_executions={}\nunique_crashes={}\nlimit_exceeded={}\ntolerated_reads={}\n"
      "interceptions={}\ninterceptions_per_exec={:.3f}\nhook_checks={}\nedges_covered={}\n"
      "edges_total={}\nloads_total={}\nloads_pruned={}\nloads_instrumented={}\n",
      executions, elapsed_seconds, execs_per_sec(), corpus_size, crash_executions,
      [&] {
        uint64_t n = 0;
        for (const auto& [kind, count] : unique_crashes_by_kind) n += count;
        return n;
      }(),
      limit_exceeded, tolerated_reads, interceptions, interceptions_per_exec(), hook_checks,
      edges_covered, edges_total, pruning.total, pruning.pruned, pruning.instrumented);
  for (const auto& [kind, count] : unique_crashes_by_kind) {
    out += fmt::format("crashes.{}={}\n", kind, count);
  }
  return out;
}

const Finding* CampaignResult::Find(std::string_view seed_id, CrashKind kind,
                                    std::string_view site) const {
  for (const Finding& f : findings) {
    if (f.report.seed_id == seed_id && f.report.kind == kind && f.report.Site() == site) return &f;
  }
  return nullptr;
}

CampaignResult RunWorker(const CampaignConfig& config, const std::vector<Seed>& seeds,
                         uint32_t worker) {
  Progress progress;
  return Worker(config, seeds, worker, &progress).Run();
}

CampaignResult RunCampaign(const CampaignConfig& config) {
  config.Check();
  const std::vector<Seed> seeds = LoadSeeds(config.seeds);

  std::vector<Progress> progress(config.workers);
  std::vector<CampaignResult> results(config.workers);
  std::vector<std::exception_ptr> errors(config.workers);
  std::vector<std::thread> threads;
  auto body = [&](uint32_t w) {
    try {
      results[w] = Worker(config, seeds, w, &progress[w]).Run();
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };

  std::mutex mu;
  std::condition_variable cv;
  bool finished = false;
  std::thread stats_thread;
  const auto start = Clock::now();
  if (!config.out.empty()) {
    stats_thread = std::thread([&] {
      std::string log;
      std::unique_lock<std::mutex> lock(mu);
      // One line per second, plus a closing line so short runs log too.
      for (bool done = false; !done;) {
        done = cv.wait_for(lock, std::chrono::seconds(1), [&] { return finished; });
        uint64_t execs = 0, corpus = 0, crashes = 0;
        for (const Progress& p : progress) {
          execs += p.executions.load(std::memory_order_relaxed);
          corpus += p.corpus.load(std::memory_order_relaxed);
          crashes += p.crashes.load(std::memory_order_relaxed);
        }
        double secs = std::chrono::duration<double>(Clock::now() - start).count();
        log += fmt::format("time={:.1f} executions={} execs_per_sec={:.1f} corpus_size={} unique_crashes={}\n",
                           secs, execs, secs > 0 ? execs / secs : 0.0, corpus, crashes);
        AtomicWriteFile(config.out / "stats.log", log);
      }
    });
  }

  for (uint32_t w = 1; w < config.workers; ++w) threads.emplace_back(body, w);
  body(0);
  for (std::thread& t : threads) t.join();
  if (stats_thread.joinable()) {
    {
      std::lock_guard<std::mutex> lock(mu);
      finished = true;
    }
    cv.notify_all();
    stats_thread.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Merge in worker order; findings keep the first worker's copy.
  CampaignResult merged = std::move(results[0]);
  std::set<std::string> keys;
  for (const Finding& f : merged.findings) keys.insert(f.key);
  for (uint32_t w = 1; w < config.workers; ++w) {
    CampaignResult& r = results[w];
    CampaignStats& s = merged.stats;
    s.executions += r.stats.executions;
    s.elapsed_seconds = std::max(s.elapsed_seconds, r.stats.elapsed_seconds);
    s.corpus_size += r.stats.corpus_size;
    s.crash_executions += r.stats.crash_executions;
    s.limit_exceeded += r.stats.limit_exceeded;
    s.tolerated_reads += r.stats.tolerated_reads;
    s.interceptions += r.stats.interceptions;
    s.hook_checks += r.stats.hook_checks;
    s.edges_covered = std::max(s.edges_covered, r.stats.edges_covered);
    for (Finding& f : r.findings) {
      if (keys.insert(f.key).second) {
        ++s.unique_crashes_by_kind[std::string(CrashKindName(f.report.kind))];
        merged.findings.push_back(std::move(f));
      }
    }
    for (TestCase& tc : r.corpus) merged.corpus.push_back(std::move(tc));
  }
  if (!config.out.empty()) WriteArtifacts(config, seeds, merged);
  return merged;
}

CampaignResult RunBaseline(const CampaignConfig& config) {
  if (config.mode != Mode::kBaseline) throw ConfigError("RunBaseline requires mode=baseline");
  return RunCampaign(config);
}

}  // namespace sbxforge
