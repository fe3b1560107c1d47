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


// Native cost of the three interception mechanisms the cost model prices:
// the inline boundary check, a soft hook call, and a page-fault round trip
// (SIGSEGV on a PROT_NONE page, unprotect in the handler, reprotect). Plus
// end-to-end executor throughput on the shipped targets.

#include <signal.h>
#include <sys/mman.h>
#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "sbxforge/campaign.h"
#include "sbxforge/executor.h"
#include "sbxforge/interceptor.h"
#include "sbxforge/memory.h"
#include "sbxforge/suite.h"

namespace sbxforge {
namespace {

constexpr size_t kAddresses = 4096;

// Half cage, half trusted addresses in random order, so the branch is not
// trivially predictable.
std::vector<uint64_t> MixedAddresses() {
  std::mt19937_64 rng(1);
  std::vector<uint64_t> out(kAddresses);
  for (uint64_t& a : out) {
    a = rng() % 2 ? kDefaultCageBase + rng() % (kDefaultCageSize - 8)
                  : kHeapRegionBase + rng() % 0x10000;
  }
  return out;
}

void BM_InlineCheck(benchmark::State& state) {
  const std::vector<uint64_t> addrs = MixedAddresses();
  const SandboxLayout layout;
  size_t i = 0;
  uint64_t hits = 0;
  for (auto _ : state) {
    hits += layout.ContainsRange(addrs[i], 8);
    i = (i + 1) % kAddresses;
    benchmark::DoNotOptimize(hits);
  }
}
BENCHMARK(BM_InlineCheck);

// Check plus a virtual Intercept() call with write-back for in-cage hits.
void BM_SoftHook(benchmark::State& state) {
  std::vector<uint8_t> cage(kDefaultCageSize);
  std::vector<uint64_t> addrs(kAddresses);
  std::mt19937_64 rng(2);
  for (uint64_t& a : addrs) a = kDefaultCageBase + rng() % (kDefaultCageSize - 8);
  std::vector<uint8_t> mask(1 << 16);
  for (uint8_t& b : mask) b = rng() % 8 == 0 ? static_cast<uint8_t>(rng()) : 0;
  MaskInterceptor masks(mask);
  LoadInterceptor& hook = masks;
  const SandboxLayout layout;
  size_t i = 0;
  for (auto _ : state) {
    const uint64_t a = addrs[i];
    if (layout.ContainsRange(a, 8)) {
      benchmark::DoNotOptimize(
          hook.Intercept(0, a, {cage.data() + (a - kDefaultCageBase), 8}));
    }
    if (++i == kAddresses) {
      i = 0;
      masks.stream().Rewind();
    }
  }
}
BENCHMARK(BM_SoftHook);

volatile sig_atomic_t g_faults = 0;
uint8_t* g_page = nullptr;
long g_page_size = 0;

void OnFault(int, siginfo_t* info, void*) {
  auto* addr = static_cast<uint8_t*>(info->si_addr);
  if (addr < g_page || addr >= g_page + g_page_size) {
    signal(SIGSEGV, SIG_DFL);
    return;
  }
  g_faults = g_faults + 1;
  mprotect(g_page, static_cast<size_t>(g_page_size), PROT_READ | PROT_WRITE);
}

// One trapped load: fault, handler unprotects, the load retries, then the
// page is protected again for the next access.
void BM_TrapRoundTrip(benchmark::State& state) {
  g_page_size = sysconf(_SC_PAGESIZE);
  void* mem = mmap(nullptr, static_cast<size_t>(g_page_size), PROT_READ | PROT_WRITE,
                   MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (mem == MAP_FAILED) {
    state.SkipWithError("mmap failed");
    return;
  }
  g_page = static_cast<uint8_t*>(mem);
  struct sigaction sa = {};
  struct sigaction old = {};
  sa.sa_sigaction = OnFault;
  sa.sa_flags = SA_SIGINFO;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGSEGV, &sa, &old);
  g_faults = 0;
  volatile uint64_t* word = reinterpret_cast<volatile uint64_t*>(g_page);
  uint64_t sum = 0;
  for (auto _ : state) {
    mprotect(g_page, static_cast<size_t>(g_page_size), PROT_NONE);
    sum += *word;
  }
  benchmark::DoNotOptimize(sum);
  sigaction(SIGSEGV, &old, nullptr);
  munmap(mem, static_cast<size_t>(g_page_size));
  if (static_cast<uint64_t>(g_faults) != state.iterations()) {
    state.SkipWithError("not every access faulted");
  }
}
BENCHMARK(BM_TrapRoundTrip);

// Executor throughput on one target, zero masks, pruned vs unpruned.
void BM_Execute(benchmark::State& state, const char* target) {
  static const Suite suite = BuildSuite(SBXFORGE_TARGETS_DIR);
  const SuiteEntry* entry = suite.Find(target);
  ExecContext context;
  context.prune = state.range(0) != 0;
  SeedExecutor exec(entry->program, entry->id, context);
  for (auto _ : state) benchmark::DoNotOptimize(exec.Run({}));
  state.counters["hooks/exec"] = static_cast<double>(exec.LastCounters().hook_checks);
}
BENCHMARK_CAPTURE(BM_Execute, double_fetch_sort, "double_fetch_sort")->Arg(1)->Arg(0);
BENCHMARK_CAPTURE(BM_Execute, crc_checksum, "crc_checksum")->Arg(1)->Arg(0);
BENCHMARK_CAPTURE(BM_Execute, stack_matrix, "stack_matrix")->Arg(1)->Arg(0);

}  // namespace
}  // namespace sbxforge

BENCHMARK_MAIN();
