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


// Randomized and exhaustive checks of the fault semantics. Shared by the
// property tests and the acceptance driver so both exercise the same code.
#ifndef SBXFORGE_TESTS_INVARIANTS_H_
#define SBXFORGE_TESTS_INVARIANTS_H_

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "sbxforge/campaign.h"
#include "sbxforge/executor.h"
#include "sbxforge/file_util.h"
#include "sbxforge/instrument.h"
#include "sbxforge/interceptor.h"
#include "sbxforge/ir.h"
#include "sbxforge/suite.h"
#include "sbxforge/vm.h"
#include "test_util.h"

namespace sbxforge::testing {

struct CheckResult {
  std::string name;
  uint64_t cases = 0;
  uint64_t failure_count = 0;
  std::vector<std::string> failures;  // the first few

  bool ok() const { return failure_count == 0; }
  void Fail(std::string what) {
    if (failures.size() < 8) failures.push_back(std::move(what));
    ++failure_count;
  }
  std::string Summary() const {
    std::string out = fmt::format("{}: {} cases, {} failures", name, cases, failure_count);
    for (const std::string& f : failures) out += "\n  " + f;
    return out;
  }
};

// Sparse random mask stream: mostly zero bytes, like mutated corpus entries.
inline std::vector<uint8_t> RandomMask(std::mt19937_64& rng, size_t max_len = 48) {
  std::vector<uint8_t> mask(rng() % (max_len + 1));
  for (uint8_t& b : mask) {
    if (rng() % 4 == 0) b = static_cast<uint8_t>(rng());
  }
  return mask;
}

struct Observed {
  ExecOutcome outcome;
  std::vector<EdgeId> edges;
  std::vector<TraceEntry> trace;
  std::vector<InterceptionRecord> records;
  uint64_t consumed = 0;
};

// Straight-through run from the entry on `vm`, which keeps the final state.
inline Observed RunFromEntry(Vm& vm, std::vector<uint8_t> mask, const ExecLimits& limits,
                             bool trace) {
  Observed o;
  MaskInterceptor interceptor(std::move(mask));
  interceptor.set_log(&o.records);
  vm.Reset();
  vm.observers().edge_trace = &o.edges;
  vm.observers().trace = trace ? &o.trace : nullptr;
  o.outcome = vm.Run(interceptor, limits);
  o.consumed = interceptor.consumed();
  vm.observers() = {};
  return o;
}

inline bool SameOutcome(const ExecOutcome& a, const ExecOutcome& b) {
  return a.status == b.status && a.crash == b.crash && a.limit == b.limit &&
         a.return_value == b.return_value;
}

inline std::string DescribeOutcome(const ExecOutcome& o) {
  if (o.crash) return fmt::format("crash {}", o.crash->DedupKey());
  return fmt::format("status {} limit {} ret {}", static_cast<int>(o.status),
                     static_cast<int>(o.limit), o.return_value);
}

inline std::string DiffRegion(const char* name, const TrustedRegion& a, const TrustedRegion& b) {
  const auto& x = a.allocations();
  const auto& y = b.allocations();
  if (x.size() != y.size()) return fmt::format("{}: {} vs {} allocations", name, x.size(), y.size());
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].base != y[i].base || x[i].size != y[i].size || x[i].live != y[i].live) {
      return fmt::format("{}: allocation {} differs", name, i);
    }
    if (std::memcmp(a.At(x[i].base), b.At(y[i].base), x[i].size) != 0) {
      return fmt::format("{}: bytes of allocation {:#x} differ", name, x[i].base);
    }
  }
  return {};
}

// Empty when equal. Program counters and the hook-related counters are only
// compared when both states come from the same compiled program.
inline std::string DiffState(const VmState& a, const VmState& b, bool same_code) {
  if (a.cage.size() != b.cage.size()) return "cage size";
  auto ca = a.cage.bytes();
  auto cb = b.cage.bytes();
  if (std::memcmp(ca.data(), cb.data(), ca.size()) != 0) {
    size_t i = 0;
    while (ca[i] == cb[i]) ++i;
    return fmt::format("cage byte {:#x}: {:#04x} vs {:#04x}", i, ca[i], cb[i]);
  }
  if (a.table != b.table) return "table";
  if (a.regs != b.regs) return "registers";
  if (a.global_addrs != b.global_addrs) return "global addresses";
  if (a.armed != b.armed || a.done != b.done) return "armed/done";
  if (a.frames.size() != b.frames.size()) return "frame count";
  for (size_t i = 0; i < a.frames.size(); ++i) {
    const auto& x = a.frames[i];
    const auto& y = b.frames[i];
    if (x.function != y.function || x.reg_base != y.reg_base || x.slot_base != y.slot_base ||
        x.has_ret_dst != y.has_ret_dst || x.ret_dst != y.ret_dst ||
        x.return_edge != y.return_edge || (same_code && x.pc != y.pc)) {
      return fmt::format("frame {}", i);
    }
  }
  for (auto [name, ra, rb] : {std::tuple{"globals", &a.globals, &b.globals},
                              std::tuple{"heap", &a.heap, &b.heap},
                              std::tuple{"stack", &a.stack, &b.stack}}) {
    if (std::string d = DiffRegion(name, *ra, *rb); !d.empty()) return d;
  }
  const ExecCounters& x = a.counters;
  const ExecCounters& y = b.counters;
  if (same_code ? !(x == y)
                : (x.cage_loads != y.cage_loads || x.cage_stores != y.cage_stores ||
                   x.loads != y.loads || x.tolerated_reads != y.tolerated_reads)) {
    return "counters";
  }
  return {};
}

inline std::vector<TraceEntry> WithoutHooks(const std::vector<TraceEntry>& trace) {
  std::vector<TraceEntry> out;
  out.reserve(trace.size());
  for (const TraceEntry& e : trace) {
    if (e.op != ir::Opcode::kHook) out.push_back(e);
  }
  return out;
}

// Instrumented (pruned and unpruned) programs run with an all-zero mask
// stream are indistinguishable from the original program.
inline CheckResult CheckZeroMaskTransparency(const std::vector<std::pair<std::string, ir::Program>>& programs) {
  CheckResult r{"zero-mask transparency"};
  for (const auto& [id, program] : programs) {
    for (bool fork_point : {true, false}) {
      VmOptions options;
      options.seed_id = id;
      options.fork_point = fork_point;
      Vm reference(std::make_shared<const CompiledProgram>(Uninstrumented(program)), options);
      Observed want = RunFromEntry(reference, {}, {}, true);
      for (bool prune : {true, false}) {
        ++r.cases;
        Vm vm(Compile(program, prune), options);
        Observed got = RunFromEntry(vm, {}, {}, true);
        std::string where = fmt::format("{} prune={} fork={}", id, prune, fork_point);
        if (!SameOutcome(want.outcome, got.outcome)) {
          r.Fail(fmt::format("{}: outcome {} vs {}", where, DescribeOutcome(want.outcome),
                             DescribeOutcome(got.outcome)));
        } else if (want.edges != got.edges) {
          r.Fail(where + ": edge trace differs");
        } else if (want.trace != WithoutHooks(got.trace)) {
          r.Fail(where + ": instruction trace differs");
        } else if (std::string d = DiffState(reference.state(), vm.state(), false); !d.empty()) {
          r.Fail(where + ": final state differs in " + d);
        }
      }
    }
  }
  return r;
}

// XOR write-back on raw bytes: the returned value and the memory are
// original ^ mask, bits outside the mask never change, and masks apply in
// stream order.
inline CheckResult CheckXorAlgebra(uint64_t seed, int cases) {
  CheckResult r{"xor localization"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    ++r.cases;
    const unsigned width = 1u << (rng() % 4);
    std::vector<uint8_t> mem(16);
    for (uint8_t& b : mem) b = static_cast<uint8_t>(rng());
    const std::vector<uint8_t> before = mem;
    const unsigned off = static_cast<unsigned>(rng() % (16 - width + 1));
    std::vector<uint8_t> stream(width);
    for (uint8_t& b : stream) b = static_cast<uint8_t>(rng());
    MaskInterceptor interceptor(stream);
    const uint64_t mask = ReadLittleEndian(stream);
    const uint64_t original = ReadLittleEndian({before.data() + off, width});
    const uint64_t got = interceptor.Intercept(0, kDefaultCageBase + off, {mem.data() + off, width});
    bool ok = got == (original ^ mask) && (got & ~mask) == (original & ~mask) &&
              ReadLittleEndian({mem.data() + off, width}) == got &&
              interceptor.consumed() == width;
    for (unsigned j = 0; j < mem.size() && ok; ++j) {
      if ((j < off || j >= off + width) && mem[j] != before[j]) ok = false;
    }
    if (!ok) r.Fail(fmt::format("width {} off {} original {:#x} mask {:#x} got {:#x}", width, off, original, mask, got));
  }
  return r;
}

// Program-level persistence: two hooked loads of the same cage bytes see
// original ^ m1 and then original ^ m1 ^ m2; an unhooked read through a
// stack copy sees the final value; no other cage byte changes.
inline CheckResult CheckXorPersistence(uint64_t seed, int cases) {
  CheckResult r{"xor persistence"};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cases; ++i) {
    ++r.cases;
    const unsigned width = 1u << (rng() % 4);
    const unsigned off = static_cast<unsigned>(rng() % (64 - width + 1));
    uint64_t words[8];
    std::string text =
        "fn main() {\n  frame { copy: 64 }\n  b0:\n    const r0, 64\n    cage_alloc r1, r0\n";
    for (int w = 0; w < 8; ++w) {
      words[w] = rng();
      text += fmt::format("    const r{0}, {1}\n    add r{2}, r1, r{0}\n    const r{3}, {4:#x}\n"
                          "    store r{2}, r{3}, 8\n",
                          20 + w, 8 * w, 30 + w, 40 + w, words[w]);
    }
    text += fmt::format(
        "    fuzz_start\n    const r4, {}\n    add r5, r1, r4\n    load r6, r5, {}\n"
        "    load r7, r5, {}\n    alloca r11, copy\n    memcopy r11, r1, r0\n"
        "    add r12, r11, r4\n    load r13, r12, {}\n    halt\n}}\n",
        off, width, width, width);
    uint8_t pattern[64];
    for (int w = 0; w < 8; ++w) WriteLittleEndian({pattern + 8 * w, 8}, words[w]);
    std::vector<uint8_t> stream(2 * width);
    for (uint8_t& b : stream) {
      if (rng() % 3) b = static_cast<uint8_t>(rng());
    }
    const uint64_t m1 = ReadLittleEndian({stream.data(), width});
    const uint64_t m2 = ReadLittleEndian({stream.data() + width, width});
    const uint64_t original = ReadLittleEndian({pattern + off, width});

    auto program = CompileText(text);
    Vm vm(program, {});
    Observed o = RunFromEntry(vm, stream, {}, false);
    const VmState& st = vm.state();
    const uint64_t* regs = st.regs.data() + st.frames.front().reg_base;
    std::string bad;
    if (!o.outcome.finished()) bad = "did not finish";
    else if (o.records.size() != 2) bad = fmt::format("{} interceptions", o.records.size());
    else if (regs[6] != (original ^ m1)) bad = "first load";
    else if (o.records[1].original != (original ^ m1)) bad = "second load did not see the first mask";
    else if (regs[7] != (original ^ m1 ^ m2)) bad = "second load";
    else if (regs[13] != (original ^ m1 ^ m2)) bad = "unhooked read";
    else if (o.consumed != 2 * width) bad = "stream accounting";
    else {
      uint8_t expect[64];
      std::memcpy(expect, pattern, 64);
      WriteLittleEndian({expect + off, width}, original ^ m1 ^ m2);
      if (std::memcmp(expect, st.cage.At(0), 64) != 0) bad = "cage bytes outside the load changed";
    }
    if (!bad.empty()) {
      r.Fail(fmt::format("width {} off {} m1 {:#x} m2 {:#x}: {}", width, off, m1, m2, bad));
    }
  }
  return r;
}

// Generated access patterns over stack, globals, live heap, freed heap and
// unallocated trusted memory. Reads are always outside the accessed object
// (at least one byte); writes likewise.
struct OobAccess {
  std::string setup;  // defines r100 as the address
  uint64_t first_bad = 0;
  CrashKind kind = CrashKind::kOobWrite;
  unsigned width = 1;
};

class OobGenerator {
 public:
  explicit OobGenerator(uint64_t seed) : rng_(seed) {}

  // Fixed objects: stack slot `s`, global `g`, live heap r3, freed heap r4.
  std::string Prologue() {
    slot_ = 1 + rng_() % 64;
    global_ = 1 + rng_() % 32;
    heap_ = 1 + rng_() % 64;
    std::string text = "global g [";
    for (uint64_t i = 0; i < global_; ++i) text += i ? ", 0" : "0";
    text += fmt::format("]\n\nfn main() {{\n  frame {{ s: {} }}\n  b0:\n", slot_);
    text += fmt::format(
        "    alloca r0, s\n    global_addr r1, g\n    const r2, {}\n    heap_alloc r3, r2\n"
        "    heap_alloc r4, r2\n    free r4\n",
        heap_);
    return text;
  }

  // Addresses of the prologue objects, known from the bump allocators.
  void Bind(uint64_t stack, uint64_t global, uint64_t heap, uint64_t freed) {
    bases_ = {stack, global, heap, freed};
  }

  OobAccess Next(int reg) {
    OobAccess a;
    a.width = 1u << (rng_() % 4);
    const int target = static_cast<int>(rng_() % 5);
    const uint64_t sizes[] = {slot_, global_, heap_, heap_};
    const int base_reg[] = {0, 1, 3, 4};
    auto rel = [&](int64_t off, uint64_t base) {
      a.setup = fmt::format("    const r{}, {}\n    add r{}, r{}, r{}\n", reg, off, reg + 1,
                            base_reg[target], reg);
      return base + static_cast<uint64_t>(off);
    };
    if (target == 4) {
      // Unallocated trusted memory, inside or between the regions.
      static const uint64_t kRanges[][2] = {{kHeapRegionBase + 0x100'0000, kHeapRegionBase + 0x800'0000},
                                            {0x3000'0000, 0x7000'0000},
                                            {0x8000'0000, 0xf000'0000},
                                            {0x1000, 0x1000'0000}};
      const auto& range = kRanges[rng_() % 4];
      uint64_t addr = range[0] + rng_() % (range[1] - range[0]);
      a.setup = fmt::format("    const r{}, {:#x}\n    or r{}, r{}, r{}\n", reg, addr, reg + 1, reg,
                            reg);
      a.first_bad = addr;
      return a;
    }
    const uint64_t size = sizes[target];
    const uint64_t base = bases_[target];
    if (target == 3) {
      // Anywhere inside the freed allocation, possibly running past its end.
      int64_t off = static_cast<int64_t>(rng_() % size);
      a.first_bad = rel(off, base);
      a.kind = CrashKind::kUafWrite;
      return a;
    }
    if (rng_() % 2) {
      // Before the object, within its leading redzone; may straddle in.
      int64_t off = -static_cast<int64_t>(1 + rng_() % TrustedRegion::kRedzone);
      a.first_bad = rel(off, base);
    } else {
      // Straddles or follows the end, staying inside the trailing redzone.
      const int64_t lo = static_cast<int64_t>(size) - a.width + 1;
      const int64_t hi = static_cast<int64_t>(size + TrustedRegion::kRedzone) - a.width;
      int64_t off = lo + static_cast<int64_t>(rng_() % static_cast<uint64_t>(hi - lo + 1));
      // Objects narrower than the access make it start before the object.
      uint64_t addr = rel(off, base);
      a.first_bad = off < 0 ? addr : std::max(addr, base + size);
    }
    return a;
  }

 private:
  std::mt19937_64 rng_;
  uint64_t slot_ = 1, global_ = 1, heap_ = 1;
  std::vector<uint64_t> bases_;
};

// Trusted-domain out-of-bounds reads are tolerated (poison, no crash);
// every trusted-domain out-of-bounds write is a crash at the first bad byte.
inline CheckResult CheckOracleAsymmetry(uint64_t seed, int read_programs, int reads_per_program,
                                        int write_programs) {
  CheckResult r{"oracle asymmetry"};
  OobGenerator gen(seed);
  auto run = [&](const std::string& prologue, const std::string& body,
                 uint64_t* tolerated) -> ExecOutcome {
    auto program = CompileText(prologue + body + "    halt\n}\n");
    Vm vm(program, {});
    Observed o = RunFromEntry(vm, {}, {}, false);
    *tolerated = vm.state().counters.tolerated_reads;
    return o.outcome;
  };
  for (int p = 0; p < read_programs + write_programs; ++p) {
    const std::string prologue = gen.Prologue();
    // Object addresses come from a probe run of the prologue alone.
    auto program_probe = CompileText(prologue + "    halt\n}\n");
    Vm probe(program_probe, {});
    RunFromEntry(probe, {}, {}, false);
    const auto& heap = probe.state().heap.allocations();
    gen.Bind(probe.state().stack.allocations().at(0).base,
             probe.state().globals.allocations().at(0).base, heap.at(0).base, heap.at(1).base);

    const bool writes = p >= read_programs;
    const int reads = writes ? static_cast<int>(p % 4) : reads_per_program;
    std::string body;
    int reg = 200;
    for (int i = 0; i < reads; ++i, reg += 3) {
      OobAccess a = gen.Next(reg);
      body += a.setup + fmt::format("    load r{}, r{}, {}\n", reg + 2, reg + 1, a.width);
    }
    OobAccess w;
    if (writes) {
      w = gen.Next(reg);
      body += w.setup + fmt::format("    store r{}, r{}, {}\n", reg + 1, reg, w.width);
    }
    ++r.cases;
    uint64_t tolerated = 0;
    ExecOutcome out = run(prologue, body, &tolerated);
    if (tolerated != static_cast<uint64_t>(reads)) {
      r.Fail(fmt::format("program {}: {} of {} reads tolerated", p, tolerated, reads));
      continue;
    }
    if (!writes) {
      if (!out.finished()) r.Fail(fmt::format("program {}: reads only, got {}", p, DescribeOutcome(out)));
      continue;
    }
    if (!out.crashed() || out.crash->kind != w.kind || out.crash->address != w.first_bad ||
        out.crash->width != w.width || SandboxLayout{}.contains(out.crash->address)) {
      r.Fail(fmt::format("program {}: expected {} at {:#x} width {}, got {} at {:#x}", p,
                         CrashKindName(w.kind), w.first_bad, w.width, DescribeOutcome(out),
                         out.crash ? out.crash->address : 0));
    }
  }
  return r;
}

// Straight-through execution from the entry is indistinguishable from
// restoring the fork-point snapshot and running the same mask stream:
// outcome, interception records, final state and post-fork edge trace.
// Also checks stream accounting on every run.
inline CheckResult CheckSnapshotTransparency(const Suite& suite, int masks_per_program,
                                             uint64_t seed, uint64_t max_steps) {
  CheckResult r{"snapshot transparency"};
  std::mt19937_64 rng(seed);
  for (const SuiteEntry& entry : suite.entries) {
    ExecContext context;
    context.limits.max_steps = max_steps;
    SeedExecutor exec(entry.program, entry.id, context);
    std::vector<InterceptionRecord> snap_records;
    exec.set_interception_log(&snap_records);
    // Both paths get the same step budget after the fork point.
    ExecLimits straight_limits = context.limits;
    straight_limits.max_steps += exec.snapshot().state.counters.steps;
    VmOptions options;
    options.seed_id = entry.id;
    Vm vm(Compile(entry.program), options);
    std::optional<size_t> prefix;
    for (int i = 0; i < masks_per_program; ++i) {
      ++r.cases;
      std::vector<uint8_t> mask = i == 0 ? std::vector<uint8_t>{} : RandomMask(rng);
      Observed straight = RunFromEntry(vm, mask, straight_limits, false);
      std::vector<EdgeId> snap_edges;
      ExecObservers observers;
      observers.edge_trace = &snap_edges;
      ExecOutcome snap = exec.Run(mask, observers);
      const std::string where = fmt::format("{} mask {}", entry.id, HexEncode(mask));

      uint64_t widths = 0;
      for (const InterceptionRecord& rec : straight.records) {
        if (rec.stream_offset != widths) r.Fail(where + ": stream offset out of order");
        widths += rec.width;
      }
      if (widths != straight.consumed) r.Fail(where + ": consumed bytes != sum of widths");

      if (!SameOutcome(straight.outcome, snap)) {
        r.Fail(fmt::format("{}: {} vs {}", where, DescribeOutcome(straight.outcome),
                           DescribeOutcome(snap)));
        continue;
      }
      if (straight.records != snap_records) {
        r.Fail(where + ": interception records differ");
        continue;
      }
      const size_t n = snap_edges.size();
      if (straight.edges.size() < n ||
          !std::equal(snap_edges.begin(), snap_edges.end(), straight.edges.end() - n) ||
          (prefix && *prefix != straight.edges.size() - n)) {
        r.Fail(where + ": post-fork edge trace differs");
        continue;
      }
      prefix = straight.edges.size() - n;
      if (std::string d = DiffState(vm.state(), exec.vm().state(), true); !d.empty()) {
        r.Fail(where + ": final state differs in " + d);
      }
    }
  }
  return r;
}

// Two executors, or one executor twice, produce identical runs.
inline CheckResult CheckDeterminism(const Suite& suite, int masks_per_program, uint64_t seed,
                                    uint64_t max_steps) {
  CheckResult r{"double-run determinism"};
  std::mt19937_64 rng(seed);
  for (const SuiteEntry& entry : suite.entries) {
    ExecContext context;
    context.limits.max_steps = max_steps;
    SeedExecutor a(entry.program, entry.id, context);
    SeedExecutor b(entry.program, entry.id, context);
    std::vector<InterceptionRecord> ra, rb;
    a.set_interception_log(&ra);
    b.set_interception_log(&rb);
    for (int i = 0; i < masks_per_program; ++i) {
      ++r.cases;
      std::vector<uint8_t> mask = RandomMask(rng);
      std::vector<EdgeId> e1, e2, e3;
      ExecOutcome o1 = a.Run(mask, {nullptr, &e1});
      auto r1 = ra;
      ExecOutcome o2 = b.Run(mask, {nullptr, &e2});
      if (!SameOutcome(o1, o2) || e1 != e2 || r1 != rb ||
          !DiffState(a.vm().state(), b.vm().state(), true).empty()) {
        r.Fail(fmt::format("{} mask {}: two executors differ", entry.id, HexEncode(mask)));
        continue;
      }
      ExecOutcome o3 = a.Run(mask, {nullptr, &e3});
      if (!SameOutcome(o1, o3) || e1 != e3 || r1 != ra) {
        r.Fail(fmt::format("{} mask {}: rerun differs", entry.id, HexEncode(mask)));
      }
    }
  }
  return r;
}

// Under prune=off every load is hooked, so the trace shows every address a
// load used. No Uninteresting load may ever see a cage address, and each
// in-cage load is preceded by exactly one hook on the same address, which
// intercepts once faults are armed.
struct PruningCheck {
  CheckResult soundness{"pruning soundness"};
  CheckResult completeness{"instrumentation completeness"};
  uint64_t uninteresting_executions = 0;
  uint64_t cage_load_executions = 0;
};

inline PruningCheck CheckPruning(const Suite& suite, int masks_per_program, uint64_t seed,
                                 uint64_t max_steps) {
  PruningCheck out;
  std::mt19937_64 rng(seed);
  const SandboxLayout layout;
  for (const SuiteEntry& entry : suite.entries) {
    auto program = Compile(entry.program, /*prune=*/false);
    std::map<InstrSite, LoadClassKind> classes;
    for (const LoadClass& c : program->source().classes) classes[c.site] = c.kind;
    for (bool fork_point : {true, false}) {
      VmOptions options;
      options.fork_point = fork_point;
      Vm vm(program, options);
      for (int i = 0; i < masks_per_program; ++i) {
        std::vector<uint8_t> mask = i == 0 ? std::vector<uint8_t>{} : RandomMask(rng);
        Observed o = RunFromEntry(vm, mask, {max_steps, ExecLimits{}.max_call_depth}, true);
        const std::string where = fmt::format("{} fork={} mask {}", entry.id, fork_point, HexEncode(mask));
        ++out.soundness.cases;
        ++out.completeness.cases;
        bool armed = !fork_point || !program->has_fuzz_start();
        uint64_t armed_hooks = 0, startup_hooks = 0;
        for (size_t k = 0; k < o.trace.size(); ++k) {
          const TraceEntry& e = o.trace[k];
          if (e.op == ir::Opcode::kFuzzStart) armed = true;
          const bool in_cage = e.has_access && layout.ContainsRange(e.address, e.width);
          if (e.op == ir::Opcode::kHook && in_cage) ++(armed ? armed_hooks : startup_hooks);
          if (e.op != ir::Opcode::kLoad) continue;
          InstrSite site{e.function, e.block, e.index};
          const bool uninteresting = classes.at(site) == LoadClassKind::kUninteresting;
          out.uninteresting_executions += uninteresting;
          if (!in_cage) continue;
          ++out.cage_load_executions;
          if (uninteresting) {
            out.soundness.Fail(fmt::format("{}: Uninteresting load {}:{}:{} read cage address {:#x}",
                                           where, e.function, e.block, e.index, e.address));
          }
          const bool hooked = k > 0 && o.trace[k - 1].op == ir::Opcode::kHook &&
                              o.trace[k - 1].address == e.address &&
                              o.trace[k - 1].index == e.index;
          if (!hooked) out.completeness.Fail(where + ": in-cage load without its hook");
        }
        const ExecCounters& c = vm.state().counters;
        if (armed_hooks != o.records.size() || armed_hooks != c.interceptions ||
            startup_hooks != c.pre_fork_interceptions) {
          out.completeness.Fail(fmt::format("{}: {} armed hooks, {} interceptions, {} records",
                                            where, armed_hooks, c.interceptions, o.records.size()));
        }
      }
    }
  }
  return out;
}

// Mask chunks the interceptor hands out before the first post-startup
// instruction when the fork point is disabled, recounted independently from
// the instruction trace. Both must agree with the snapshot's own count.
struct StartupCount {
  uint64_t interceptions_before_fork = 0;  // interceptor calls, fork point disabled
  uint64_t trace_recount = 0;              // in-cage hooks before fuzz_start in the trace
  uint64_t snapshot_count = 0;             // pre_fork_interceptions of the snapshot
  bool consistent() const {
    return interceptions_before_fork == trace_recount && trace_recount == snapshot_count;
  }
};

class CountingInterceptor final : public LoadInterceptor {
 public:
  explicit CountingInterceptor(const std::vector<TraceEntry>* trace) : trace_(trace) {}
  uint64_t Intercept(uint32_t, uint64_t, std::span<uint8_t> bytes) override {
    calls_.push_back(trace_->size());
    return ReadLittleEndian(bytes);
  }
  const std::vector<size_t>& calls() const { return calls_; }

 private:
  const std::vector<TraceEntry>* trace_;
  std::vector<size_t> calls_;  // trace length at each call
};

inline StartupCount CountStartupChunks(const ir::Program& program) {
  StartupCount count;
  auto compiled = Compile(program);
  VmOptions options;
  options.fork_point = false;
  std::vector<TraceEntry> trace;
  Vm vm(compiled, options);
  vm.observers().trace = &trace;
  CountingInterceptor interceptor(&trace);
  vm.Run(interceptor, {});
  size_t fork = trace.size();
  for (size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].op == ir::Opcode::kFuzzStart) {
      fork = i;
      break;
    }
  }
  for (size_t at : interceptor.calls()) count.interceptions_before_fork += at <= fork;
  const SandboxLayout layout;
  for (size_t i = 0; i < fork; ++i) {
    const TraceEntry& e = trace[i];
    count.trace_recount += e.op == ir::Opcode::kHook && layout.ContainsRange(e.address, e.width);
  }
  count.snapshot_count = SnapshotAtFuzzStart(compiled, {}).pre_fork_interceptions();
  return count;
}

// Random single-field mutations of valid programs are either still valid or
// rejected with the error class of the mutated field.
inline CheckResult CheckValidatorMutations(const Suite& suite, int per_program, uint64_t seed) {
  CheckResult r{"validator mutations"};
  std::mt19937_64 rng(seed);
  using ir::Opcode;
  for (const SuiteEntry& entry : suite.entries) {
    bool has_fuzz_start = false;
    for (const ir::Function& fn : entry.program.functions)
      for (const ir::BasicBlock& b : fn.blocks)
        for (const ir::Instr& in : b.instrs) has_fuzz_start |= in.op == Opcode::kFuzzStart;

    for (int m = 0; m < per_program; ++m) {
      ir::Program p = entry.program;
      ir::Function& fn = p.functions[rng() % p.functions.size()];
      ir::BasicBlock& block = fn.blocks[rng() % fn.blocks.size()];
      const size_t idx = rng() % block.instrs.size();
      ir::Instr& in = block.instrs[idx];
      // Acceptable errors. Mutations with a definite outcome also set
      // must_fail (or must_pass).
      std::vector<std::string> allowed;
      std::string what;
      bool must_fail = false;
      bool must_pass = false;
      switch (rng() % 9) {
        case 0:
          if (in.op != Opcode::kLoad && in.op != Opcode::kStore) continue;
          in.width = static_cast<uint8_t>(rng() % 10);
          what = fmt::format("width {}", in.width);
          allowed = {"illegal width"};
          must_fail = !ir::IsLegalWidth(in.width);
          must_pass = !must_fail;
          break;
        case 1:
          if (in.operands.empty()) continue;
          in.operands[rng() % in.operands.size()] =
              static_cast<ir::Reg>(rng() % (fn.RegisterCount() + 2));
          what = "operand register";
          allowed = {"used before definition"};
          break;
        case 2:
          if (in.operands.empty()) continue;
          in.operands.pop_back();
          what = "dropped operand";
          allowed = {"wrong operand count", "arguments"};
          must_fail = in.op != Opcode::kRet;
          must_pass = !must_fail;
          break;
        case 3:
          must_fail = !(in.op == Opcode::kRet && in.operands.empty());
          in.operands.push_back(in.operands.empty() ? 0 : in.operands.front());
          what = "extra operand";
          allowed = {"wrong operand count", "arguments", "used before definition"};
          break;
        case 4:
          if (in.dst) {
            in.dst.reset();
            allowed = {"missing destination", "used before definition"};
          } else {
            in.dst = fn.RegisterCount();
            allowed = {"unexpected destination"};
            must_pass = in.op == Opcode::kCall;
          }
          must_fail = in.op != Opcode::kCall;
          what = "destination";
          break;
        case 5: {
          if (in.targets.empty()) continue;
          const bool known = rng() % 2;
          in.targets[rng() % in.targets.size()] =
              known ? fn.blocks[rng() % fn.blocks.size()].name : "nowhere";
          what = "branch target";
          allowed = {"unknown block", "used before definition"};
          must_fail = !known;
          break;
        }
        case 6:
          if (in.symbol.empty()) continue;
          in.symbol += "_x";
          what = "symbol";
          allowed = {"unknown stack slot", "unknown global", "unknown function"};
          must_fail = true;
          break;
        case 7: {
          ir::Instr extra;
          extra.op = rng() % 2 ? Opcode::kFuzzStart : Opcode::kHalt;
          block.instrs.insert(block.instrs.begin() + static_cast<long>(idx), extra);
          what = fmt::format("inserted {}", ir::OpcodeName(extra.op));
          if (extra.op == Opcode::kHalt) {
            allowed = {"terminator in the middle"};
            must_fail = true;
          } else if (has_fuzz_start) {
            allowed = {"more than one fuzz_start"};
            must_fail = true;
          } else {
            must_pass = true;
          }
          break;
        }
        case 8:
          block.instrs.pop_back();
          what = "removed terminator";
          allowed = {"does not end in a terminator"};
          must_fail = true;
          break;
      }
      ++r.cases;
      const std::string where = fmt::format("{} {}:{}:{} {}", entry.id, fn.name, block.name, idx, what);
      try {
        ir::Validate(p);
        if (must_fail) r.Fail(where + ": accepted");
      } catch (const ir::ValidateError& e) {
        bool matched = false;
        for (const std::string& a : allowed) matched |= std::string(e.what()).find(a) != std::string::npos;
        if (!matched || must_pass) {
          r.Fail(fmt::format("{}: unexpected error '{}'", where, e.what()));
        }
      } catch (const std::exception& e) {
        r.Fail(fmt::format("{}: threw non-validation error '{}'", where, e.what()));
      }
    }
  }
  return r;
}

}  // namespace sbxforge::testing

#endif  // SBXFORGE_TESTS_INVARIANTS_H_
