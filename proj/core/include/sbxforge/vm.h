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

// Deterministic sandbox VM.
//
// The VM executes an (instrumented) mini-IR program over a split address
// space. Its sanitizer implements the sandbox attacker model:
//   - any access inside the cage succeeds (the attacker owns the cage);
//   - out-of-bounds / freed trusted reads are tolerated and return a poison
//     value;
//   - out-of-bounds / freed trusted writes are sandbox escapes and stop the
//     execution with a CrashReport;
//   - table_put with an index beyond the table and a switch with no matching
//     case and no default are crashes of their own kind.
//
// `hook` pseudo-instructions perform the inline cage check and, once faults
// are armed, hand in-cage loads to a LoadInterceptor. Faults are armed when
// `fuzz_start` executes, or from the entry when the program has no fork
// point (or the fork point is disabled).
#ifndef SBXFORGE_VM_H_
#define SBXFORGE_VM_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbxforge/cfg.h"
#include "sbxforge/crash_report.h"
#include "sbxforge/instrument.h"
#include "sbxforge/interceptor.h"
#include "sbxforge/ir.h"
#include "sbxforge/memory.h"

namespace sbxforge {

inline constexpr uint64_t kDefaultPoison = 0x5150'5150'5150'5150;
inline constexpr uint32_t kDefaultTableCapacity = 256;

// Limits apply per Run() call, so a run resumed from a snapshot gets the
// full step budget after the fork point.
struct ExecLimits {
  uint64_t max_steps = 10'000'000;
  uint32_t max_call_depth = 512;
};

struct VmOptions {
  SandboxLayout layout;
  uint64_t poison = kDefaultPoison;
  uint32_t table_capacity = kDefaultTableCapacity;
  // When false, fuzz_start is a no-op and faults are armed from the entry.
  bool fork_point = true;
  std::string seed_id;
};

// Flattened, pre-resolved form of an InstrumentedProgram. Immutable and
// shareable between VMs.
class CompiledProgram {
 public:
  explicit CompiledProgram(InstrumentedProgram program);

  struct Op {
    ir::Opcode code = ir::Opcode::kHalt;
    uint8_t width = 0;
    ir::CmpPred pred = ir::CmpPred::kEq;
    bool has_dst = false;
    uint32_t dst = 0;
    uint32_t a = 0;
    uint32_t b = 0;
    uint32_t c = 0;
    uint64_t imm = 0;
    uint32_t target_true = 0;   // pc
    uint32_t target_false = 0;  // pc
    uint32_t edge_true = 0;
    uint32_t edge_false = 0;
    uint32_t aux = 0;   // switch table / call argument offset
    uint32_t aux2 = 0;  // call argument count / call edge
    uint32_t block = 0;
    uint32_t orig_index = 0;  // index in the uninstrumented block
  };

  struct SwitchTable {
    std::vector<uint64_t> values;
    std::vector<uint32_t> pcs;
    std::vector<uint32_t> edges;
    bool has_default = false;
    uint32_t default_pc = 0;
    uint32_t default_edge = 0;
  };

  struct Func {
    std::string name;
    uint32_t params = 0;
    uint32_t num_regs = 0;
    std::vector<Op> code;
    std::vector<uint64_t> slot_sizes;
  };

  const InstrumentedProgram& source() const { return source_; }
  const ir::Program& program() const { return source_.program; }
  const EdgeMap& edges() const { return edges_; }
  const std::vector<Func>& functions() const { return functions_; }
  uint32_t entry() const { return entry_; }
  bool has_fuzz_start() const { return has_fuzz_start_; }
  const SwitchTable& switch_table(uint32_t i) const { return switches_[i]; }
  const std::vector<uint32_t>& call_args() const { return call_args_; }

 private:
  InstrumentedProgram source_;
  EdgeMap edges_;
  std::vector<Func> functions_;
  std::vector<SwitchTable> switches_;
  std::vector<uint32_t> call_args_;
  uint32_t entry_ = 0;
  bool has_fuzz_start_ = false;
};

// Per-execution counters (cumulative from the entry of the program; the
// snapshot carries the pre-fork-point part).
struct ExecCounters {
  uint64_t steps = 0;           // instructions plus memcopy charge
  uint64_t hook_checks = 0;     // executed hooks (inline checks)
  uint64_t interceptions = 0;   // hooked loads inside the cage, faults armed
  uint64_t pre_fork_interceptions = 0;  // hooked cage loads before the fork point
  uint64_t cage_loads = 0;      // executed load instructions hitting the cage
  uint64_t cage_stores = 0;     // executed stores (and memcopy dsts) in the cage
  uint64_t loads = 0;           // executed load instructions
  uint64_t tolerated_reads = 0;

  friend bool operator==(const ExecCounters&, const ExecCounters&) = default;
};

enum class ExecStatus : uint8_t { kFinished, kCrash, kLimitExceeded };
enum class LimitKind : uint8_t { kNone, kSteps, kCallDepth, kAllocation };

struct ExecOutcome {
  ExecStatus status = ExecStatus::kFinished;
  std::optional<CrashReport> crash;
  LimitKind limit = LimitKind::kNone;
  uint64_t return_value = 0;

  bool finished() const { return status == ExecStatus::kFinished; }
  bool crashed() const { return status == ExecStatus::kCrash; }
};

struct TraceEntry {
  uint32_t function = 0;
  uint32_t block = 0;
  uint32_t index = 0;  // original index; hooks report the load they precede
  ir::Opcode op = ir::Opcode::kHalt;
  bool has_access = false;
  uint64_t address = 0;
  uint32_t width = 0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

// "fn:block:idx OP [addr width]"
std::string FormatTraceEntry(const CompiledProgram& program, const TraceEntry& entry);

// Complete mutable machine state. Copyable; a Snapshot is one of these.
struct VmState {
  struct Frame {
    uint32_t function = 0;
    uint32_t pc = 0;
    uint32_t reg_base = 0;
    uint64_t slot_base = 0;
    TrustedRegion::Mark stack_mark{};
    bool has_ret_dst = false;
    uint32_t ret_dst = 0;
    uint32_t return_edge = 0;
  };

  explicit VmState(const SandboxLayout& layout);

  TrustedRegion globals{kGlobalRegionBase, kRegionSpan};
  TrustedRegion heap{kHeapRegionBase, kRegionSpan};
  TrustedRegion stack{kStackRegionBase, kRegionSpan};
  CageMemory cage;
  std::vector<uint64_t> table;
  std::vector<uint64_t> regs;
  std::vector<Frame> frames;
  std::vector<uint64_t> global_addrs;
  bool armed = false;
  bool done = false;
  ExecCounters counters;
};

struct Snapshot {
  VmState state;
  uint64_t id = 0;
  // False when the program has no reachable fork point and the snapshot is
  // the entry state.
  bool at_fuzz_start = false;

  uint64_t pre_fork_interceptions() const { return state.counters.pre_fork_interceptions; }
};

class SnapshotUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Observation hooks for tests and tooling; all optional.
struct ExecObservers {
  std::vector<TraceEntry>* trace = nullptr;
  std::vector<EdgeId>* edge_trace = nullptr;
  // Indexed by hook site id: hooked executions whose address was in the cage.
  std::vector<uint64_t>* site_cage_hits = nullptr;
};

class Vm {
 public:
  Vm(std::shared_ptr<const CompiledProgram> program, VmOptions options);

  // Fresh state at the program entry.
  void Reset();
  // Runs to completion, crash or limit. When `stop_at_fork_point` is set and
  // faults are not yet armed, execution pauses right after fuzz_start with
  // status kFinished and paused() == true.
  ExecOutcome Run(LoadInterceptor& interceptor, const ExecLimits& limits,
                  bool stop_at_fork_point = false);
  bool paused() const { return paused_; }

  Snapshot TakeSnapshot() const;
  void Restore(const Snapshot& snapshot);

  VmState& state() { return state_; }
  const VmState& state() const { return state_; }
  const CompiledProgram& program() const { return *program_; }
  const VmOptions& options() const { return options_; }
  ExecObservers& observers() { return observers_; }

  // Edges hit since the last ClearCoverage().
  const std::vector<EdgeId>& touched_edges() const { return touched_; }
  void ClearCoverage();

 private:
  void Init();
  bool PushFrame(uint32_t function, uint32_t arg_offset, uint32_t arg_count,
                 const VmState::Frame* caller, bool has_ret_dst, uint32_t ret_dst,
                 uint32_t return_edge);
  void HitEdge(EdgeId id) {
    if (!edge_hit_[id]) {
      edge_hit_[id] = 1;
      touched_.push_back(id);
    }
    if (observers_.edge_trace) observers_.edge_trace->push_back(id);
  }

  std::shared_ptr<const CompiledProgram> program_;
  VmOptions options_;
  VmState state_;
  ExecObservers observers_;
  std::vector<uint8_t> edge_hit_;
  std::vector<EdgeId> touched_;
  const Snapshot* restored_from_ = nullptr;
  uint64_t restored_id_ = 0;
  bool paused_ = false;
};

// Straight-through execution from the entry.
ExecOutcome Execute(std::shared_ptr<const CompiledProgram> program, const VmOptions& options,
                    LoadInterceptor& interceptor, const ExecLimits& limits = {},
                    ExecObservers observers = {});

// Runs the startup phase with all faults suppressed and returns the state
// right after fuzz_start. Programs without fuzz_start (or with the fork point
// disabled) yield the entry state. Throws SnapshotUnreachable if fuzz_start
// is not reached.
Snapshot SnapshotAtFuzzStart(std::shared_ptr<const CompiledProgram> program,
                             const VmOptions& options, const ExecLimits& limits = {});

}  // namespace sbxforge

#endif  // SBXFORGE_VM_H_
