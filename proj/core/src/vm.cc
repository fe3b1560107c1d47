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


#include "sbxforge/vm.h"

#include <algorithm>
#include <atomic>
#include <cstring>

#include <fmt/format.h>

namespace sbxforge {
namespace {

using ir::Opcode;
using Op = CompiledProgram::Op;

constexpr uint64_t kMaxAllocation = 1 << 20;

std::atomic<uint64_t> next_snapshot_id{1};

}  // namespace

CompiledProgram::CompiledProgram(InstrumentedProgram program)
    : source_(std::move(program)), edges_(source_.program) {
  const ir::Program& p = source_.program;
  entry_ = static_cast<uint32_t>(p.FunctionIndex(p.entry));
  for (uint32_t f = 0; f < p.functions.size(); ++f) {
    const ir::Function& fn = p.functions[f];
    Func out;
    out.name = fn.name;
    out.params = fn.params;
    out.num_regs = fn.RegisterCount();
    for (const ir::StackSlot& slot : fn.frame) out.slot_sizes.push_back(slot.size);

    std::vector<uint32_t> block_pc;
    uint32_t pc = 0;
    for (const ir::BasicBlock& block : fn.blocks) {
      block_pc.push_back(pc);
      pc += static_cast<uint32_t>(block.instrs.size());
    }
    auto target_pc = [&](const std::string& name) { return block_pc[fn.BlockIndex(name)]; };
    auto edge_to = [&](uint32_t b, const std::string& name) {
      return edges_.BranchEdge(f, b, static_cast<uint32_t>(fn.BlockIndex(name)));
    };

    for (uint32_t b = 0; b < fn.blocks.size(); ++b) {
      uint32_t orig = 0;
      uint32_t call_index = 0;
      for (const ir::Instr& instr : fn.blocks[b].instrs) {
        Op op;
        op.code = instr.op;
        op.width = instr.width;
        op.pred = instr.pred;
        op.block = b;
        op.orig_index = orig;
        if (instr.dst) {
          op.has_dst = true;
          op.dst = *instr.dst;
        }
        const auto& ops = instr.operands;
        if (!ops.empty()) op.a = ops[0];
        if (ops.size() > 1) op.b = ops[1];
        if (ops.size() > 2) op.c = ops[2];
        op.imm = instr.imm;
        switch (instr.op) {
          case Opcode::kAlloca:
            op.imm = static_cast<uint64_t>(fn.SlotIndex(instr.symbol));
            break;
          case Opcode::kGlobalAddr:
            op.imm = static_cast<uint64_t>(p.GlobalIndex(instr.symbol));
            break;
          case Opcode::kSwitch: {
            SwitchTable table;
            table.values = instr.case_values;
            for (const std::string& t : instr.targets) {
              table.pcs.push_back(target_pc(t));
              table.edges.push_back(edge_to(b, t));
            }
            if (instr.default_target) {
              table.has_default = true;
              table.default_pc = target_pc(*instr.default_target);
              table.default_edge = edge_to(b, *instr.default_target);
            }
            op.aux = static_cast<uint32_t>(switches_.size());
            switches_.push_back(std::move(table));
            break;
          }
          case Opcode::kBr:
            op.target_true = target_pc(instr.targets[0]);
            op.edge_true = edge_to(b, instr.targets[0]);
            break;
          case Opcode::kBrIf:
            op.target_true = target_pc(instr.targets[0]);
            op.target_false = target_pc(instr.targets[1]);
            op.edge_true = edge_to(b, instr.targets[0]);
            op.edge_false = edge_to(b, instr.targets[1]);
            break;
          case Opcode::kCall:
            op.imm = static_cast<uint64_t>(p.FunctionIndex(instr.symbol));
            op.aux = static_cast<uint32_t>(call_args_.size());
            op.aux2 = static_cast<uint32_t>(ops.size());
            call_args_.insert(call_args_.end(), ops.begin(), ops.end());
            op.edge_true = edges_.CallEdge(f, b, call_index);
            op.edge_false = edges_.ReturnEdge(f, b, call_index);
            ++call_index;
            break;
          case Opcode::kRet:
            op.imm = ops.empty() ? 0 : 1;
            break;
          case Opcode::kFuzzStart:
            has_fuzz_start_ = true;
            break;
          default:
            break;
        }
        if (instr.op != Opcode::kHook) ++orig;
        out.code.push_back(op);
      }
    }
    // Hooks report the index of the load they guard.
    for (size_t i = 0; i + 1 < out.code.size(); ++i) {
      if (out.code[i].code == Opcode::kHook) out.code[i].orig_index = out.code[i + 1].orig_index;
    }
    functions_.push_back(std::move(out));
  }
}

std::string FormatTraceEntry(const CompiledProgram& program, const TraceEntry& e) {
  const ir::Function& fn = program.program().functions[e.function];
  std::string line = fmt::format("{}:{}:{} {}", fn.name, fn.blocks[e.block].name, e.index,
                                 ir::OpcodeName(e.op));
  if (e.has_access) line += fmt::format(" 0x{:x} {}", e.address, e.width);
  return line;
}

VmState::VmState(const SandboxLayout& layout) : cage(layout.cage_size) {}

Vm::Vm(std::shared_ptr<const CompiledProgram> program, VmOptions options)
    : program_(std::move(program)), options_(std::move(options)), state_(options_.layout) {
  options_.layout.Check();
  edge_hit_.assign(program_->edges().size(), 0);
  Init();
}

void Vm::Init() {
  state_ = VmState(options_.layout);
  state_.table.assign(options_.table_capacity, 0);
  state_.frames.reserve(64);
  for (const ir::GlobalDecl& global : program_->program().globals) {
    uint64_t addr = *state_.globals.Allocate(global.size());
    std::memcpy(state_.globals.At(addr), global.init.data(), global.init.size());
    state_.global_addrs.push_back(addr);
  }
  state_.armed = !(options_.fork_point && program_->has_fuzz_start());
  PushFrame(program_->entry(), 0, 0, nullptr, false, 0, 0);
  restored_from_ = nullptr;
  restored_id_ = 0;
  paused_ = false;
}

void Vm::Reset() { Init(); }

void Vm::ClearCoverage() {
  for (EdgeId id : touched_) edge_hit_[id] = 0;
  touched_.clear();
}

bool Vm::PushFrame(uint32_t function, uint32_t arg_offset, uint32_t arg_count,
                   const VmState::Frame* caller, bool has_ret_dst, uint32_t ret_dst,
                   uint32_t return_edge) {
  const CompiledProgram::Func& fn = program_->functions()[function];
  VmState::Frame frame;
  frame.function = function;
  frame.pc = 0;
  frame.reg_base = static_cast<uint32_t>(state_.regs.size());
  frame.stack_mark = state_.stack.mark();
  frame.has_ret_dst = has_ret_dst;
  frame.ret_dst = ret_dst;
  frame.return_edge = return_edge;
  frame.slot_base = 0;
  std::vector<uint64_t>& slots = state_.regs;  // slot addresses live after the registers
  const uint32_t caller_base = caller ? caller->reg_base : 0;
  slots.resize(frame.reg_base + fn.num_regs + fn.slot_sizes.size(), 0);
  for (uint32_t i = 0; i < arg_count; ++i) {
    uint32_t src = program_->call_args()[arg_offset + i];
    state_.regs[frame.reg_base + i] = state_.regs[caller_base + src];
  }
  for (size_t s = 0; s < fn.slot_sizes.size(); ++s) {
    std::optional<uint64_t> addr = state_.stack.Allocate(fn.slot_sizes[s]);
    if (!addr) return false;
    state_.regs[frame.reg_base + fn.num_regs + s] = *addr;
  }
  state_.frames.push_back(frame);
  return true;
}

Snapshot Vm::TakeSnapshot() const {
  Snapshot snap{state_, next_snapshot_id.fetch_add(1), paused_};
  snap.state.cage.ClearDirty();
  return snap;
}

void Vm::Restore(const Snapshot& snapshot) {
  // Cage: only pages dirtied since the last restore of the same snapshot.
  CageMemory live_cage = std::move(state_.cage);
  if (restored_from_ == &snapshot && restored_id_ == snapshot.id) {
    live_cage.RestoreDirtyFrom(snapshot.state.cage);
  } else {
    live_cage.CopyFrom(snapshot.state.cage);
  }
  state_.globals = snapshot.state.globals;
  state_.heap = snapshot.state.heap;
  state_.stack = snapshot.state.stack;
  state_.table = snapshot.state.table;
  state_.regs = snapshot.state.regs;
  state_.frames = snapshot.state.frames;
  state_.global_addrs = snapshot.state.global_addrs;
  state_.armed = snapshot.state.armed;
  state_.done = snapshot.state.done;
  state_.counters = snapshot.state.counters;
  state_.cage = std::move(live_cage);
  restored_from_ = &snapshot;
  restored_id_ = snapshot.id;
  paused_ = false;
}

ExecOutcome Vm::Run(LoadInterceptor& interceptor, const ExecLimits& limits,
                    bool stop_at_fork_point) {
  paused_ = false;
  ExecOutcome out;
  VmState& st = state_;
  if (st.done) return out;

  const SandboxLayout layout = options_.layout;
  const uint64_t cage_base = layout.cage_base;
  const uint64_t cage_size = layout.cage_size;
  const auto& funcs = program_->functions();
  uint64_t steps = 0;

  auto region_for = [&](uint64_t addr) -> TrustedRegion* {
    if (st.heap.InRegion(addr)) return &st.heap;
    if (st.stack.InRegion(addr)) return &st.stack;
    if (st.globals.InRegion(addr)) return &st.globals;
    return nullptr;
  };

  auto crash = [&](CrashKind kind, const Op& op, uint32_t function, uint64_t address,
                   uint32_t width) {
    CrashReport report;
    report.kind = kind;
    const ir::Function& fn = program_->program().functions[function];
    report.function = fn.name;
    report.block = fn.blocks[op.block].name;
    report.instr = op.orig_index;
    report.address = address;
    report.width = width;
    report.mask_prefix = interceptor.consumed();
    report.seed_id = options_.seed_id;
    out.status = ExecStatus::kCrash;
    out.crash = std::move(report);
    st.done = true;
    return out;
  };
  auto limit = [&](LimitKind kind) {
    out.status = ExecStatus::kLimitExceeded;
    out.limit = kind;
    st.done = true;
    return out;
  };

  // Tolerant read: trusted OOB/UAF reads yield poison.
  auto read = [&](uint64_t addr, unsigned width) -> uint64_t {
    if (addr - cage_base < cage_size && width <= cage_size - (addr - cage_base)) {
      ++st.counters.cage_loads;
      return ReadLittleEndian({st.cage.At(addr - cage_base), width});
    }
    if (TrustedRegion* region = region_for(addr)) {
      uint64_t bad;
      if (region->Check(addr, width, &bad) == AccessStatus::kOk) {
        return ReadLittleEndian({region->At(addr), width});
      }
    }
    ++st.counters.tolerated_reads;
    return options_.poison & WidthMask(width);
  };

  // Returns the crash kind on a trusted-domain violation.
  auto write = [&](uint64_t addr, unsigned width, uint64_t value, uint64_t* bad,
                   CrashKind* kind) -> bool {
    if (addr - cage_base < cage_size) {
      uint64_t off = addr - cage_base;
      if (width <= cage_size - off) {
        ++st.counters.cage_stores;
        WriteLittleEndian({st.cage.At(off), width}, value);
        st.cage.MarkDirty(off, width);
        return true;
      }
      *bad = cage_base + cage_size;
      *kind = CrashKind::kOobWrite;
      return false;
    }
    TrustedRegion* region = region_for(addr);
    if (!region) {
      *bad = addr;
      *kind = CrashKind::kOobWrite;
      return false;
    }
    AccessStatus status = region->Check(addr, width, bad);
    if (status == AccessStatus::kOk) {
      WriteLittleEndian({region->At(addr), width}, value);
      return true;
    }
    *kind = status == AccessStatus::kFreed ? CrashKind::kUafWrite : CrashKind::kOobWrite;
    return false;
  };

  // Writable / readable bytes available contiguously at addr.
  auto span_at = [&](uint64_t addr, uint8_t** ptr, bool* in_cage) -> uint64_t {
    if (addr - cage_base < cage_size) {
      *ptr = st.cage.At(addr - cage_base);
      *in_cage = true;
      return cage_size - (addr - cage_base);
    }
    *in_cage = false;
    if (TrustedRegion* region = region_for(addr)) {
      uint64_t n = region->Accessible(addr);
      if (n) *ptr = region->At(addr);
      return n;
    }
    return 0;
  };

  for (;;) {
    VmState::Frame& frame = st.frames.back();
    const CompiledProgram::Func& fn = funcs[frame.function];
    const Op& op = fn.code[frame.pc];
    uint64_t* regs = st.regs.data() + frame.reg_base;
    if (++steps > limits.max_steps) return limit(LimitKind::kSteps);
    ++st.counters.steps;
    if (observers_.trace) {
      TraceEntry entry{frame.function, op.block, op.orig_index, op.code, false, 0, 0};
      if (op.code == Opcode::kLoad || op.code == Opcode::kStore || op.code == Opcode::kHook) {
        entry.has_access = true;
        entry.address = regs[op.a];
        entry.width = op.width;
      }
      observers_.trace->push_back(entry);
    }

    switch (op.code) {
      case Opcode::kConst:
        regs[op.dst] = op.imm;
        break;
      case Opcode::kAdd:
        regs[op.dst] = regs[op.a] + regs[op.b];
        break;
      case Opcode::kSub:
        regs[op.dst] = regs[op.a] - regs[op.b];
        break;
      case Opcode::kMul:
        regs[op.dst] = regs[op.a] * regs[op.b];
        break;
      case Opcode::kAnd:
        regs[op.dst] = regs[op.a] & regs[op.b];
        break;
      case Opcode::kOr:
        regs[op.dst] = regs[op.a] | regs[op.b];
        break;
      case Opcode::kXor:
        regs[op.dst] = regs[op.a] ^ regs[op.b];
        break;
      case Opcode::kShl:
        regs[op.dst] = regs[op.a] << (regs[op.b] & 63);
        break;
      case Opcode::kShr:
        regs[op.dst] = regs[op.a] >> (regs[op.b] & 63);
        break;
      case Opcode::kCmp: {
        uint64_t x = regs[op.a];
        uint64_t y = regs[op.b];
        bool r = false;
        switch (op.pred) {
          case ir::CmpPred::kEq:
            r = x == y;
            break;
          case ir::CmpPred::kNe:
            r = x != y;
            break;
          case ir::CmpPred::kUlt:
            r = x < y;
            break;
          case ir::CmpPred::kUle:
            r = x <= y;
            break;
          case ir::CmpPred::kSlt:
            r = static_cast<int64_t>(x) < static_cast<int64_t>(y);
            break;
          case ir::CmpPred::kSle:
            r = static_cast<int64_t>(x) <= static_cast<int64_t>(y);
            break;
        }
        regs[op.dst] = r ? 1 : 0;
        break;
      }
      case Opcode::kAlloca:
        regs[op.dst] = regs[fn.num_regs + op.imm];
        break;
      case Opcode::kGlobalAddr:
        regs[op.dst] = st.global_addrs[op.imm];
        break;
      case Opcode::kHeapAlloc: {
        uint64_t size = regs[op.a];
        std::optional<uint64_t> addr;
        if (size <= kMaxAllocation) addr = st.heap.Allocate(size);
        if (!addr) return limit(LimitKind::kAllocation);
        regs[op.dst] = *addr;
        break;
      }
      case Opcode::kCageAlloc: {
        std::optional<uint64_t> off = st.cage.Allocate(regs[op.a]);
        if (!off) return limit(LimitKind::kAllocation);
        regs[op.dst] = cage_base + *off;
        break;
      }
      case Opcode::kHook: {
        ++st.counters.hook_checks;
        uint64_t addr = regs[op.a];
        // Inline boundary check; the whole access must lie in the cage.
        if (addr - cage_base < cage_size && op.width <= cage_size - (addr - cage_base)) {
          if (observers_.site_cage_hits) ++(*observers_.site_cage_hits)[op.imm];
          if (st.armed) {
            ++st.counters.interceptions;
            uint64_t off = addr - cage_base;
            st.cage.MarkDirty(off, op.width);
            interceptor.Intercept(static_cast<uint32_t>(op.imm), addr,
                                  {st.cage.At(off), op.width});
          } else {
            ++st.counters.pre_fork_interceptions;
          }
        }
        break;
      }
      case Opcode::kLoad:
        ++st.counters.loads;
        regs[op.dst] = read(regs[op.a], op.width);
        break;
      case Opcode::kStore: {
        uint64_t bad = 0;
        CrashKind kind{};
        if (!write(regs[op.a], op.width, regs[op.b], &bad, &kind)) {
          return crash(kind, op, frame.function, bad, op.width);
        }
        break;
      }
      case Opcode::kMemCopy: {
        const uint64_t dst = regs[op.a];
        const uint64_t src = regs[op.b];
        const uint64_t len = regs[op.c];
        bool counted_load = false;
        bool counted_store = false;
        uint64_t done = 0;
        while (done < len) {
          uint8_t* dptr = nullptr;
          bool dst_in_cage = false;
          uint64_t davail = span_at(dst + done, &dptr, &dst_in_cage);
          if (davail == 0) {
            uint64_t bad = dst + done;
            CrashKind kind = CrashKind::kOobWrite;
            if (TrustedRegion* region = region_for(bad)) {
              const Allocation* a = region->Find(bad);
              if (a && !a->live) kind = CrashKind::kUafWrite;
            }
            return crash(kind, op, frame.function, bad, 1);
          }
          if (dst_in_cage && !counted_store) {
            ++st.counters.cage_stores;
            counted_store = true;
          }
          const uint64_t seg = std::min(len - done, davail);
          if (dst_in_cage) st.cage.MarkDirty(dst + done - cage_base, seg);
          uint64_t copied = 0;
          while (copied < seg) {
            uint8_t* sptr = nullptr;
            bool src_in_cage = false;
            uint64_t savail = span_at(src + done + copied, &sptr, &src_in_cage);
            if (savail == 0) {
              ++st.counters.tolerated_reads;
              uint64_t k = done + copied;
              dptr[copied] = static_cast<uint8_t>(options_.poison >> (8 * (k & 7)));
              ++copied;
              continue;
            }
            if (src_in_cage && !counted_load) {
              ++st.counters.cage_loads;
              counted_load = true;
            }
            uint64_t n = std::min(seg - copied, savail);
            std::memmove(dptr + copied, sptr, n);
            copied += n;
          }
          done += seg;
          steps += seg / 8;
          st.counters.steps += seg / 8;
        }
        if (steps > limits.max_steps) return limit(LimitKind::kSteps);
        break;
      }
      case Opcode::kTablePut: {
        uint64_t index = regs[op.a];
        if (index >= st.table.size()) {
          return crash(CrashKind::kTableIndexOob, op, frame.function, index, 8);
        }
        st.table[index] = regs[op.b];
        break;
      }
      case Opcode::kTableGet: {
        uint64_t index = regs[op.a];
        if (index >= st.table.size()) {
          ++st.counters.tolerated_reads;
          regs[op.dst] = options_.poison;
        } else {
          regs[op.dst] = st.table[index];
        }
        break;
      }
      case Opcode::kFree: {
        uint64_t addr = regs[op.a];
        if (addr == 0) break;
        AccessStatus status =
            st.heap.InRegion(addr) ? st.heap.Free(addr) : AccessStatus::kOutOfBounds;
        if (status == AccessStatus::kFreed) {
          return crash(CrashKind::kUafWrite, op, frame.function, addr, 0);
        }
        if (status != AccessStatus::kOk) {
          return crash(CrashKind::kOobWrite, op, frame.function, addr, 0);
        }
        break;
      }
      case Opcode::kSwitch: {
        const CompiledProgram::SwitchTable& table = program_->switch_table(op.aux);
        uint64_t value = regs[op.a];
        auto it = std::find(table.values.begin(), table.values.end(), value);
        if (it != table.values.end()) {
          size_t i = static_cast<size_t>(it - table.values.begin());
          HitEdge(table.edges[i]);
          frame.pc = table.pcs[i];
        } else if (table.has_default) {
          HitEdge(table.default_edge);
          frame.pc = table.default_pc;
        } else {
          return crash(CrashKind::kUndefinedSwitch, op, frame.function, value, 0);
        }
        continue;
      }
      case Opcode::kBr:
        HitEdge(op.edge_true);
        frame.pc = op.target_true;
        continue;
      case Opcode::kBrIf:
        if (regs[op.a]) {
          HitEdge(op.edge_true);
          frame.pc = op.target_true;
        } else {
          HitEdge(op.edge_false);
          frame.pc = op.target_false;
        }
        continue;
      case Opcode::kCall: {
        if (st.frames.size() >= limits.max_call_depth) return limit(LimitKind::kCallDepth);
        HitEdge(op.edge_true);
        ++frame.pc;
        VmState::Frame caller = frame;  // PushFrame may reallocate frames
        if (!PushFrame(static_cast<uint32_t>(op.imm), op.aux, op.aux2, &caller, op.has_dst,
                       op.dst, op.edge_false)) {
          return limit(LimitKind::kAllocation);
        }
        continue;
      }
      case Opcode::kRet: {
        uint64_t value = op.imm ? regs[op.a] : 0;
        VmState::Frame done_frame = frame;
        st.frames.pop_back();
        st.stack.PopTo(done_frame.stack_mark);
        st.regs.resize(done_frame.reg_base);
        if (st.frames.empty()) {
          st.done = true;
          out.return_value = value;
          return out;
        }
        HitEdge(done_frame.return_edge);
        if (done_frame.has_ret_dst) {
          st.regs[st.frames.back().reg_base + done_frame.ret_dst] = value;
        }
        continue;
      }
      case Opcode::kFuzzStart:
        ++frame.pc;
        if (!st.armed) {
          st.armed = true;
          if (stop_at_fork_point) {
            paused_ = true;
            return out;
          }
        }
        continue;
      case Opcode::kHalt:
        st.done = true;
        return out;
    }
    ++frame.pc;
  }
}

ExecOutcome Execute(std::shared_ptr<const CompiledProgram> program, const VmOptions& options,
                    LoadInterceptor& interceptor, const ExecLimits& limits,
                    ExecObservers observers) {
  Vm vm(std::move(program), options);
  vm.observers() = observers;
  return vm.Run(interceptor, limits);
}

Snapshot SnapshotAtFuzzStart(std::shared_ptr<const CompiledProgram> program,
                             const VmOptions& options, const ExecLimits& limits) {
  Vm vm(program, options);
  if (!options.fork_point || !program->has_fuzz_start()) return vm.TakeSnapshot();
  PassthroughInterceptor passthrough;
  ExecOutcome outcome = vm.Run(passthrough, limits, /*stop_at_fork_point=*/true);
  if (!vm.paused()) {
    std::string why = outcome.crashed() ? "crashed during startup"
                      : outcome.status == ExecStatus::kLimitExceeded ? "hit a limit during startup"
                                                                     : "finished";
    throw SnapshotUnreachable(fmt::format("fuzz_start not reached: program {}", why));
  }
  return vm.TakeSnapshot();
}

}  // namespace sbxforge
