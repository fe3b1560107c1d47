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


// Runs single inputs against one seed program from its fork-point snapshot.
// Shared by the campaign loop, replay and trigger verification so that all
// three execute inputs the same way.
#ifndef SBXFORGE_EXECUTOR_H_
#define SBXFORGE_EXECUTOR_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sbxforge/interceptor.h"
#include "sbxforge/ir.h"
#include "sbxforge/vm.h"

namespace sbxforge {

struct ExecContext {
  bool prune = true;
  // Inputs are cage write lists (baseline) rather than mask streams.
  bool write_list = false;
  bool fork_point = true;
  SandboxLayout layout;
  ExecLimits limits;
};

class SeedExecutor {
 public:
  // Instruments, compiles and snapshots the program. Throws
  // SnapshotUnreachable.
  SeedExecutor(const ir::Program& program, std::string seed_id, const ExecContext& context);

  ExecOutcome Run(std::span<const uint8_t> input, ExecObservers observers = {});

  // Edges hit by the last run.
  const std::vector<EdgeId>& touched() const { return vm_.touched_edges(); }
  // Counters of the last run, excluding the startup phase.
  ExecCounters LastCounters() const;

  const CompiledProgram& program() const { return *program_; }
  const Snapshot& snapshot() const { return snapshot_; }
  const ExecContext& context() const { return context_; }
  const std::string& seed_id() const { return seed_id_; }
  Vm& vm() { return vm_; }
  // Records every interception of subsequent mask-stream runs.
  void set_interception_log(std::vector<InterceptionRecord>* log) { masks_.set_log(log); }

 private:
  ExecContext context_;
  std::string seed_id_;
  std::shared_ptr<const CompiledProgram> program_;
  VmOptions options_;
  Snapshot snapshot_;
  Vm vm_;
  MaskInterceptor masks_;
  PassthroughInterceptor passthrough_;
};

}  // namespace sbxforge

#endif  // SBXFORGE_EXECUTOR_H_
