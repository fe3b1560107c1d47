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


#include "sbxforge/executor.h"

#include "sbxforge/baseline.h"
#include "sbxforge/instrument.h"

namespace sbxforge {
namespace {

VmOptions MakeOptions(const ExecContext& context, const std::string& seed_id) {
  VmOptions options;
  options.layout = context.layout;
  options.fork_point = context.fork_point;
  options.seed_id = seed_id;
  return options;
}

ExecCounters Minus(const ExecCounters& a, const ExecCounters& b) {
  ExecCounters d;
  d.steps = a.steps - b.steps;
  d.hook_checks = a.hook_checks - b.hook_checks;
  d.interceptions = a.interceptions - b.interceptions;
  d.pre_fork_interceptions = a.pre_fork_interceptions - b.pre_fork_interceptions;
  d.cage_loads = a.cage_loads - b.cage_loads;
  d.cage_stores = a.cage_stores - b.cage_stores;
  d.loads = a.loads - b.loads;
  d.tolerated_reads = a.tolerated_reads - b.tolerated_reads;
  return d;
}

}  // namespace

SeedExecutor::SeedExecutor(const ir::Program& program, std::string seed_id,
                           const ExecContext& context)
    : context_(context),
      seed_id_(std::move(seed_id)),
      program_(std::make_shared<const CompiledProgram>(Instrument(program, context.prune))),
      options_(MakeOptions(context_, seed_id_)),
      snapshot_(SnapshotAtFuzzStart(program_, options_, context_.limits)),
      vm_(program_, options_) {}

ExecOutcome SeedExecutor::Run(std::span<const uint8_t> input, ExecObservers observers) {
  vm_.Restore(snapshot_);
  vm_.ClearCoverage();
  vm_.observers() = observers;
  if (context_.write_list) {
    ApplyWriteList(vm_.state().cage, DecodeWriteList(input));
    return vm_.Run(passthrough_, context_.limits);
  }
  masks_.Reset({input.begin(), input.end()});
  return vm_.Run(masks_, context_.limits);
}

ExecCounters SeedExecutor::LastCounters() const {
  return Minus(vm_.state().counters, snapshot_.state.counters);
}

}  // namespace sbxforge
