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


#include "sbxforge/cost_model.h"

#include <fmt/format.h>

#include "sbxforge/campaign.h"
#include "sbxforge/instrument.h"
#include "sbxforge/interceptor.h"

namespace sbxforge {

void CostModel::Check() const {
  if (!(c_check > 0 && c_soft > 0 && c_trap > 0)) {
    throw ConfigError(fmt::format("costs must be positive (check={}, soft={}, trap={})", c_check,
                                  c_soft, c_trap));
  }
}

std::string InterceptionCost::Format() const {
  std::string out = fmt::format(
      "hook_checks={}\nsoft_interceptions={}\ncage_loads={}\ncage_stores={}\nsoft_cost={:.0f}\n"
      "trap_cost={:.0f}\ntrap/soft={:.3f}\n",
      hook_checks, soft_interceptions, cage_loads, cage_stores, soft_cost, trap_cost, ratio);
  if (degenerate()) out += "note=no cage accesses; ratio reflects check cost only\n";
  return out;
}

InterceptionCost SimulateInterceptionCost(const std::vector<ir::Program>& suite,
                                          const CostModel& model, bool prune,
                                          const SandboxLayout& layout, const ExecLimits& limits) {
  model.Check();
  InterceptionCost cost;
  VmOptions options;
  options.layout = layout;
  for (const ir::Program& program : suite) {
    auto compiled = std::make_shared<const CompiledProgram>(Instrument(program, prune));
    Vm vm(compiled, options);
    MaskInterceptor zero;
    vm.Run(zero, limits);
    const ExecCounters& c = vm.state().counters;
    cost.hook_checks += c.hook_checks;
    cost.soft_interceptions += c.interceptions + c.pre_fork_interceptions;
    cost.cage_loads += c.cage_loads;
    cost.cage_stores += c.cage_stores;
  }
  cost.soft_cost = model.c_check * static_cast<double>(cost.hook_checks) +
                   model.c_soft * static_cast<double>(cost.soft_interceptions);
  cost.trap_cost = model.c_trap * static_cast<double>(cost.cage_loads + cost.cage_stores);
  cost.ratio = cost.soft_cost > 0 ? cost.trap_cost / cost.soft_cost : 0;
  return cost;
}

}  // namespace sbxforge
