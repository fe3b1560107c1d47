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

// Cost model comparing the inline software check with a page-fault design
// that traps on every cage access.
#ifndef SBXFORGE_COST_MODEL_H_
#define SBXFORGE_COST_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sbxforge/ir.h"
#include "sbxforge/vm.h"

namespace sbxforge {

// Abstract cost units.
struct CostModel {
  double c_check = 1;  // inline boundary check per executed hook
  double c_soft = 10;  // soft hook call per intercepted cage load
  double c_trap = 1000;  // fault round-trip per cage load or store

  // Throws ConfigError on non-positive costs.
  void Check() const;
};

struct InterceptionCost {
  uint64_t hook_checks = 0;
  uint64_t soft_interceptions = 0;
  uint64_t cage_loads = 0;
  uint64_t cage_stores = 0;
  double soft_cost = 0;
  double trap_cost = 0;
  double ratio = 0;  // trap / soft; 0 when soft_cost is 0

  // No cage access at all: the ratio carries no information.
  bool degenerate() const { return cage_loads + cage_stores == 0; }
  std::string Format() const;
};

// Replays every program once with zero masks, straight through from the
// entry, and prices the executions under both designs.
InterceptionCost SimulateInterceptionCost(const std::vector<ir::Program>& suite,
                                          const CostModel& model, bool prune = true,
                                          const SandboxLayout& layout = {},
                                          const ExecLimits& limits = {});

}  // namespace sbxforge

#endif  // SBXFORGE_COST_MODEL_H_
