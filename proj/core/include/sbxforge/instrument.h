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


// Compile-time half of the fault-domain boundary: load classification and
// hook insertion.
#ifndef SBXFORGE_INSTRUMENT_H_
#define SBXFORGE_INSTRUMENT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sbxforge/ir.h"

namespace sbxforge {

// Position of an instruction in the original (uninstrumented) program.
struct InstrSite {
  uint32_t function = 0;
  uint32_t block = 0;
  uint32_t index = 0;

  friend bool operator==(const InstrSite&, const InstrSite&) = default;
  friend auto operator<=>(const InstrSite&, const InstrSite&) = default;
};

enum class LoadClassKind : uint8_t { kUninteresting, kInteresting };
enum class LoadReason : uint8_t { kProvenStack, kProvenGlobal, kProvenTrustedHeap, kUnproven };

std::string_view LoadReasonName(LoadReason reason);

struct LoadClass {
  InstrSite site;
  LoadClassKind kind = LoadClassKind::kInteresting;
  LoadReason reason = LoadReason::kUnproven;
};

// Address provenance walks stop after this many def-use hops and give up
// (Unproven).
inline constexpr int kMaxProvenanceDepth = 64;

// Classifies every load of `program` in program order. Intraprocedural; a
// load is Uninteresting only if every reaching definition of its address,
// followed through constant-offset add/sub, ends at alloca, global_addr or
// heap_alloc.
std::vector<LoadClass> ClassifyLoads(const ir::Program& program);

using LoadSiteId = uint32_t;

struct HookSite {
  InstrSite load;  // the hooked load, original coordinates
  uint8_t width = 0;
};

struct PruningStats {
  uint64_t total = 0;
  uint64_t pruned = 0;
  uint64_t instrumented = 0;

  double pruned_fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(pruned) / static_cast<double>(total);
  }
};

struct InstrumentedProgram {
  ir::Program program;
  std::vector<HookSite> site_table;  // indexed by LoadSiteId
  PruningStats stats;
  std::vector<LoadClass> classes;  // classification of every original load
};

// Inserts `hook SITE, rADDR, WIDTH` before each load that must be intercepted:
// the Interesting loads when `prune` is set, every load otherwise. Throws
// ir::ValidateError if the program already contains hooks.
InstrumentedProgram Instrument(const ir::Program& program, bool prune);

// Wraps an already-instrumented program (e.g. parsed from a .instr.sir file),
// rebuilding the site table from its hooks.
InstrumentedProgram AdoptInstrumented(const ir::Program& program);

// Program with no hooks at all; executes the original semantics.
InstrumentedProgram Uninstrumented(const ir::Program& program);

// Stats file: "total pruned instrumented" on the first line, then one line
// per load: "fn:block:idx class reason hooked".
std::string FormatStats(const InstrumentedProgram& instrumented);

}  // namespace sbxforge

#endif  // SBXFORGE_INSTRUMENT_H_
