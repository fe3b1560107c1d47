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


#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "invariants.h"
#include "sbxforge/file_util.h"
#include "sbxforge/suite.h"
#include "test_util.h"

namespace sbxforge::testing {
namespace {

const Suite& SharedSuite() {
  static const Suite* suite = new Suite(BuildSuite(TargetsDir()));
  return *suite;
}

#define EXPECT_CHECK(result)                  \
  do {                                        \
    const CheckResult r_ = (result);          \
    EXPECT_GT(r_.cases, 0u) << r_.Summary();  \
    EXPECT_TRUE(r_.ok()) << r_.Summary();     \
  } while (0)

TEST(PropertyTest, ZeroMaskTransparency) {
  std::vector<std::pair<std::string, ir::Program>> programs;
  for (const SuiteEntry& e : SharedSuite().entries) programs.emplace_back(e.id, e.program);
  programs.emplace_back("all_kinds",
                        ir::ParseProgram(ReadTextFile(TestDataDir() / "all_kinds.sir")));
  EXPECT_CHECK(CheckZeroMaskTransparency(programs));
}

TEST(PropertyTest, XorLocalization) { EXPECT_CHECK(CheckXorAlgebra(1, 100'000)); }

TEST(PropertyTest, XorPersistence) { EXPECT_CHECK(CheckXorPersistence(2, 2'000)); }

TEST(PropertyTest, OracleAsymmetry) {
  // 1000 programs x 100 out-of-bounds reads, then 1000 programs ending in
  // one out-of-bounds write.
  CheckResult r = CheckOracleAsymmetry(3, 1'000, 100, 1'000);
  EXPECT_EQ(r.cases, 2'000u);
  EXPECT_TRUE(r.ok()) << r.Summary();
}

TEST(PropertyTest, SnapshotTransparency) {
  EXPECT_CHECK(CheckSnapshotTransparency(SharedSuite(), 1'000, 4, kCampaignMaxSteps));
}

TEST(PropertyTest, DoubleRunDeterminism) {
  EXPECT_CHECK(CheckDeterminism(SharedSuite(), 200, 5, kCampaignMaxSteps));
}

TEST(PropertyTest, PruningSoundnessAndCompleteness) {
  PruningCheck p = CheckPruning(SharedSuite(), 50, 6, kCampaignMaxSteps);
  EXPECT_CHECK(p.soundness);
  EXPECT_CHECK(p.completeness);
  // The check must actually see both kinds of load.
  EXPECT_GT(p.uninteresting_executions, 0u);
  EXPECT_GT(p.cage_load_executions, 0u);
}

TEST(PropertyTest, ValidatorMutations) {
  EXPECT_CHECK(CheckValidatorMutations(SharedSuite(), 300, 7));
}

TEST(PropertyTest, StartupChunkCount) {
  const SuiteEntry* e = SharedSuite().Find("startup_heavy");
  ASSERT_NE(e, nullptr);
  StartupCount c = CountStartupChunks(e->program);
  EXPECT_TRUE(c.consistent()) << c.interceptions_before_fork << " " << c.trace_recount << " "
                              << c.snapshot_count;
  EXPECT_GE(c.interceptions_before_fork, 10'000u);
  StartupCount again = CountStartupChunks(e->program);
  EXPECT_EQ(again.interceptions_before_fork, c.interceptions_before_fork);
}

}  // namespace
}  // namespace sbxforge::testing
