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


#include <filesystem>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "sbxforge/campaign.h"
#include "sbxforge/cost_model.h"
#include "sbxforge/file_util.h"
#include "sbxforge/replay.h"
#include "sbxforge/suite.h"
#include "test_util.h"

namespace sbxforge {
namespace {

namespace fs = std::filesystem;
using testing::TargetsDir;
using testing::TempDir;

class ReplayTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    CampaignConfig c;
    c.seeds = TargetsDir();
    c.budget = {Budget::Kind::kExecs, 20'000};
    c.rng_seed = 7;
    c.out = dir_->path();
    result_ = new CampaignResult(RunCampaign(c));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete dir_;
  }
  static TempDir* dir_;
  static CampaignResult* result_;
};

TempDir* ReplayTest::dir_ = nullptr;
CampaignResult* ReplayTest::result_ = nullptr;

TEST_F(ReplayTest, EveryCrashReproduces) {
  ASSERT_FALSE(result_->findings.empty());
  for (const Finding& f : result_->findings) {
    SCOPED_TRACE(f.key);
    fs::path crash = dir_->path() / "crashes" / f.key;
    for (const fs::path& p : {crash, crash / "repro"}) {
      ReplayArtifact artifact = LoadArtifact(p);
      ReplayResult r = Replay(artifact);
      ASSERT_TRUE(r.outcome.crash.has_value());
      EXPECT_EQ(*r.outcome.crash, f.report);
    }
  }
}

TEST_F(ReplayTest, CorpusEntriesReproduceEdgeTraces) {
  size_t checked = 0;
  for (const TestCase& tc : result_->corpus) {
    fs::path mask = dir_->path() / "corpus" / tc.seed_id / (tc.Name() + ".mask");
    ReplayArtifact artifact = LoadArtifact(mask);
    ASSERT_TRUE(artifact.expected_edge_hash.has_value());
    ReplayResult r = Replay(artifact);
    if (tc.initial) {
      EXPECT_TRUE(r.outcome.finished()) << tc.seed_id;
    }
    ++checked;
  }
  EXPECT_EQ(checked, result_->corpus.size());
}

TEST_F(ReplayTest, TamperedArtifactsAreDetected) {
  ASSERT_FALSE(result_->findings.empty());
  ReplayArtifact artifact = LoadArtifact(dir_->path() / "crashes" / result_->findings[0].key);
  artifact.input.assign(artifact.input.size(), 0);
  EXPECT_THROW(Replay(artifact), ReplayMismatch);

  TempDir broken;
  fs::copy(dir_->path() / "crashes" / result_->findings[0].key, broken.path() / "c");
  AtomicWriteFile(broken.path() / "c" / "report.txt", std::string_view("kind=Bogus\n"));
  EXPECT_THROW(LoadArtifact(broken.path() / "c"), LoadError);
  fs::remove(broken.path() / "c" / "seed.sir");
  EXPECT_THROW(LoadArtifact(broken.path() / "c"), LoadError);
  EXPECT_THROW(LoadArtifact(broken.path() / "nothing.bin"), LoadError);
}

TEST(ReplayContextTest, ParseContext) {
  ExecContext c = ParseContext("mode=baseline\nfork_point=false\ncage_size=65536\nmax_steps=9\n");
  EXPECT_TRUE(c.write_list);
  EXPECT_FALSE(c.fork_point);
  EXPECT_EQ(c.layout.cage_size, 65536u);
  EXPECT_EQ(c.limits.max_steps, 9u);
  EXPECT_FALSE(ParseContext("mode=noprune\n").prune);
  EXPECT_THROW(ParseContext("cage_size=1000\n"), LoadError);
}

TEST(EdgeTraceHashTest, OrderSensitive) {
  std::vector<EdgeId> a = {1, 2};
  std::vector<EdgeId> b = {2, 1};
  EXPECT_NE(EdgeTraceHash(a), EdgeTraceHash(b));
  EXPECT_EQ(EdgeTraceHash(a), EdgeTraceHash(std::vector<EdgeId>{1, 2}));
}

// Cost model -----------------------------------------------------------------

TEST(CostModelTest, NonPositiveCostsRejected) {
  EXPECT_THROW((CostModel{0, 10, 1000}).Check(), ConfigError);
  EXPECT_THROW((CostModel{1, -1, 1000}).Check(), ConfigError);
  EXPECT_NO_THROW(CostModel{}.Check());
}

TEST(CostModelTest, CountsMatchHandComputation) {
  // 3 cage loads (one hooked per load) and 2 cage stores; one stack load
  // pruned.
  ir::Program p = ir::ParseProgram(R"(
fn main() {
  frame { s: 8 }
  b0:
    const r0, 16
    cage_alloc r1, r0
    store r1, r0, 8
    store r1, r0, 4
    load r2, r1, 8
    load r3, r1, 4
    load r4, r1, 1
    alloca r5, s
    load r6, r5, 8
    halt
})");
  CostModel model{1, 10, 1000};
  InterceptionCost cost = SimulateInterceptionCost({p}, model);
  EXPECT_EQ(cost.hook_checks, 3u);
  EXPECT_EQ(cost.soft_interceptions, 3u);
  EXPECT_EQ(cost.cage_loads, 3u);
  EXPECT_EQ(cost.cage_stores, 2u);
  EXPECT_DOUBLE_EQ(cost.soft_cost, 3 * 1 + 3 * 10);
  EXPECT_DOUBLE_EQ(cost.trap_cost, 5 * 1000);
  EXPECT_DOUBLE_EQ(cost.ratio, 5000.0 / 33.0);
  EXPECT_NE(cost.Format().find("trap/soft="), std::string::npos);

  InterceptionCost unpruned = SimulateInterceptionCost({p}, model, /*prune=*/false);
  EXPECT_EQ(unpruned.hook_checks, 4u);
  EXPECT_EQ(unpruned.soft_interceptions, 3u);
}

TEST(CostModelTest, DegenerateSuite) {
  ir::Program p = ir::ParseProgram("fn main() { b0: const r0, 1\n halt }");
  InterceptionCost cost = SimulateInterceptionCost({p}, CostModel{});
  EXPECT_TRUE(cost.degenerate());
  EXPECT_EQ(cost.trap_cost, 0);
  EXPECT_NE(cost.Format().find("no cage accesses"), std::string::npos);
}

// Suite ----------------------------------------------------------------------

TEST(SuiteTest, ShapeAndDormancy) {
  Suite suite = BuildSuite(TargetsDir());
  EXPECT_GE(suite.benign().size(), 12u);
  EXPECT_GE(suite.bugs().size(), 6u);
  std::set<BugClass> classes;
  for (const SuiteEntry* e : suite.bugs()) classes.insert(e->bug->bug_class);
  EXPECT_EQ(classes.size(), 6u);
  ASSERT_NE(suite.Find("startup_heavy"), nullptr);
  for (const SuiteEntry& e : suite.entries) {
    EXPECT_TRUE(RunEntry(e, {}).finished()) << e.id;
  }
}

TEST(SuiteTest, VerifyTriggersPasses) {
  Suite suite = BuildSuite(TargetsDir());
  TriggerReport report = VerifyTriggers(suite);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.checks.size(), suite.entries.size() + suite.bugs().size());
}

TEST(SuiteTest, TamperedTriggerIsARegression) {
  Suite suite = BuildSuite(TargetsDir());
  for (SuiteEntry& e : suite.entries) {
    if (e.id == "unknown_enum") e.bug->trigger_bytes = {0x00};
  }
  try {
    VerifyTriggers(suite);
    FAIL() << "expected TriggerRegression";
  } catch (const TriggerRegression& e) {
    EXPECT_NE(std::string(e.what()).find("unknown_enum"), std::string::npos);
  }
}

TEST(SuiteTest, TriggersAreSmall) {
  // Each trigger perturbs at most two interception indices.
  Suite suite = BuildSuite(TargetsDir());
  for (const SuiteEntry* e : suite.bugs()) {
    SCOPED_TRACE(e->id);
    SeedExecutor exec(e->program, e->id, ExecContext{});
    std::vector<InterceptionRecord> log;
    exec.set_interception_log(&log);
    ExecOutcome out = exec.Run(e->bug->TriggerMask());
    ASSERT_TRUE(out.crashed());
    int perturbed = 0;
    for (const InterceptionRecord& r : log) perturbed += r.mask != 0;
    EXPECT_GE(perturbed, 1);
    EXPECT_LE(perturbed, 2);
  }
}

TEST(SuiteTest, DoubleFetchNeedsAFaultBetweenFetches) {
  // Perturbing only the first fetch (the flags word) reaches the shared
  // path but not the crash; the re-fetched length must change too.
  Suite suite = BuildSuite(TargetsDir());
  const SuiteEntry* e = suite.Find("double_fetch_sort");
  ASSERT_NE(e, nullptr);
  std::vector<uint8_t> flags_only = {0x0b};
  EXPECT_FALSE(RunEntry(*e, flags_only).crashed());
  EXPECT_TRUE(RunEntry(*e, e->bug->TriggerMask()).crashed());
}

}  // namespace
}  // namespace sbxforge
