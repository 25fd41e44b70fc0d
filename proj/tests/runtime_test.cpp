// Copyright 2026 The aiom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "aiom/config.hpp"
#include "aiom/runtime.hpp"
#include "test_support.hpp"

namespace aiom {
namespace {

MachineDefinition echo_machine(std::string response = "OK") {
  MachineDefinition m;
  m.name = "echo";
  m.bindings = {{"llm", Modality::language, "scripted:llm"}};
  m.backends["scripted:llm"] = {"scripted", Json{{"rules", {{{"contains", ""}, {"response", response}}}}}};
  m.controller = {"echo", Json::object()};
  return m;
}

RunResult run_machine(const MachineDefinition& m, const GroundTruth& truth = {}, TaskSpec task = {"say OK", {}},
                      std::uint64_t seed = 1) {
  const auto reg = default_registries();
  const auto oracles = make_oracles(m);
  return run(m, reg, oracles, truth, task, seed);
}

std::vector<std::string> kinds(const Transcript& t) {
  std::vector<std::string> out;
  for (const auto& e : t.events) out.emplace_back(to_string(e.kind));
  return out;
}

TEST(Run, EchoProducesFiveEvents) {
  const auto r = run_machine(echo_machine());
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r.final_answer, "OK");
  EXPECT_EQ(kinds(r.transcript),
            (std::vector<std::string>{"task-created", "prompt-rendered", "answer-received", "validated", "halted"}));
  std::string why;
  EXPECT_TRUE(r.transcript.holds_invariants(&why)) << why;
  EXPECT_TRUE(r.state.holds_invariants());
}

// A controller that asks for two independent tasks at once.
class TwoTaskController final : public Controller {
 public:
  StepResult step(const MachineView& view) override {
    if (started_) return StepResult::finish("done");
    started_ = true;
    std::vector<QueryTask> tasks(2);
    for (int i = 0; i < 2; ++i) {
      tasks[i].id = "t" + std::to_string(i);
      tasks[i].description = "x";
      tasks[i].validation_method = {"always-accept", Json::object()};
      tasks[i].oracle_role = view.machine.bindings.front().role;
    }
    return StepResult::emit(std::move(tasks));
  }

 private:
  bool started_ = false;
};

TEST(Run, MaxTasksLimitHaltsWithDiagnostic) {
  auto m = echo_machine();
  m.controller = {"two", Json::object()};
  m.limits.max_tasks = 1;
  auto reg = default_registries();
  reg.controllers.add("two", [](const Json&) { return std::make_unique<TwoTaskController>(); });
  const auto oracles = make_oracles(m);
  const auto r = run(m, reg, oracles, {}, {"x", {}}, 0);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.diagnostic(), "limit exceeded: max_tasks (1)");
  EXPECT_EQ(r.transcript.events.back().kind, EventKind::halted);
  EXPECT_TRUE(r.state.holds_invariants());
}

class NeverFinishes final : public Controller {
 public:
  StepResult step(const MachineView& view) override {
    QueryTask t;
    t.id = "t" + std::to_string(n_++);
    t.description = "x";
    t.validation_method = {"always-accept", Json::object()};
    t.oracle_role = view.machine.bindings.front().role;
    return StepResult::emit({t});
  }

 private:
  int n_ = 0;
};

TEST(Run, MaxCyclesLimitHalts) {
  auto m = echo_machine();
  m.controller = {"forever", Json::object()};
  m.limits.max_cycles = 5;
  m.limits.max_tasks = 100;
  auto reg = default_registries();
  reg.controllers.add("forever", [](const Json&) { return std::make_unique<NeverFinishes>(); });
  const auto oracles = make_oracles(m);
  const auto r = run(m, reg, oracles, {}, {"x", {}}, 0);
  EXPECT_EQ(r.diagnostic(), "limit exceeded: max_cycles (5)");
  EXPECT_EQ(r.state.cycle, 5);
}

TEST(Run, SameSeedGivesIdenticalTranscripts) {
  const auto a = run_machine(echo_machine()).transcript.to_jsonl();
  const auto b = run_machine(echo_machine()).transcript.to_jsonl();
  EXPECT_EQ(a, b);
}

TEST(Run, UnknownRoleIsADefinitionError) {
  auto m = echo_machine();
  m.controller.params = Json{{"role", "ghost"}};
  try {
    run_machine(m);
    FAIL();
  } catch (const RunError& e) {
    EXPECT_EQ(e.cause(), RunError::Cause::definition);
    EXPECT_EQ(e.transcript().events.back().kind, EventKind::halted);
  }
}

TEST(Run, BackendFailureCarriesPartialTranscript) {
  auto m = echo_machine();
  m.backends["scripted:llm"].params = Json{{"rules", {{{"contains", "never"}, {"response", "x"}}}}};
  try {
    run_machine(m);
    FAIL();
  } catch (const RunError& e) {
    EXPECT_EQ(e.cause(), RunError::Cause::backend);
    EXPECT_EQ(kinds(e.transcript()), (std::vector<std::string>{"task-created", "prompt-rendered", "halted"}));
  }
}

TEST(Run, VisionModalityIsRejectedAtDispatch) {
  auto m = echo_machine();
  m.bindings[0].modality = Modality::vision;
  EXPECT_THROW(run_machine(m), RunError);
}

TEST(Run, InvalidAnswerIsRetriedOnceWithDiagnostics) {
  auto m = echo_machine("no number");
  m.controller.params = Json{{"validator", {{"validator", "numeric-range"}, {"params", {{"min", 1}, {"max", 3}}}}}};
  const auto r = run_machine(m);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.diagnostic(), "task \"echo\" failed validation");
  ASSERT_TRUE(r.state.tasks.count("echo~retry"));
  EXPECT_EQ(r.state.tasks.at("echo~retry").constraints, std::vector<std::string>{"no integer found in answer"});
  EXPECT_TRUE(r.state.failed.count("echo~retry"));
}

// ---------------------------------------------------------------------------
// Scheduling

QueryTask task(std::string id, std::set<std::string> deps = {}) {
  QueryTask t;
  t.id = std::move(id);
  t.depends_on = std::move(deps);
  return t;
}

std::vector<std::string> ids(const std::vector<QueryTask>& ts) {
  std::vector<std::string> out;
  for (const auto& t : ts) out.push_back(t.id);
  return out;
}

TEST(Schedule, DependencyGate) {
  MachineState s;
  s.pending = {{"A", task("A")}, {"B", task("B", {"A"})}};
  EXPECT_EQ(ids(schedule_dispatchable(s)), std::vector<std::string>{"A"});
}

TEST(Schedule, InvalidDependencyBlocks) {
  MachineState s;
  s.pending = {{"B", task("B", {"A"})}};
  s.answers["A"] = Answer{"A", "x", "o", {}};
  s.validations["A"] = ValidationOutcome::invalid({"bad"});
  EXPECT_TRUE(schedule_dispatchable(s).empty());
  s.validations["A"] = ValidationOutcome::partial({"x"});
  EXPECT_EQ(ids(schedule_dispatchable(s)), std::vector<std::string>{"B"});
}

TEST(Schedule, IndependentTasksFormOneBatch) {
  MachineState s;
  s.pending = {{"c", task("c")}, {"a", task("a")}, {"b", task("b")}};
  EXPECT_EQ(ids(schedule_dispatchable(s)), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Schedule, CycleIsADefinitionError) {
  MachineState s;
  s.pending = {{"A", task("A", {"B"})}, {"B", task("B", {"A"})}};
  EXPECT_THROW(schedule_dispatchable(s), DefinitionError);
}

// ---------------------------------------------------------------------------
// DAG controller and prior extracts

TEST(DagController, PriorExtractsComeFromValidatedSpans) {
  auto m = echo_machine();
  m.backends["scripted:llm"].params =
      Json{{"rules",
            {{{"contains", "first"}, {"response", "Solar rose. Coal fell."}}, {{"contains", ""}, {"response", "ok"}}}}};
  QueryTask a = task("a");
  a.description = "first";
  a.validation_method = {"contains-terms", Json{{"terms", {"solar", "wind"}}}};
  a.oracle_role = "llm";
  QueryTask b = task("b", {"a"});
  b.description = "second";
  b.validation_method = {"always-accept", Json::object()};
  b.oracle_role = "llm";
  for (bool adaptive : {false, true}) {
    m.controller = {"dag", Json{{"tasks", {a, b}}, {"adaptive", adaptive}}};
    const auto r = run_machine(m);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.state.tasks.at("b").prior_extracts, (std::vector<PriorExtract>{{"a", "Solar rose."}}));
    EXPECT_TRUE(dag_order_holds(r.transcript));
  }
}

TEST(DagController, FailedDependencyFailsTheRun) {
  auto m = echo_machine("nothing");
  QueryTask a = task("a");
  a.description = "first";
  a.validation_method = {"contains-terms", Json{{"terms", {"solar"}}}};
  a.oracle_role = "llm";
  QueryTask b = task("b", {"a"});
  b.description = "second";
  b.oracle_role = "llm";
  b.validation_method = {"always-accept", Json::object()};
  for (bool adaptive : {false, true}) {
    m.controller = {"dag", Json{{"tasks", {a, b}}, {"adaptive", adaptive}}};
    const auto r = run_machine(m);
    EXPECT_FALSE(r.ok());
    EXPECT_FALSE(r.state.answers.count("b"));
  }
}

// ---------------------------------------------------------------------------
// Timeouts

class SlowBackend final : public Backend {
 public:
  const std::string& id() const noexcept override { return id_; }
  bool blocking() const noexcept override { return true; }
  Answer query(const Prompt&, const QueryContext& ctx) const override {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    return Answer{ctx.task_id, "late", id_, {}};
  }

 private:
  std::string id_ = "slow";
};

TEST(Run, TimeoutBecomesInvalidValidation) {
  auto m = echo_machine();
  m.limits.per_query_timeout = std::chrono::milliseconds(20);
  OracleSet oracles;
  oracles.bind("llm", std::make_shared<SlowBackend>());
  const auto reg = default_registries();
  const auto r = run(m, reg, oracles, {}, {"x", {}}, 0);
  EXPECT_FALSE(r.ok());
  ASSERT_TRUE(r.state.validations.count("echo"));
  EXPECT_EQ(r.state.validations.at("echo").diagnostics, std::vector<std::string>{"timeout"});
  EXPECT_TRUE(r.state.validations.count("echo~retry"));
}

// ---------------------------------------------------------------------------
// Transcript format and replay

TEST(Transcript, LinesRoundTrip) {
  const auto t = run_machine(echo_machine()).transcript;
  const auto text = t.to_jsonl();
  EXPECT_EQ(Transcript::from_jsonl(text).to_jsonl(), text);
  EXPECT_TRUE(text.starts_with("{\"seq\":0,\"kind\":\"task-created\",\"task_id\":\"echo\",\"payload\":"));
}

TEST(Replay, FixedPoint) {
  const auto m = echo_machine();
  const auto t = run_machine(m).transcript;
  EXPECT_EQ(replay(t, m, default_registries()).to_jsonl(), t.to_jsonl());
}

TEST(Replay, EditedAnswerIsReportedAtItsSeq) {
  const auto m = echo_machine();
  auto t = run_machine(m).transcript;
  ASSERT_EQ(t.events[2].kind, EventKind::answer_received);
  t.events[2].payload["answer"]["text"] = "KO";
  try {
    replay(t, m, default_registries());
    FAIL();
  } catch (const ReplayError& e) {
    EXPECT_EQ(e.seq(), 2);
  }
}

TEST(Replay, EmptyTranscript) {
  try {
    replay(Transcript{}, echo_machine(), default_registries());
    FAIL();
  } catch (const ReplayError& e) {
    EXPECT_STREQ(e.what(), "replay: no events");
  }
}

TEST(Replay, DefinitionMismatchIsNamed) {
  const auto t = run_machine(echo_machine()).transcript;
  auto other = echo_machine();
  other.controller.params = Json{{"validator", {{"validator", "contains-terms"}, {"params", {{"terms", {"OK"}}}}}}};
  EXPECT_THROW(replay(t, other, default_registries()), ReplayError);
}

// Randomized machines: determinism, replay and DAG order.
TEST(RandomMachines, DeterministicReplayableAndDagOrdered) {
  const auto reg = default_registries();
  for (std::uint64_t s = 0; s < 60; ++s) {
    const auto rm = testing::random_machine(s);
    const auto oracles = make_oracles(rm.def);
    auto once = [&] {
      try {
        return run(rm.def, reg, oracles, rm.truth, rm.task, rm.seed).transcript;
      } catch (const RunError& e) {
        return e.transcript();
      }
    };
    const auto a = once();
    const auto b = once();
    ASSERT_EQ(a.to_jsonl(), b.to_jsonl()) << "seed " << s;
    std::string why;
    EXPECT_TRUE(a.holds_invariants(&why)) << "seed " << s << ": " << why;
    EXPECT_TRUE(dag_order_holds(a)) << "seed " << s;
    EXPECT_EQ(replay(a, rm.def, reg).to_jsonl(), a.to_jsonl()) << "seed " << s;
  }
}

}  // namespace
}  // namespace aiom
