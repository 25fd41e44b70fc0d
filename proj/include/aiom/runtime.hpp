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

#pragma once

// Machine execution: the run loop of pre-query processing (controller steps),
// query and answer generation (dispatch to oracle backends) and post-answer
// processing (validation), over a dependency DAG of query-tasks. Every run
// records a transcript that can be replayed byte-for-byte.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "aiom/backends.hpp"
#include "aiom/core.hpp"
#include "aiom/random.hpp"
#include "aiom/validators.hpp"

namespace aiom {

// ---------------------------------------------------------------------------
// Machine definition

/// Bounds that guarantee halting.
struct RunLimits {
  int max_tasks = 64;
  int max_cycles = 64;
  std::chrono::milliseconds per_query_timeout{30000};

  void check() const {
    if (max_tasks <= 0 || max_cycles <= 0 || per_query_timeout.count() <= 0) {
      throw ConfigurationError("run limits must all be strictly positive");
    }
  }
  bool operator==(const RunLimits&) const = default;
};

struct ControllerSpec {
  std::string id;
  Json params = Json::object();
  bool operator==(const ControllerSpec&) const = default;
};

struct BackendSpec {
  std::string kind;  // "http" | "scripted" | "stochastic"
  Json params = Json::object();
  bool operator==(const BackendSpec&) const = default;
};

struct MachineDefinition {
  std::string name;
  std::vector<OracleBinding> bindings;        // O_M
  std::map<std::string, BackendSpec> backends;  // keyed by OracleBinding::backend_ref
  ControllerSpec controller;                  // the machine's step program
  RunLimits limits;
  std::uint64_t seed = 0;

  const OracleBinding* binding(std::string_view role) const {
    for (const auto& b : bindings) {
      if (b.role == role) return &b;
    }
    return nullptr;
  }

  bool operator==(const MachineDefinition&) const = default;
};

// ---------------------------------------------------------------------------
// Transcript

enum class EventKind { task_created, prompt_rendered, answer_received, validated, halted };

inline std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::task_created:
      return "task-created";
    case EventKind::prompt_rendered:
      return "prompt-rendered";
    case EventKind::answer_received:
      return "answer-received";
    case EventKind::validated:
      return "validated";
    case EventKind::halted:
      return "halted";
  }
  return "halted";
}

inline EventKind parse_event_kind(std::string_view s) {
  for (auto k : {EventKind::task_created, EventKind::prompt_rendered, EventKind::answer_received,
                 EventKind::validated, EventKind::halted}) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("transcript: unknown event kind \"" + std::string(s) + "\"");
}

struct Event {
  std::int64_t seq = 0;
  EventKind kind = EventKind::halted;
  std::optional<std::string> task_id;
  Json payload = Json::object();

  /// One JSON Lines record: {"seq","kind","task_id","payload"} in that order, no newline.
  std::string to_line() const {
    std::string out = "{\"seq\":" + std::to_string(seq) + ",\"kind\":\"";
    out += to_string(kind);
    out += "\",\"task_id\":";
    out += task_id ? detail::quote(*task_id) : "null";
    out += ",\"payload\":";
    out += payload.dump(-1, ' ', false, Json::error_handler_t::replace);
    out += '}';
    return out;
  }

  static Event from_line(std::string_view line) {
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw SchemaError(std::string("transcript: ") + e.what());
    }
    detail::check_keys(j, "transcript event", {"seq", "kind", "task_id", "payload"});
    Event e;
    e.seq = detail::required<std::int64_t>(j, "seq", "transcript event");
    e.kind = parse_event_kind(detail::required<std::string>(j, "kind", "transcript event"));
    if (j.contains("task_id") && !j["task_id"].is_null()) {
      e.task_id = detail::required<std::string>(j, "task_id", "transcript event");
    }
    e.payload = j.contains("payload") ? j["payload"] : Json::object();
    return e;
  }

  bool operator==(const Event&) const = default;
};

/// Ordered, replayable event log of one run.
struct Transcript {
  std::vector<Event> events;

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : events) {
      out += e.to_line();
      out += '\n';
    }
    return out;
  }

  static Transcript from_jsonl(std::string_view text) {
    Transcript t;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = text.substr(start, end - start);
      if (!text::trim(line).empty()) t.events.push_back(Event::from_line(line));
      start = end + 1;
    }
    return t;
  }

  /// Sequence numbers run 0,1,2,... and each task's events follow
  /// task-created -> prompt-rendered -> answer-received -> validated.
  bool holds_invariants(std::string* why = nullptr) const {
    auto fail = [&](std::string msg) {
      if (why) *why = std::move(msg);
      return false;
    };
    std::map<std::string, int> stage;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& e = events[i];
      if (e.seq != static_cast<std::int64_t>(i)) return fail("seq gap at index " + std::to_string(i));
      if (e.kind == EventKind::halted) {
        if (i + 1 != events.size()) return fail("events after halted");
        continue;
      }
      if (!e.task_id) return fail("event " + std::to_string(i) + " lacks a task id");
      const int want = static_cast<int>(e.kind);
      auto [it, fresh] = stage.try_emplace(*e.task_id, -1);
      if (it->second + 1 != want) {
        return fail("task \"" + *e.task_id + "\" event out of order at seq " + std::to_string(i));
      }
      it->second = want;
    }
    return true;
  }

  bool operator==(const Transcript&) const = default;
};

/// No answer-received event for a task precedes the validated event of any of its dependencies.
inline bool dag_order_holds(const Transcript& t) {
  std::map<std::string, std::set<std::string>> deps;
  std::set<std::string> validated;
  for (const auto& e : t.events) {
    if (!e.task_id) continue;
    if (e.kind == EventKind::task_created) {
      deps[*e.task_id] = e.payload.value("depends_on", std::set<std::string>{});
    } else if (e.kind == EventKind::answer_received) {
      for (const auto& d : deps[*e.task_id]) {
        if (!validated.count(d)) return false;
      }
    } else if (e.kind == EventKind::validated) {
      validated.insert(*e.task_id);
    }
  }
  return true;
}

/// A run that stopped on an error. Carries the transcript up to and including
/// the halted event that records the error.
class RunError : public Error {
 public:
  enum class Cause { backend, definition };

  RunError(const std::string& what, Cause cause, Transcript transcript)
      : Error(what), cause_(cause), transcript_(std::move(transcript)) {}

  Cause cause() const noexcept { return cause_; }
  const Transcript& transcript() const noexcept { return transcript_; }

 private:
  Cause cause_;
  Transcript transcript_;
};

// ---------------------------------------------------------------------------
// Machine state

struct MachineState {
  std::map<std::string, QueryTask> pending;
  std::set<std::string> in_flight;
  std::map<std::string, Answer> answers;
  std::map<std::string, ValidationOutcome> validations;
  std::map<std::string, QueryTask> tasks;         // every admitted task, as last dispatched
  std::map<std::string, std::string> superseded;  // task id -> id of its repair retry
  std::set<std::string> failed;                   // branches given up on
  int cycle = 0;
  int tasks_created = 0;
  bool halted = false;
  std::optional<std::string> final_answer;
  std::optional<std::string> diagnostic;

  /// Follows the retry chain to the task that currently stands for `id`.
  const std::string& resolve(const std::string& id) const {
    const std::string* cur = &id;
    for (auto it = superseded.find(*cur); it != superseded.end(); it = superseded.find(*cur)) {
      cur = &it->second;
    }
    return *cur;
  }

  /// Validation of the task standing for `id`, or null if not validated yet.
  const ValidationOutcome* outcome(const std::string& id) const {
    auto it = validations.find(resolve(id));
    return it == validations.end() ? nullptr : &it->second;
  }

  bool is_failed(const std::string& id) const { return failed.count(resolve(id)) != 0; }

  bool holds_invariants() const {
    for (const auto& [id, t] : pending) {
      if (in_flight.count(id)) return false;
    }
    for (const auto& [id, v] : validations) {
      if (!answers.count(id)) return false;
    }
    if (halted && !final_answer && !diagnostic) return false;
    return true;
  }
};

/// Pending tasks whose every dependency has a valid or partial validation,
/// ordered by id. Tasks without dependencies form one non-adaptive batch.
/// Throws DefinitionError on a dependency cycle among pending tasks.
inline std::vector<QueryTask> schedule_dispatchable(const MachineState& state) {
  // Cycle check: depth-first over pending -> pending edges.
  std::map<std::string, int> color;
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    color[id] = 1;
    for (const auto& dep : state.pending.at(id).depends_on) {
      const auto& r = state.resolve(dep);
      if (!state.pending.count(r)) continue;
      if (color[r] == 1) throw DefinitionError("dependency cycle through \"" + r + "\"");
      if (color[r] == 0) visit(r);
    }
    color[id] = 2;
  };
  for (const auto& [id, t] : state.pending) {
    if (color[id] == 0) visit(id);
  }

  std::vector<QueryTask> ready;
  for (const auto& [id, t] : state.pending) {
    bool ok = true;
    for (const auto& dep : t.depends_on) {
      const auto* o = state.outcome(dep);
      if (!o || !o->usable()) {
        ok = false;
        break;
      }
    }
    if (ok) ready.push_back(t);
  }
  return ready;
}

// ---------------------------------------------------------------------------
// Controllers

/// What a controller sees when it is stepped.
struct MachineView {
  const MachineDefinition& machine;
  const GroundTruth& truth;
  const TaskSpec& task;
  std::uint64_t seed;
  const MachineState& state;
};

/// Controller output: new query-tasks, a final answer, or a failure. An empty
/// task list without final answer means "wait for in-flight work".
struct StepResult {
  std::vector<QueryTask> tasks;
  std::optional<std::string> final_answer;
  std::optional<std::string> failure;

  static StepResult emit(std::vector<QueryTask> tasks) { return {std::move(tasks), {}, {}}; }
  static StepResult finish(std::string answer) { return {{}, std::move(answer), {}}; }
  static StepResult fail(std::string why) { return {{}, {}, std::move(why)}; }
  static StepResult wait() { return {}; }
};

inline constexpr std::string_view kRetrySuffix = "~retry";

/// Built-in repair policy: retry an invalid task once under a new id, with the
/// validator's diagnostics appended to its constraints; give up after that.
inline std::optional<QueryTask> default_repair(const QueryTask& task,
                                               const ValidationOutcome& outcome) {
  if (std::string_view(task.id).ends_with(kRetrySuffix)) return std::nullopt;
  QueryTask retry = task;
  retry.id = task.id + std::string(kRetrySuffix);
  for (const auto& d : outcome.diagnostics) retry.constraints.push_back(d);
  return retry;
}

/// Machine-specific pre-query processing. A fresh instance is created per run;
/// given the same view sequence it must produce the same outputs.
class Controller {
 public:
  virtual ~Controller() = default;

  virtual StepResult step(const MachineView& view) = 0;

  /// Called for each invalid validation. Returning a task retries; returning
  /// nothing marks the branch failed (dependents are dropped).
  virtual std::optional<QueryTask> repair(const MachineView& view, const QueryTask& task,
                                          const ValidationOutcome& outcome) {
    (void)view;
    return default_repair(task, outcome);
  }
};

using ControllerFactory = std::function<std::unique_ptr<Controller>(const Json& params)>;

class ControllerRegistry {
 public:
  ControllerRegistry& add(std::string id, ControllerFactory factory) {
    factories_[std::move(id)] = std::move(factory);
    return *this;
  }
  bool contains(std::string_view id) const { return factories_.find(id) != factories_.end(); }

  std::unique_ptr<Controller> create(const ControllerSpec& spec) const {
    auto it = factories_.find(spec.id);
    if (it == factories_.end()) {
      throw ConfigurationError("unregistered controller \"" + spec.id + "\"");
    }
    return it->second(spec.params);
  }

 private:
  std::map<std::string, ControllerFactory, std::less<>> factories_;
};

struct Registries {
  ValidatorRegistry validators;
  ControllerRegistry controllers;
};

inline void check_definition(const MachineDefinition& def, const Registries& reg) {
  if (def.bindings.empty()) throw ConfigurationError("machine \"" + def.name + "\": no oracle bindings");
  std::set<std::string> roles;
  for (const auto& b : def.bindings) {
    if (b.role.empty()) throw ConfigurationError("machine \"" + def.name + "\": empty role name");
    if (!roles.insert(b.role).second) {
      throw ConfigurationError("machine \"" + def.name + "\": duplicate role \"" + b.role + "\"");
    }
  }
  if (!reg.controllers.contains(def.controller.id)) {
    throw ConfigurationError("unregistered controller \"" + def.controller.id + "\"");
  }
  def.limits.check();
}

// ---------------------------------------------------------------------------
// Dispatch

struct DispatchRequest {
  QueryTask task;
  Prompt prompt;
  QueryContext context;
};

struct DispatchResult {
  Answer answer;
  bool timed_out = false;
};

/// Turns rendered prompts into answers. Results come back in request order.
class Dispatcher {
 public:
  virtual ~Dispatcher() = default;
  virtual std::vector<DispatchResult> dispatch(const std::vector<DispatchRequest>& batch,
                                               std::chrono::milliseconds timeout) const = 0;
};

/// Routes each request to the backend bound to its oracle role. Blocking
/// backends run concurrently under the per-query timeout; deterministic
/// in-process backends run inline.
class OracleSet final : public Dispatcher {
 public:
  OracleSet& bind(std::string role, BackendPtr backend) {
    backends_[std::move(role)] = std::move(backend);
    return *this;
  }

  const BackendPtr& backend(const std::string& role) const {
    auto it = backends_.find(role);
    if (it == backends_.end()) throw DefinitionError("no backend bound to role \"" + role + "\"");
    return it->second;
  }

  std::vector<DispatchResult> dispatch(const std::vector<DispatchRequest>& batch,
                                       std::chrono::milliseconds timeout) const override {
    std::vector<DispatchResult> results(batch.size());
    std::vector<std::optional<std::future<Answer>>> futures(batch.size());
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& b = backend(batch[i].task.oracle_role);
      if (!b->blocking()) continue;
      auto promise = std::make_shared<std::promise<Answer>>();
      futures[i] = promise->get_future();
      std::thread([b, req = batch[i], promise] {
        try {
          promise->set_value(b->query(req.prompt, req.context));
        } catch (...) {
          promise->set_exception(std::current_exception());
        }
      }).detach();
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (futures[i]) continue;
      results[i].answer = backend(batch[i].task.oracle_role)->query(batch[i].prompt, batch[i].context);
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!futures[i]) continue;
      if (futures[i]->wait_until(deadline) == std::future_status::timeout) {
        const auto& b = backend(batch[i].task.oracle_role);
        results[i] = {Answer{batch[i].context.task_id, "", b->id(), {}}, true};
      } else {
        results[i].answer = futures[i]->get();
      }
    }
    return results;
  }

 private:
  std::map<std::string, BackendPtr> backends_;
};

// ---------------------------------------------------------------------------
// Run loop

struct RunResult {
  std::optional<std::string> final_answer;
  Transcript transcript;
  MachineState state;

  bool ok() const noexcept { return final_answer.has_value(); }
  const std::optional<std::string>& diagnostic() const noexcept { return state.diagnostic; }
};

inline std::string answer_digest(std::string_view text) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(text);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = kHex[h & 0xf];
  return out;
}

namespace detail {

class RunLoop {
 public:
  RunLoop(const MachineDefinition& def, const Registries& reg, const Dispatcher& oracles,
          const GroundTruth& truth, const TaskSpec& task, std::uint64_t seed)
      : def_(def), reg_(reg), oracles_(oracles), truth_(truth), task_(task), seed_(seed) {}

  RunResult run() {
    check_definition(def_, reg_);
    truth_.check();
    auto controller = reg_.controllers.create(def_.controller);
    try {
      loop(*controller);
    } catch (const ReplayError&) {
      throw;
    } catch (const BackendError& e) {
      halt(std::nullopt, std::string("backend error: ") + e.what(), Json{{"kind", "backend"}, {"message", e.what()}});
      throw RunError(e.what(), RunError::Cause::backend, std::move(transcript_));
    } catch (const Error& e) {
      halt(std::nullopt, std::string("definition error: ") + e.what(), Json{{"kind", "definition"}, {"message", e.what()}});
      throw RunError(e.what(), RunError::Cause::definition, std::move(transcript_));
    }
    return RunResult{state_.final_answer, std::move(transcript_), std::move(state_)};
  }

 private:
  MachineView view() const { return MachineView{def_, truth_, task_, seed_, state_}; }

  void record(EventKind kind, std::optional<std::string> task_id, Json payload) {
    transcript_.events.push_back(Event{static_cast<std::int64_t>(transcript_.events.size()), kind,
                                       std::move(task_id), std::move(payload)});
  }

  void halt(std::optional<std::string> final_answer, std::optional<std::string> diagnostic,
            Json error = nullptr) {
    state_.halted = true;
    state_.final_answer = std::move(final_answer);
    state_.diagnostic = std::move(diagnostic);
    Json payload = {{"final_answer", state_.final_answer ? Json(*state_.final_answer) : Json(nullptr)},
                    {"diagnostic", state_.diagnostic ? Json(*state_.diagnostic) : Json(nullptr)},
                    {"error", std::move(error)},
                    {"cycles", state_.cycle},
                    {"tasks_created", state_.tasks_created},
                    {"seed", seed_},
                    {"task", task_},
                    {"truth", truth_}};
    record(EventKind::halted, std::nullopt, std::move(payload));
  }

  void loop(Controller& controller) {
    while (true) {
      if (state_.cycle >= def_.limits.max_cycles) {
        halt(std::nullopt, "limit exceeded: max_cycles (" + std::to_string(def_.limits.max_cycles) + ")");
        return;
      }
      StepResult step = controller.step(view());
      ++state_.cycle;
      if (step.final_answer) {
        halt(std::move(step.final_answer), std::nullopt);
        return;
      }
      if (step.failure) {
        halt(std::nullopt, std::move(step.failure));
        return;
      }
      const bool emitted = !step.tasks.empty();
      if (!admit(std::move(step.tasks))) return;
      auto batch = schedule_dispatchable(state_);
      if (batch.empty()) {
        if (!emitted && state_.in_flight.empty()) {
          halt(std::nullopt, "controller stalled: nothing to dispatch");
          return;
        }
        continue;
      }
      auto invalid = dispatch(std::move(batch));
      for (const auto& id : invalid) {
        const QueryTask task = state_.tasks.at(id);
        auto retry = controller.repair(view(), task, state_.validations.at(id));
        if (retry) {
          if (state_.tasks.count(retry->id)) {
            throw DefinitionError("repair reused task id \"" + retry->id + "\"");
          }
          const std::string retry_id = retry->id;
          if (!admit({std::move(*retry)})) return;
          state_.superseded[id] = retry_id;
        } else {
          mark_failed(id);
        }
      }
    }
  }

  /// Checks and records new tasks. Returns false if the run halted on max_tasks.
  bool admit(std::vector<QueryTask> tasks) {
    std::set<std::string> batch_ids;
    for (const auto& t : tasks) batch_ids.insert(t.id);
    for (auto& t : tasks) {
      t.check();
      if (state_.tasks.count(t.id)) throw DefinitionError("duplicate query-task id \"" + t.id + "\"");
      if (!def_.binding(t.oracle_role)) {
        throw DefinitionError("query-task \"" + t.id + "\" uses unknown role \"" + t.oracle_role + "\"");
      }
      if (!reg_.validators.contains(t.validation_method.validator)) {
        throw ConfigurationError("query-task \"" + t.id + "\" names unregistered validator \"" +
                                 t.validation_method.validator + "\"");
      }
      for (const auto& d : t.depends_on) {
        if (!state_.tasks.count(d) && !batch_ids.count(d)) {
          throw DefinitionError("query-task \"" + t.id + "\" depends on unknown task \"" + d + "\"");
        }
      }
      if (state_.tasks_created >= def_.limits.max_tasks) {
        halt(std::nullopt, "limit exceeded: max_tasks (" + std::to_string(def_.limits.max_tasks) + ")");
        return false;
      }
      ++state_.tasks_created;
      record(EventKind::task_created, t.id, Json(t));
      state_.tasks[t.id] = t;
      state_.pending.emplace(t.id, std::move(t));
    }
    cascade_failures();
    return true;
  }

  void mark_failed(const std::string& id) {
    state_.failed.insert(id);
    cascade_failures();
  }

  void cascade_failures() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto it = state_.pending.begin(); it != state_.pending.end();) {
        bool dead = false;
        for (const auto& d : it->second.depends_on) dead = dead || state_.is_failed(d);
        if (dead) {
          state_.failed.insert(it->first);
          it = state_.pending.erase(it);
          changed = true;
        } else {
          ++it;
        }
      }
    }
  }

  /// Fills prior extracts from validated dependencies and checks that any
  /// controller-supplied extract is a validated span.
  void attach_prior_extracts(QueryTask& t) const {
    for (const auto& p : t.prior_extracts) {
      const auto* o = state_.outcome(p.source_task_id);
      if (!o || std::find(o->extracted_spans.begin(), o->extracted_spans.end(), p.span) ==
                    o->extracted_spans.end()) {
        throw DefinitionError("query-task \"" + t.id + "\": prior extract from \"" + p.source_task_id +
                              "\" is not a validated span");
      }
    }
    for (const auto& dep : t.depends_on) {
      const bool supplied = std::any_of(t.prior_extracts.begin(), t.prior_extracts.end(),
                                        [&](const PriorExtract& p) { return p.source_task_id == dep; });
      if (supplied) continue;
      for (const auto& span : state_.outcome(dep)->extracted_spans) {
        t.prior_extracts.push_back({dep, span});
      }
    }
  }

  /// Dispatches one batch and validates the answers. Returns the ids that came back invalid.
  std::vector<std::string> dispatch(std::vector<QueryTask> batch) {
    std::vector<DispatchRequest> requests;
    requests.reserve(batch.size());
    for (auto& t : batch) {
      const auto* binding = def_.binding(t.oracle_role);
      if (binding->modality == Modality::vision) {
        throw DefinitionError("role \"" + t.oracle_role + "\": vision modality is not supported");
      }
      attach_prior_extracts(t);
      Prompt prompt = render_prompt(t, truth_);
      record(EventKind::prompt_rendered, t.id, Json(prompt));
      state_.pending.erase(t.id);
      state_.in_flight.insert(t.id);
      state_.tasks[t.id] = t;
      QueryContext ctx{seed_, t.id};
      requests.push_back({std::move(t), std::move(prompt), std::move(ctx)});
    }
    auto results = oracles_.dispatch(requests, def_.limits.per_query_timeout);
    std::vector<std::string> invalid;
    for (std::size_t i = 0; i < requests.size(); ++i) {
      const auto& t = requests[i].task;
      auto& res = results[i];
      res.answer.query_task_id = t.id;
      record(EventKind::answer_received, t.id,
             Json{{"answer", res.answer}, {"digest", answer_digest(res.answer.text)},
                  {"timed_out", res.timed_out}});
      ValidationOutcome outcome =
          res.timed_out ? ValidationOutcome::invalid({"timeout"})
                        : reg_.validators.validate(res.answer, t.validation_method,
                                                   ValidationContext{&truth_, t.prior_extracts});
      record(EventKind::validated, t.id, Json(outcome));
      state_.in_flight.erase(t.id);
      state_.answers[t.id] = std::move(res.answer);
      if (!outcome.usable()) invalid.push_back(t.id);
      state_.validations[t.id] = std::move(outcome);
    }
    return invalid;
  }

  const MachineDefinition& def_;
  const Registries& reg_;
  const Dispatcher& oracles_;
  const GroundTruth& truth_;
  const TaskSpec& task_;
  std::uint64_t seed_;
  MachineState state_;
  Transcript transcript_;
};

}  // namespace detail

/// Executes a machine until it halts. Limits produce a halted run with a
/// diagnostic; backend and definition failures throw RunError carrying the
/// partial transcript.
inline RunResult run(const MachineDefinition& machine, const Registries& registries,
                     const Dispatcher& oracles, const GroundTruth& truth, const TaskSpec& task,
                     std::uint64_t seed) {
  return detail::RunLoop(machine, registries, oracles, truth, task, seed).run();
}

// ---------------------------------------------------------------------------
// Replay

namespace detail {

/// Answers from a recorded transcript, checking each answer's digest.
class TranscriptDispatcher final : public Dispatcher {
 public:
  explicit TranscriptDispatcher(const Transcript& t) {
    for (const auto& e : t.events) {
      if (e.kind == EventKind::answer_received && e.task_id) {
        recorded_[*e.task_id] = &e;
      } else if (e.kind == EventKind::halted) {
        const auto& err = e.payload.value("error", Json(nullptr));
        if (err.is_object() && err.value("kind", "") == "backend") {
          backend_error_ = err.value("message", std::string("backend error"));
        }
      }
    }
  }

  std::vector<DispatchResult> dispatch(const std::vector<DispatchRequest>& batch,
                                       std::chrono::milliseconds) const override {
    std::vector<DispatchResult> out;
    for (const auto& req : batch) {
      auto it = recorded_.find(req.context.task_id);
      if (it == recorded_.end()) {
        if (backend_error_) throw BackendError(*backend_error_);
        throw BackendError("replay: no recorded answer for task \"" + req.context.task_id + "\"");
      }
      const Event& e = *it->second;
      Answer answer;
      try {
        answer = e.payload.at("answer").get<Answer>();
      } catch (const std::exception& ex) {
        throw ReplayError("replay: unreadable answer at seq " + std::to_string(e.seq) + ": " + ex.what(), e.seq);
      }
      if (e.payload.value("digest", std::string()) != answer_digest(answer.text)) {
        throw ReplayError("replay: answer at seq " + std::to_string(e.seq) +
                              " does not match its digest (edited transcript)",
                          e.seq);
      }
      out.push_back({std::move(answer), e.payload.value("timed_out", false)});
    }
    return out;
  }

 private:
  std::map<std::string, const Event*> recorded_;
  std::optional<std::string> backend_error_;
};

}  // namespace detail

/// Re-executes a recorded run against its own answers and checks that the
/// result is byte-identical. Returns the regenerated transcript; throws
/// ReplayError naming the first divergent event.
inline Transcript replay(const Transcript& recorded, const MachineDefinition& machine,
                         const Registries& registries) {
  if (recorded.events.empty()) throw ReplayError("replay: no events", 0);
  const Event& last = recorded.events.back();
  if (last.kind != EventKind::halted) {
    throw ReplayError("replay: transcript does not end with a halted event", last.seq);
  }
  GroundTruth truth;
  TaskSpec task;
  std::uint64_t seed = 0;
  try {
    truth = last.payload.at("truth").get<GroundTruth>();
    task = last.payload.at("task").get<TaskSpec>();
    seed = last.payload.at("seed").get<std::uint64_t>();
  } catch (const std::exception& e) {
    throw ReplayError(std::string("replay: halted event lacks run inputs: ") + e.what(), last.seq);
  }

  detail::TranscriptDispatcher oracles(recorded);
  Transcript produced;
  try {
    produced = run(machine, registries, oracles, truth, task, seed).transcript;
  } catch (const RunError& e) {
    produced = e.transcript();
  }
  const std::size_t n = std::min(produced.events.size(), recorded.events.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (produced.events[i].to_line() != recorded.events[i].to_line()) {
      throw ReplayError("replay: diverged at seq " + std::to_string(i) + " (" +
                            std::string(to_string(recorded.events[i].kind)) + ")",
                        static_cast<std::int64_t>(i));
    }
  }
  if (produced.events.size() != recorded.events.size()) {
    throw ReplayError("replay: diverged at seq " + std::to_string(n) + " (length differs)",
                      static_cast<std::int64_t>(n));
  }
  return produced;
}

// ---------------------------------------------------------------------------
// Generic controllers

/// "echo": one task whose description is the task statement; the final answer
/// is the validated answer. params: {"role": role (first binding), "validator": method}
class EchoController final : public Controller {
 public:
  explicit EchoController(const Json& params) {
    detail::check_keys(params, "echo controller params", {"role", "validator"});
    role_ = params.value("role", std::string());
    if (params.contains("validator")) {
      method_ = params["validator"].get<ValidationMethod>();
    } else {
      method_.validator = "always-accept";
    }
  }

  StepResult step(const MachineView& view) override {
    if (!started_) {
      started_ = true;
      QueryTask t;
      t.id = "echo";
      t.description = view.task.statement;
      t.validation_method = method_;
      t.oracle_role = role_.empty() ? view.machine.bindings.front().role : role_;
      return StepResult::emit({std::move(t)});
    }
    if (view.state.is_failed("echo")) return StepResult::fail("task \"echo\" failed validation");
    if (const auto* o = view.state.outcome("echo"); o && o->usable()) {
      return StepResult::finish(text::join(o->extracted_spans, "\n"));
    }
    return StepResult::wait();
  }

 private:
  std::string role_;
  ValidationMethod method_;
  bool started_ = false;
};

/// "dag": a fixed graph of query-tasks given in params.
///   {"tasks": [QueryTask...], "final": task id (last task), "adaptive": false}
/// Non-adaptive mode emits every task up front and lets the scheduler gate on
/// dependencies. Adaptive mode emits a task only once its dependencies are
/// validated, filling prior extracts itself. The final answer is the final
/// task's extracted spans joined by newlines.
class DagController final : public Controller {
 public:
  explicit DagController(const Json& params) {
    detail::check_keys(params, "dag controller params", {"tasks", "final", "adaptive"});
    tasks_ = detail::required<std::vector<QueryTask>>(params, "tasks", "dag controller params");
    if (tasks_.empty()) throw ConfigurationError("dag controller: no tasks");
    final_ = params.value("final", tasks_.back().id);
    adaptive_ = params.value("adaptive", false);
  }

  StepResult step(const MachineView& view) override {
    const auto& st = view.state;
    if (st.is_failed(final_)) return StepResult::fail("final task \"" + final_ + "\" failed");
    if (const auto* o = st.outcome(final_); o && o->usable()) {
      return StepResult::finish(text::join(o->extracted_spans, "\n"));
    }
    if (adaptive_) {
      for (bool changed = true; changed;) {
        changed = false;
        for (const auto& t : tasks_) {
          if (emitted_.count(t.id) || dead_.count(t.id)) continue;
          for (const auto& d : t.depends_on) {
            if (st.is_failed(d) || dead_.count(d)) {
              dead_.insert(t.id);
              changed = true;
              break;
            }
          }
        }
      }
      if (dead_.count(final_)) return StepResult::fail("final task \"" + final_ + "\" lost a dependency");
    }
    std::vector<QueryTask> out;
    for (const auto& t : tasks_) {
      if (emitted_.count(t.id)) continue;
      if (adaptive_) {
        if (dead_.count(t.id)) continue;
        bool ready = true;
        for (const auto& d : t.depends_on) {
          const auto* o = st.outcome(d);
          ready = ready && o && o->usable();
        }
        if (!ready) continue;
        QueryTask copy = t;
        for (const auto& d : t.depends_on) {
          for (const auto& span : st.outcome(d)->extracted_spans) copy.prior_extracts.push_back({d, span});
        }
        out.push_back(std::move(copy));
      } else {
        out.push_back(t);
      }
      emitted_.insert(t.id);
    }
    return StepResult::emit(std::move(out));
  }

 private:
  std::vector<QueryTask> tasks_;
  std::string final_;
  bool adaptive_ = false;
  std::set<std::string> emitted_;
  std::set<std::string> dead_;
};

inline void register_generic_controllers(ControllerRegistry& registry) {
  registry.add("echo", [](const Json& p) { return std::make_unique<EchoController>(p); })
      .add("dag", [](const Json& p) { return std::make_unique<DagController>(p); });
}

}  // namespace aiom
