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

// Domain types of an AI-oracle machine: the ground truth T, the task Q,
// query-tasks with their six attribute kinds, prompts, answers, validation
// outcomes and oracle bindings. No execution logic lives here.

#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aiom/error.hpp"
#include "aiom/text.hpp"

namespace aiom {

using Json = nlohmann::json;
using StringMap = std::map<std::string, std::string>;

namespace detail {

/// Rejects keys outside `allowed`; `what` names the object in the message.
inline void check_keys(const Json& j, std::string_view what,
                       std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw SchemaError(std::string(what) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok) {
      throw SchemaError(std::string(what) + ": unknown field \"" + item.key() + "\"");
    }
  }
}

template <typename T>
T required(const Json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw SchemaError(std::string(what) + ": missing field \"" + key + "\"");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(std::string(what) + ": field \"" + key + "\" has the wrong type");
  }
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(std::string(what) + ": field \"" + key + "\" has the wrong type");
  }
}

/// JSON string literal for an identifier, invalid UTF-8 replaced.
inline std::string quote(std::string_view s) {
  return Json(std::string(s)).dump(-1, ' ', false, Json::error_handler_t::replace);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ground truth and task

struct Document {
  std::string id;
  std::string title;
  std::string body;
  StringMap metadata;

  bool operator==(const Document&) const = default;
};

/// The set T of reference documents. May be empty.
struct GroundTruth {
  std::vector<Document> documents;

  const Document* find(std::string_view id) const {
    for (const auto& d : documents) {
      if (d.id == id) return &d;
    }
    return nullptr;
  }

  /// Throws DefinitionError on empty or duplicate ids.
  void check() const {
    std::set<std::string_view> seen;
    for (const auto& d : documents) {
      if (d.id.empty()) throw DefinitionError("ground truth: document id must be non-empty");
      if (!seen.insert(d.id).second) {
        throw DefinitionError("ground truth: duplicate document id \"" + d.id + "\"");
      }
    }
  }

  bool operator==(const GroundTruth&) const = default;
};

/// The task Q.
struct TaskSpec {
  std::string statement;
  StringMap parameters;

  std::string param(const std::string& key, std::string fallback = {}) const {
    auto it = parameters.find(key);
    return it == parameters.end() ? std::move(fallback) : it->second;
  }

  bool operator==(const TaskSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Query-tasks

struct ContextExcerpt {
  std::string document_id;
  std::string span;
  bool operator==(const ContextExcerpt&) const = default;
};

struct PriorExtract {
  std::string source_task_id;
  std::string span;
  bool operator==(const PriorExtract&) const = default;
};

struct Example {
  std::string input;
  std::string output;
  bool operator==(const Example&) const = default;
};

struct ValidationMethod {
  std::string validator;
  Json params = Json::object();
  bool operator==(const ValidationMethod&) const = default;
};

/// One unit of oracle interaction: a description plus the six attribute kinds
/// (context, prior extracts, requirements, examples, constraints, validation
/// method), dependency edges and the oracle role that answers it.
struct QueryTask {
  std::string id;
  std::string description;
  std::vector<ContextExcerpt> context_excerpts;
  std::vector<PriorExtract> prior_extracts;
  std::vector<std::string> requirements;
  std::vector<Example> examples;
  std::vector<std::string> constraints;
  ValidationMethod validation_method;
  std::set<std::string> depends_on;
  std::string oracle_role;

  bool adaptive() const noexcept { return !depends_on.empty(); }

  /// Structural invariants that do not need a registry or machine.
  void check() const {
    if (id.empty()) throw DefinitionError("query-task: id must be non-empty");
    for (const auto& p : prior_extracts) {
      if (!depends_on.count(p.source_task_id)) {
        throw DefinitionError("query-task \"" + id + "\": prior extract source \"" +
                              p.source_task_id + "\" is not in depends_on");
      }
    }
    if (depends_on.count(id)) {
      throw DefinitionError("query-task \"" + id + "\" depends on itself");
    }
  }

  bool operator==(const QueryTask&) const = default;
};

struct Prompt {
  std::string rendered_text;
  std::string template_id;
  std::string role;
  bool operator==(const Prompt&) const = default;
};

struct Answer {
  std::string query_task_id;
  std::string text;
  std::string oracle_id;
  StringMap meta;
  bool operator==(const Answer&) const = default;
};

enum class ValidationStatus { valid, partial, invalid };

inline std::string_view to_string(ValidationStatus s) noexcept {
  switch (s) {
    case ValidationStatus::valid:
      return "valid";
    case ValidationStatus::partial:
      return "partial";
    case ValidationStatus::invalid:
      return "invalid";
  }
  return "invalid";
}

inline ValidationStatus parse_validation_status(std::string_view s) {
  if (s == "valid") return ValidationStatus::valid;
  if (s == "partial") return ValidationStatus::partial;
  if (s == "invalid") return ValidationStatus::invalid;
  throw SchemaError("unknown validation status \"" + std::string(s) + "\"");
}

struct ValidationOutcome {
  ValidationStatus status = ValidationStatus::invalid;
  std::vector<std::string> extracted_spans;
  std::vector<std::string> diagnostics;

  static ValidationOutcome valid(std::vector<std::string> spans,
                                 std::vector<std::string> diagnostics = {}) {
    return {ValidationStatus::valid, std::move(spans), std::move(diagnostics)};
  }
  static ValidationOutcome partial(std::vector<std::string> spans,
                                   std::vector<std::string> diagnostics = {}) {
    return {ValidationStatus::partial, std::move(spans), std::move(diagnostics)};
  }
  static ValidationOutcome invalid(std::vector<std::string> diagnostics) {
    return {ValidationStatus::invalid, {}, std::move(diagnostics)};
  }

  /// valid and partial outcomes satisfy a dependency edge.
  bool usable() const noexcept { return status != ValidationStatus::invalid; }

  bool holds_invariants() const noexcept {
    switch (status) {
      case ValidationStatus::valid:
        return !extracted_spans.empty();
      case ValidationStatus::invalid:
        return extracted_spans.empty();
      case ValidationStatus::partial:
        return true;
    }
    return false;
  }

  bool operator==(const ValidationOutcome&) const = default;
};

enum class Modality { language, reasoning, vision };

inline std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::language:
      return "language";
    case Modality::reasoning:
      return "reasoning";
    case Modality::vision:
      return "vision";
  }
  return "language";
}

inline Modality parse_modality(std::string_view s) {
  if (s == "language") return Modality::language;
  if (s == "reasoning") return Modality::reasoning;
  if (s == "vision") return Modality::vision;
  throw SchemaError("unknown modality \"" + std::string(s) + "\"");
}

/// A named oracle role bound to a backend. The set of bindings of a machine is O_M.
struct OracleBinding {
  std::string role;
  Modality modality = Modality::language;
  std::string backend_ref;
  bool operator==(const OracleBinding&) const = default;
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(Json& j, const Document& d) {
  j = Json{{"id", d.id}, {"title", d.title}, {"body", d.body}, {"metadata", d.metadata}};
}
inline void from_json(const Json& j, Document& d) {
  detail::check_keys(j, "document", {"id", "title", "body", "metadata"});
  d.id = detail::required<std::string>(j, "id", "document");
  d.title = detail::optional_field<std::string>(j, "title", "", "document");
  d.body = detail::optional_field<std::string>(j, "body", "", "document");
  d.metadata = detail::optional_field<StringMap>(j, "metadata", {}, "document");
}

inline void to_json(Json& j, const GroundTruth& t) { j = Json{{"documents", t.documents}}; }
inline void from_json(const Json& j, GroundTruth& t) {
  detail::check_keys(j, "ground truth", {"documents"});
  t.documents = detail::optional_field<std::vector<Document>>(j, "documents", {}, "ground truth");
}

inline void to_json(Json& j, const TaskSpec& t) {
  j = Json{{"statement", t.statement}, {"parameters", t.parameters}};
}
inline void from_json(const Json& j, TaskSpec& t) {
  detail::check_keys(j, "task", {"statement", "parameters"});
  t.statement = detail::required<std::string>(j, "statement", "task");
  t.parameters = detail::optional_field<StringMap>(j, "parameters", {}, "task");
}

inline void to_json(Json& j, const ContextExcerpt& c) {
  j = Json{{"document_id", c.document_id}, {"span", c.span}};
}
inline void from_json(const Json& j, ContextExcerpt& c) {
  detail::check_keys(j, "context excerpt", {"document_id", "span"});
  c.document_id = detail::required<std::string>(j, "document_id", "context excerpt");
  c.span = detail::required<std::string>(j, "span", "context excerpt");
}

inline void to_json(Json& j, const PriorExtract& p) {
  j = Json{{"source_task_id", p.source_task_id}, {"span", p.span}};
}
inline void from_json(const Json& j, PriorExtract& p) {
  detail::check_keys(j, "prior extract", {"source_task_id", "span"});
  p.source_task_id = detail::required<std::string>(j, "source_task_id", "prior extract");
  p.span = detail::required<std::string>(j, "span", "prior extract");
}

inline void to_json(Json& j, const Example& e) {
  j = Json{{"input", e.input}, {"output", e.output}};
}
inline void from_json(const Json& j, Example& e) {
  detail::check_keys(j, "example", {"input", "output"});
  e.input = detail::required<std::string>(j, "input", "example");
  e.output = detail::required<std::string>(j, "output", "example");
}

inline void to_json(Json& j, const ValidationMethod& m) {
  j = Json{{"validator", m.validator}, {"params", m.params}};
}
inline void from_json(const Json& j, ValidationMethod& m) {
  detail::check_keys(j, "validation method", {"validator", "params"});
  m.validator = detail::required<std::string>(j, "validator", "validation method");
  m.params = j.contains("params") ? j.at("params") : Json::object();
}

inline void to_json(Json& j, const QueryTask& t) {
  j = Json{{"id", t.id},
           {"description", t.description},
           {"context_excerpts", t.context_excerpts},
           {"prior_extracts", t.prior_extracts},
           {"requirements", t.requirements},
           {"examples", t.examples},
           {"constraints", t.constraints},
           {"validation_method", t.validation_method},
           {"depends_on", t.depends_on},
           {"oracle_role", t.oracle_role}};
}
inline void from_json(const Json& j, QueryTask& t) {
  constexpr std::string_view what = "query-task";
  detail::check_keys(j, what,
                     {"id", "description", "context_excerpts", "prior_extracts", "requirements",
                      "examples", "constraints", "validation_method", "depends_on",
                      "oracle_role"});
  t.id = detail::required<std::string>(j, "id", what);
  t.description = detail::required<std::string>(j, "description", what);
  t.context_excerpts =
      detail::optional_field<std::vector<ContextExcerpt>>(j, "context_excerpts", {}, what);
  t.prior_extracts =
      detail::optional_field<std::vector<PriorExtract>>(j, "prior_extracts", {}, what);
  t.requirements = detail::optional_field<std::vector<std::string>>(j, "requirements", {}, what);
  t.examples = detail::optional_field<std::vector<Example>>(j, "examples", {}, what);
  t.constraints = detail::optional_field<std::vector<std::string>>(j, "constraints", {}, what);
  t.validation_method = detail::required<ValidationMethod>(j, "validation_method", what);
  t.depends_on = detail::optional_field<std::set<std::string>>(j, "depends_on", {}, what);
  t.oracle_role = detail::required<std::string>(j, "oracle_role", what);
}

inline void to_json(Json& j, const Prompt& p) {
  j = Json{{"rendered_text", p.rendered_text}, {"template_id", p.template_id}, {"role", p.role}};
}
inline void from_json(const Json& j, Prompt& p) {
  detail::check_keys(j, "prompt", {"rendered_text", "template_id", "role"});
  p.rendered_text = detail::required<std::string>(j, "rendered_text", "prompt");
  p.template_id = detail::required<std::string>(j, "template_id", "prompt");
  p.role = detail::required<std::string>(j, "role", "prompt");
}

inline void to_json(Json& j, const Answer& a) {
  j = Json{{"query_task_id", a.query_task_id},
           {"text", a.text},
           {"oracle_id", a.oracle_id},
           {"meta", a.meta}};
}
inline void from_json(const Json& j, Answer& a) {
  detail::check_keys(j, "answer", {"query_task_id", "text", "oracle_id", "meta"});
  a.query_task_id = detail::required<std::string>(j, "query_task_id", "answer");
  a.text = detail::required<std::string>(j, "text", "answer");
  a.oracle_id = detail::required<std::string>(j, "oracle_id", "answer");
  a.meta = detail::optional_field<StringMap>(j, "meta", {}, "answer");
}

inline void to_json(Json& j, const ValidationOutcome& v) {
  j = Json{{"status", std::string(to_string(v.status))},
           {"extracted_spans", v.extracted_spans},
           {"diagnostics", v.diagnostics}};
}
inline void from_json(const Json& j, ValidationOutcome& v) {
  detail::check_keys(j, "validation outcome", {"status", "extracted_spans", "diagnostics"});
  v.status = parse_validation_status(detail::required<std::string>(j, "status", "validation outcome"));
  v.extracted_spans =
      detail::optional_field<std::vector<std::string>>(j, "extracted_spans", {}, "validation outcome");
  v.diagnostics =
      detail::optional_field<std::vector<std::string>>(j, "diagnostics", {}, "validation outcome");
}

inline void to_json(Json& j, const OracleBinding& b) {
  j = Json{{"role", b.role}, {"modality", std::string(to_string(b.modality))},
           {"backend_ref", b.backend_ref}};
}
inline void from_json(const Json& j, OracleBinding& b) {
  detail::check_keys(j, "oracle binding", {"role", "modality", "backend_ref"});
  b.role = detail::required<std::string>(j, "role", "oracle binding");
  b.modality = parse_modality(detail::optional_field<std::string>(j, "modality", "language", "oracle binding"));
  b.backend_ref = detail::required<std::string>(j, "backend_ref", "oracle binding");
}

// ---------------------------------------------------------------------------
// Prompt rendering
//
// Template "sections-v1": labeled "### <SECTION>" blocks in the fixed order
// DESCRIPTION, CONTEXT, PRIOR RESULTS, REQUIREMENTS, EXAMPLES, CONSTRAINTS.
// Empty sections are omitted. Every content line is indented or escaped so
// that no content can forge a section header; the rendering is injective.

inline constexpr std::string_view kPromptTemplateId = "sections-v1";

namespace detail {

inline std::vector<std::string_view> lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline void append_indented(std::string& out, std::string_view text, std::string_view indent) {
  for (auto line : lines(text)) {
    out += indent;
    out += line;
    out += '\n';
  }
}

inline void append_item(std::string& out, std::string_view text) {
  bool first = true;
  for (auto line : lines(text)) {
    out += first ? "- " : "  ";
    out += line;
    out += '\n';
    first = false;
  }
}

inline void append_escaped(std::string& out, std::string_view text) {
  for (auto line : lines(text)) {
    if (line.starts_with("###") || line.starts_with("\\")) out += '\\';
    out += line;
    out += '\n';
  }
}

}  // namespace detail

/// Forms the prompt for a query-task. Pure: identical inputs give identical bytes.
/// Throws ReferenceError when a context excerpt names a document not in `truth`.
inline Prompt render_prompt(const QueryTask& task, const GroundTruth& truth) {
  for (const auto& c : task.context_excerpts) {
    if (!truth.find(c.document_id)) {
      throw ReferenceError("query-task \"" + task.id + "\": unknown document \"" +
                           c.document_id + "\"");
    }
  }
  std::string out = "### DESCRIPTION\n";
  detail::append_escaped(out, task.description);

  if (!task.context_excerpts.empty()) {
    out += "\n### CONTEXT\n";
    for (const auto& c : task.context_excerpts) {
      out += "- document " + detail::quote(c.document_id) + ":\n";
      detail::append_indented(out, c.span, "    ");
    }
  }
  if (!task.prior_extracts.empty()) {
    out += "\n### PRIOR RESULTS\n";
    for (const auto& p : task.prior_extracts) {
      out += "- task " + detail::quote(p.source_task_id) + ":\n";
      detail::append_indented(out, p.span, "    ");
    }
  }
  if (!task.requirements.empty()) {
    out += "\n### REQUIREMENTS\n";
    for (const auto& r : task.requirements) detail::append_item(out, r);
  }
  if (!task.examples.empty()) {
    out += "\n### EXAMPLES\n";
    for (const auto& e : task.examples) {
      out += "- input:\n";
      detail::append_indented(out, e.input, "    ");
      out += "  output:\n";
      detail::append_indented(out, e.output, "    ");
    }
  }
  if (!task.constraints.empty()) {
    out += "\n### CONSTRAINTS\n";
    for (const auto& c : task.constraints) detail::append_item(out, c);
  }
  return Prompt{std::move(out), std::string(kPromptTemplateId), task.oracle_role};
}

/// Document ids of the CONTEXT section of a rendered prompt, in order.
inline std::vector<std::string> context_document_ids(std::string_view rendered) {
  std::vector<std::string> ids;
  bool in_context = false;
  for (auto line : detail::lines(rendered)) {
    if (line.starts_with("### ")) {
      in_context = line == "### CONTEXT";
      continue;
    }
    constexpr std::string_view marker = "- document ";
    if (in_context && line.starts_with(marker) && line.ends_with(":")) {
      auto literal = line.substr(marker.size(), line.size() - marker.size() - 1);
      auto parsed = Json::parse(literal, nullptr, false);
      if (parsed.is_string()) ids.push_back(parsed.get<std::string>());
    }
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Validation

/// What a validator may consult besides the answer itself.
struct ValidationContext {
  const GroundTruth* truth = nullptr;
  std::vector<PriorExtract> prior_extracts;
};

using ValidatorFn =
    std::function<ValidationOutcome(const Answer&, const Json& params, const ValidationContext&)>;

/// Validators keyed by id; a query-task's validation method names one of these.
class ValidatorRegistry {
 public:
  ValidatorRegistry& add(std::string id, ValidatorFn fn) {
    validators_[std::move(id)] = std::move(fn);
    return *this;
  }

  bool contains(std::string_view id) const { return validators_.find(id) != validators_.end(); }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, fn] : validators_) out.push_back(id);
    return out;
  }

  ValidationOutcome validate(const Answer& answer, const ValidationMethod& method,
                             const ValidationContext& context) const {
    auto it = validators_.find(method.validator);
    if (it == validators_.end()) {
      throw ConfigurationError("unregistered validator \"" + method.validator + "\"");
    }
    auto outcome = it->second(answer, method.params, context);
    if (!outcome.holds_invariants()) {
      throw DefinitionError("validator \"" + method.validator +
                            "\" produced an outcome violating its invariants");
    }
    return outcome;
  }

 private:
  std::map<std::string, ValidatorFn, std::less<>> validators_;
};

}  // namespace aiom
