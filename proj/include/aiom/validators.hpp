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

// Built-in validators that need nothing beyond the answer text:
//   always-accept  whole answer is one valid span
//   contains-terms {"terms": [..]} case-insensitive substring presence
//   numeric-range  {"min", "max", "clamp"} first integer token in range
//   one-of         {"choices": [..], "label"} exact choice, case-insensitive
//   comparison     harder / same / easier or a signed number

#include <string>
#include <vector>

#include "aiom/core.hpp"
#include "aiom/text.hpp"

namespace aiom {

namespace validators {

inline ValidationOutcome always_accept(const Answer& answer, const Json&,
                                       const ValidationContext&) {
  return ValidationOutcome::valid({answer.text});
}

inline ValidationOutcome contains_terms(const Answer& answer, const Json& params,
                                        const ValidationContext&) {
  const auto terms = params.value("terms", std::vector<std::string>{});
  if (terms.empty()) throw ConfigurationError("contains-terms: \"terms\" must be non-empty");
  const std::string haystack = text::to_lower(answer.text);
  std::vector<std::string> present, missing;
  for (const auto& t : terms) {
    (haystack.find(text::to_lower(t)) != std::string::npos ? present : missing).push_back(t);
  }
  if (missing.empty()) return ValidationOutcome::valid({answer.text});
  if (present.empty()) {
    return ValidationOutcome::invalid({"none of the required terms present: " +
                                       text::join(terms, ", ")});
  }
  std::vector<std::string> spans;
  for (auto& sentence : text::split_sentences(answer.text)) {
    const std::string lower = text::to_lower(sentence);
    for (const auto& t : present) {
      if (lower.find(text::to_lower(t)) != std::string::npos) {
        spans.push_back(sentence);
        break;
      }
    }
  }
  if (spans.empty()) spans.push_back(answer.text);
  return ValidationOutcome::partial(std::move(spans),
                                    {"missing terms: " + text::join(missing, ", ")});
}

inline ValidationOutcome numeric_range(const Answer& answer, const Json& params,
                                       const ValidationContext&) {
  const long lo = params.value("min", 0L);
  const long hi = params.value("max", 0L);
  const bool clamp = params.value("clamp", false);
  if (lo > hi) throw ConfigurationError("numeric-range: min exceeds max");
  auto value = text::first_integer(answer.text);
  if (!value) return ValidationOutcome::invalid({"no integer found in answer"});
  if (*value >= lo && *value <= hi) return ValidationOutcome::valid({std::to_string(*value)});
  if (!clamp) {
    return ValidationOutcome::invalid({"value " + std::to_string(*value) + " outside [" +
                                       std::to_string(lo) + ", " + std::to_string(hi) + "]"});
  }
  const long clamped = *value < lo ? lo : hi;
  return ValidationOutcome::valid({std::to_string(clamped)},
                                  {"clamped " + std::to_string(*value) + " to " +
                                   std::to_string(clamped)});
}

inline std::string one_of_instruction(const Json& params) {
  const auto choices = params.value("choices", std::vector<std::string>{});
  return "answer with exactly one " + params.value("label", std::string("option")) +
         " from: " + text::join(choices, ", ");
}

/// Normalizes a free-text answer for choice matching: trimmed, surrounding
/// quotes and a trailing period removed, lower-cased.
inline std::string normalize_choice(std::string_view s) {
  auto t = text::trim(s);
  while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.remove_prefix(1);
  while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '.')) {
    t.remove_suffix(1);
  }
  return text::to_lower(text::trim(t));
}

inline ValidationOutcome one_of(const Answer& answer, const Json& params,
                                const ValidationContext&) {
  const auto choices = params.value("choices", std::vector<std::string>{});
  if (choices.empty()) throw ConfigurationError("one-of: \"choices\" must be non-empty");
  const std::string got = normalize_choice(answer.text);
  for (const auto& c : choices) {
    if (text::to_lower(c) == got) return ValidationOutcome::valid({c});
  }
  return ValidationOutcome::invalid({one_of_instruction(params)});
}

inline constexpr std::string_view kComparisonInstruction =
    "answer with one word: harder, same, or easier";

inline ValidationOutcome comparison(const Answer& answer, const Json&,
                                    const ValidationContext&) {
  auto v = text::parse_comparison(answer.text);
  if (!v) return ValidationOutcome::invalid({std::string(kComparisonInstruction)});
  return ValidationOutcome::valid({*v > 0 ? "+1" : *v < 0 ? "-1" : "0"});
}

}  // namespace validators

inline void register_basic_validators(ValidatorRegistry& registry) {
  registry.add("always-accept", validators::always_accept)
      .add("contains-terms", validators::contains_terms)
      .add("numeric-range", validators::numeric_range)
      .add("one-of", validators::one_of)
      .add("comparison", validators::comparison);
}

/// Runs the validator named by `method`. Throws ConfigurationError when it is not registered.
inline ValidationOutcome validate(const ValidatorRegistry& registry, const Answer& answer,
                                  const ValidationMethod& method,
                                  const ValidationContext& context) {
  return registry.validate(answer, method, context);
}

}  // namespace aiom
