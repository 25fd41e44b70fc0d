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

// Oracle backends behind a single query interface. This header holds the
// interface plus the two deterministic implementations; the HTTP backend
// lives in http_backend.hpp so that only users of it pull in the transport.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aiom/core.hpp"
#include "aiom/random.hpp"

namespace aiom {

/// Per-call inputs besides the prompt. Any randomness a backend uses must be
/// derived from (seed, task_id) only.
struct QueryContext {
  std::uint64_t seed = 0;
  std::string task_id;
};

class Backend {
 public:
  virtual ~Backend() = default;

  /// Identifier recorded as Answer::oracle_id.
  virtual const std::string& id() const noexcept = 0;

  /// Must be safe to call concurrently.
  virtual Answer query(const Prompt& prompt, const QueryContext& context) const = 0;

  /// True for backends that wait on I/O; the runtime enforces per-query
  /// timeouts and runs batches concurrently only for these.
  virtual bool blocking() const noexcept { return false; }
};

using BackendPtr = std::shared_ptr<const Backend>;

// ---------------------------------------------------------------------------
// Scripted fixture

/// Ordered (matcher, response) rules; the first rule whose matcher hits the
/// rendered prompt answers. Matchers are a literal substring ("contains") or
/// an ECMAScript regular expression searched in the prompt ("pattern").
class ScriptedBackend final : public Backend {
 public:
  struct Rule {
    std::string matcher;
    bool is_pattern = false;
    std::string response;
  };

  ScriptedBackend(std::string id, std::vector<Rule> rules) : id_(std::move(id)) {
    if (rules.empty()) throw ConfigurationError("scripted backend: at least one rule is required");
    for (auto& r : rules) {
      std::optional<std::regex> re;
      if (r.is_pattern) {
        try {
          re.emplace(r.matcher, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
          throw ConfigurationError("scripted backend: bad pattern \"" + r.matcher + "\": " + e.what());
        }
      }
      rules_.push_back({std::move(r), std::move(re)});
    }
  }

  /// params: {"rules": [{"contains": s, "response": s} | {"pattern": s, "response": s}, ...]}
  static std::shared_ptr<ScriptedBackend> from_params(std::string id, const Json& params) {
    detail::check_keys(params, "scripted backend params", {"rules"});
    std::vector<Rule> rules;
    for (const auto& r : params.value("rules", Json::array())) {
      detail::check_keys(r, "scripted rule", {"contains", "pattern", "response"});
      Rule rule;
      if (r.contains("contains") == r.contains("pattern")) {
        throw SchemaError("scripted rule: exactly one of \"contains\" or \"pattern\" is required");
      }
      rule.is_pattern = r.contains("pattern");
      rule.matcher = detail::required<std::string>(r, rule.is_pattern ? "pattern" : "contains",
                                                   "scripted rule");
      rule.response = detail::required<std::string>(r, "response", "scripted rule");
      rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedBackend>(std::move(id), std::move(rules));
  }

  const std::string& id() const noexcept override { return id_; }

  Answer query(const Prompt& prompt, const QueryContext& context) const override {
    for (const auto& [rule, re] : rules_) {
      const bool hit = re ? std::regex_search(prompt.rendered_text, *re)
                          : prompt.rendered_text.find(rule.matcher) != std::string::npos;
      if (hit) return Answer{context.task_id, rule.response, id_, {}};
    }
    throw FixtureGapError("scripted backend \"" + id_ + "\": no rule matches the prompt for task \"" +
                          context.task_id + "\"");
  }

 private:
  std::string id_;
  std::vector<std::pair<Rule, std::optional<std::regex>>> rules_;
};

// ---------------------------------------------------------------------------
// Seeded stochastic simulator

/// Hidden attributes of synthetic articles, looked up by document id.
struct Latent {
  std::optional<double> difficulty;
  std::string genre;
  int grade = 0;
};

using LatentTable = std::unordered_map<std::string, Latent>;

/// Simulated oracle. The articles a prompt is about are the documents of its
/// CONTEXT section; their hidden attributes come from a LatentTable.
///
/// Behaviors and params (defaults in parentheses):
///   noisy-genre-assessor     accuracy (1), genres (all genres in the table)
///   noisy-grade-assessor     accuracy (0.5), spread_1 (0.7), min_grade (3), max_grade (12)
///       wrong answers are off by 1 with probability spread_1, else by 2,
///       sign uniform, reflected at the grade bounds so they stay wrong.
///   constant-grade-assessor  grade
///   uniform-grade-assessor   min_grade (3), max_grade (12)
///   noisy-comparator         slope (0.15), cap (0.95), tie (0.25), p_correct, basis ("difficulty")
///       gap d = difficulty(first) - difficulty(second). Accuracy is p_correct
///       when given, else min(cap, 0.5 + slope*|d|). basis "difficulty": |d| < tie
///       answers "same", otherwise sign(d) is the truth. basis "grade": the truth
///       is the sign of the grade gap; wrong answers on equal grades lean harder
///       or easier uniformly.
///   adversarial-comparator   garbage_rate (0.1): uniform over harder/same/easier,
///       or an unparseable answer with probability garbage_rate.
class StochasticBackend final : public Backend {
 public:
  enum class Behavior {
    genre_assessor,
    grade_assessor,
    constant_grade,
    uniform_grade,
    comparator,
    adversarial_comparator
  };

  StochasticBackend(std::string id, std::string behavior, const Json& params,
                    std::shared_ptr<const LatentTable> latents)
      : id_(std::move(id)), latents_(std::move(latents)) {
    if (!latents_) latents_ = std::make_shared<LatentTable>();
    const std::string what = "stochastic backend \"" + behavior + "\" params";
    if (behavior == "noisy-genre-assessor") {
      behavior_ = Behavior::genre_assessor;
      detail::check_keys(params, what, {"accuracy", "genres"});
      accuracy_ = detail::optional_field<double>(params, "accuracy", 1.0, what);
      genres_ = detail::optional_field<std::vector<std::string>>(params, "genres", {}, what);
      if (genres_.empty()) {
        std::set<std::string> all;
        for (const auto& [k, v] : *latents_) all.insert(v.genre);
        genres_.assign(all.begin(), all.end());
      }
    } else if (behavior == "noisy-grade-assessor") {
      behavior_ = Behavior::grade_assessor;
      detail::check_keys(params, what, {"accuracy", "spread_1", "min_grade", "max_grade"});
      accuracy_ = detail::optional_field<double>(params, "accuracy", 0.5, what);
      spread_1_ = detail::optional_field<double>(params, "spread_1", 0.7, what);
    } else if (behavior == "constant-grade-assessor") {
      behavior_ = Behavior::constant_grade;
      detail::check_keys(params, what, {"grade"});
      constant_ = detail::required<int>(params, "grade", what);
    } else if (behavior == "uniform-grade-assessor") {
      behavior_ = Behavior::uniform_grade;
      detail::check_keys(params, what, {"min_grade", "max_grade"});
    } else if (behavior == "noisy-comparator") {
      behavior_ = Behavior::comparator;
      detail::check_keys(params, what, {"slope", "cap", "tie", "p_correct", "basis"});
      slope_ = detail::optional_field<double>(params, "slope", 0.15, what);
      cap_ = detail::optional_field<double>(params, "cap", 0.95, what);
      tie_ = detail::optional_field<double>(params, "tie", 0.25, what);
      if (params.contains("p_correct") && !params["p_correct"].is_null()) {
        p_correct_ = detail::required<double>(params, "p_correct", what);
      }
      const auto basis = detail::optional_field<std::string>(params, "basis", "difficulty", what);
      if (basis != "difficulty" && basis != "grade") {
        throw ConfigurationError(what + ": basis must be \"difficulty\" or \"grade\"");
      }
      grade_basis_ = basis == "grade";
    } else if (behavior == "adversarial-comparator") {
      behavior_ = Behavior::adversarial_comparator;
      detail::check_keys(params, what, {"garbage_rate"});
      garbage_rate_ = detail::optional_field<double>(params, "garbage_rate", 0.1, what);
    } else {
      throw ConfigurationError("stochastic backend: unknown behavior \"" + behavior + "\"");
    }
    if (params.is_object()) {
      min_grade_ = params.value("min_grade", 3);
      max_grade_ = params.value("max_grade", 12);
    }
    for (double p : {accuracy_, spread_1_, cap_, garbage_rate_, p_correct_.value_or(0.0)}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigurationError(what + ": probabilities must be in [0,1]");
    }
    if (!(slope_ >= 0.0) || !(tie_ >= 0.0)) {
      throw ConfigurationError(what + ": slope and tie must be non-negative");
    }
    if (min_grade_ > max_grade_) throw ConfigurationError(what + ": min_grade exceeds max_grade");
  }

  const std::string& id() const noexcept override { return id_; }
  Behavior behavior() const noexcept { return behavior_; }

  /// Accuracy of the comparator for a difficulty gap, before the tie rule.
  double comparator_accuracy(double gap) const noexcept {
    if (p_correct_) return *p_correct_;
    return std::min(cap_, 0.5 + slope_ * std::abs(gap));
  }

  Answer query(const Prompt& prompt, const QueryContext& context) const override {
    Rng rng(derive_seed(context.seed, context.task_id));
    const auto ids = context_document_ids(prompt.rendered_text);
    std::string text;
    switch (behavior_) {
      case Behavior::genre_assessor:
        text = assess_genre(latent(ids, 0, context), rng);
        break;
      case Behavior::grade_assessor:
        text = std::to_string(assess_grade(latent(ids, 0, context).grade, rng));
        break;
      case Behavior::constant_grade:
        text = std::to_string(constant_);
        break;
      case Behavior::uniform_grade:
        text = std::to_string(min_grade_ + static_cast<int>(rng.below(max_grade_ - min_grade_ + 1)));
        break;
      case Behavior::comparator:
        text = compare(latent(ids, 0, context), latent(ids, 1, context), rng);
        break;
      case Behavior::adversarial_comparator: {
        if (rng.bernoulli(garbage_rate_)) {
          text = "I cannot tell.";
        } else {
          static constexpr const char* kWords[] = {"easier", "same", "harder"};
          text = kWords[rng.below(3)];
        }
        break;
      }
    }
    return Answer{context.task_id, std::move(text), id_, {}};
  }

 private:
  const Latent& latent(const std::vector<std::string>& ids, std::size_t i,
                       const QueryContext& context) const {
    if (i >= ids.size()) {
      throw BackendError("stochastic backend \"" + id_ + "\": prompt for task \"" + context.task_id +
                         "\" has too few context documents");
    }
    auto it = latents_->find(ids[i]);
    if (it == latents_->end()) {
      throw BackendError("stochastic backend \"" + id_ + "\": no latent attributes for \"" +
                         ids[i] + "\"");
    }
    return it->second;
  }

  std::string assess_genre(const Latent& article, Rng& rng) const {
    if (rng.bernoulli(accuracy_) || genres_.size() < 2) return article.genre;
    std::vector<const std::string*> others;
    for (const auto& g : genres_) {
      if (g != article.genre) others.push_back(&g);
    }
    return *others[rng.below(others.size())];
  }

  int assess_grade(int grade, Rng& rng) const {
    if (rng.bernoulli(accuracy_)) return grade;
    const int magnitude = rng.bernoulli(spread_1_) ? 1 : 2;
    const int sign = rng.bernoulli(0.5) ? 1 : -1;
    int guess = grade + sign * magnitude;
    if (guess < min_grade_ || guess > max_grade_) guess = grade - sign * magnitude;
    return guess;
  }

  std::string compare(const Latent& a, const Latent& b, Rng& rng) const {
    const double da = a.difficulty.value_or(a.grade);
    const double db = b.difficulty.value_or(b.grade);
    const double gap = da - db;
    const double u = rng.uniform();
    const double p = comparator_accuracy(gap);
    int answer;
    if (grade_basis_) {
      const int truth = (a.grade > b.grade) - (a.grade < b.grade);
      if (u < p) {
        answer = truth;
      } else {
        answer = truth != 0 ? -truth : (rng.bernoulli(0.5) ? 1 : -1);
      }
    } else {
      if (std::abs(gap) < tie_) return "same";
      const int truth = gap > 0 ? 1 : -1;
      answer = u < p ? truth : -truth;
    }
    return answer > 0 ? "harder" : answer < 0 ? "easier" : "same";
  }

  std::string id_;
  std::shared_ptr<const LatentTable> latents_;
  Behavior behavior_ = Behavior::comparator;
  double accuracy_ = 1.0;
  double spread_1_ = 0.7;
  double slope_ = 0.15;
  double cap_ = 0.95;
  double tie_ = 0.25;
  double garbage_rate_ = 0.1;
  std::optional<double> p_correct_;
  bool grade_basis_ = false;
  int constant_ = 0;
  int min_grade_ = 3;
  int max_grade_ = 12;
  std::vector<std::string> genres_;
};

}  // namespace aiom
