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

// Shared helpers for the test binaries: fixture loading and a generator of
// randomized machines with scripted backends.

#include <filesystem>
#include <string>
#include <vector>

#include "aiom/aiom.hpp"

namespace aiom::testing {

inline std::filesystem::path source_dir() { return AIOM_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

/// The summarizer fixture corpus: one Document JSON object per line.
inline std::vector<Document> fixture_articles() {
  std::vector<Document> out;
  const std::string text = read_file(fixture("articles.jsonl"));
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) out.push_back(Json::parse(text.substr(start, end - start)).get<Document>());
    start = end + 1;
  }
  return out;
}

struct RandomMachine {
  MachineDefinition def;
  GroundTruth truth;
  TaskSpec task;
  std::uint64_t seed = 0;
};

/// A random DAG of up to six query-tasks answered by scripted backends.
/// Some answers fail validation, which exercises the repair path; some limits
/// are tight enough to halt the run early.
inline RandomMachine random_machine(std::uint64_t seed) {
  static const std::vector<std::string> kVocab = {"alpha", "bravo", "delta", "echo", "kilo",
                                                  "lima",  "oscar", "tango", "zulu", "metro"};
  Rng rng(seed);
  auto word = [&] { return kVocab[rng.below(kVocab.size())]; };
  RandomMachine m;
  m.seed = rng.next();
  m.task.statement = "Combine " + word() + " and " + word() + ".";

  const int n_docs = static_cast<int>(rng.below(4));
  for (int i = 0; i < n_docs; ++i) {
    Document d;
    d.id = "doc-" + std::to_string(i);
    d.title = "Doc " + word();
    d.body = "The " + word() + " met the " + word() + ". Then " + word() + " left.";
    m.truth.documents.push_back(std::move(d));
  }

  const int n_roles = 1 + static_cast<int>(rng.below(3));
  std::vector<std::string> roles;
  for (int i = 0; i < n_roles; ++i) roles.push_back("oracle-" + std::to_string(i));
  std::vector<Json> rules(n_roles, Json::array());

  const int n_tasks = 1 + static_cast<int>(rng.below(6));
  Json tasks = Json::array();
  for (int i = 0; i < n_tasks; ++i) {
    QueryTask t;
    t.id = "t" + std::to_string(i);
    t.description = "Step " + t.id + ": describe " + word() + ".";
    for (int j = 0; j < i; ++j) {
      if (rng.bernoulli(0.4)) t.depends_on.insert("t" + std::to_string(j));
    }
    if (n_docs > 0 && rng.bernoulli(0.5)) {
      const auto& d = m.truth.documents[rng.below(n_docs)];
      t.context_excerpts.push_back({d.id, d.body});
    }
    if (rng.bernoulli(0.5)) t.requirements.push_back("Mention " + word() + ".");
    if (rng.bernoulli(0.3)) t.examples.push_back({"input " + word(), "output " + word()});
    if (rng.bernoulli(0.3)) t.constraints.push_back("Stay under ten words.");
    const int role = static_cast<int>(rng.below(n_roles));
    t.oracle_role = roles[role];

    std::string answer;
    switch (rng.below(3)) {
      case 0:
        t.validation_method = {"always-accept", Json::object()};
        answer = "Result " + t.id + " is " + word() + ".";
        break;
      case 1: {
        const std::string a = word(), b = word();
        t.validation_method = {"contains-terms", Json{{"terms", {a, b}}}};
        answer = rng.bernoulli(0.7) ? "We saw " + a + ". Also " + word() + "." : "Nothing here.";
        break;
      }
      default:
        t.validation_method = {"numeric-range", Json{{"min", 1}, {"max", 9}}};
        answer = rng.bernoulli(0.7) ? std::to_string(1 + rng.below(12)) : "no idea";
        break;
    }
    rules[role].push_back({{"contains", "Step " + t.id + ":"}, {"response", answer}});
    tasks.push_back(t);
  }

  for (int i = 0; i < n_roles; ++i) {
    rules[i].push_back({{"pattern", "^"}, {"response", "fallback"}});
    const auto ref = "scripted:" + roles[i];
    m.def.bindings.push_back({roles[i], Modality::language, ref});
    m.def.backends[ref] = {"scripted", Json{{"rules", rules[i]}}};
  }
  m.def.name = "random-" + std::to_string(seed);
  m.def.controller = {"dag", Json{{"tasks", tasks}, {"adaptive", rng.bernoulli(0.5)}}};
  m.def.limits.max_tasks = 2 + static_cast<int>(rng.below(12));
  m.def.limits.max_cycles = 4 + static_cast<int>(rng.below(30));
  m.def.seed = m.seed;
  return m;
}

}  // namespace aiom::testing
