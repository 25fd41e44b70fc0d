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

// Controlled topic summarization: identify relevant sentences, rank them by
// maximal marginal relevance, select a word-budgeted subset, ask the oracle
// for a summary grounded in that subset, then prune irrelevant and redundant
// sentences from the answer and check coverage of the key aspects.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "aiom/core.hpp"
#include "aiom/runtime.hpp"
#include "aiom/text.hpp"

namespace aiom::summarizer {

struct SentenceRecord {
  int index = 0;  // position in the article
  std::string text;
  double relevance = 0.0;  // in [0,1]
  std::set<std::string> term_set;
  text::TermFreq tf;
};

struct SummarySpec {
  std::string topic;
  int budget_words = 50;
  double diversity_weight = 0.7;  // lambda: 1 = relevance only

  void check() const {
    if (budget_words < 1) throw ConfigurationError("summary budget must be at least one word");
    if (!(diversity_weight >= 0.0 && diversity_weight <= 1.0)) {
      throw ConfigurationError("diversity weight must be in [0, 1]");
    }
  }
};

inline constexpr double kTieEpsilon = 1e-12;
inline constexpr double kCoverageThreshold = 0.8;
inline constexpr double kRedundancyThreshold = 0.8;
inline constexpr std::size_t kKeyTermsPerSentence = 3;
inline constexpr std::string_view kOracleRole = "summarizer-llm";
inline constexpr std::string_view kValidatorId = "coverage-and-redundancy";

inline SentenceRecord make_record(int index, std::string sentence) {
  SentenceRecord r;
  r.index = index;
  r.tf = text::term_frequencies(sentence);
  for (const auto& [w, c] : r.tf) r.term_set.insert(w);
  r.text = std::move(sentence);
  return r;
}

/// Article sentences in order; relevance left at 0. Empty body gives no sentences.
inline std::vector<SentenceRecord> segment_sentences(const Document& doc) {
  std::vector<SentenceRecord> out;
  int i = 0;
  for (auto& s : text::split_sentences(doc.body)) out.push_back(make_record(i++, std::move(s)));
  return out;
}

/// Term frequencies keyed by word stem.
inline text::TermFreq stemmed(const text::TermFreq& tf) {
  text::TermFreq out;
  for (const auto& [w, c] : tf) out[text::stem(w)] += c;
  return out;
}

/// TF cosine between the sentence's and the topic's content words, matched by stem.
inline double score_relevance(const SentenceRecord& sentence, std::string_view topic) {
  return text::cosine(stemmed(sentence.tf), stemmed(text::term_frequencies(topic)));
}

/// Greedy maximal-marginal-relevance order. Each step takes the candidate
/// maximizing lambda*relevance - (1-lambda)*max similarity to those already
/// taken; candidates within kTieEpsilon of the best go to the lowest index.
inline std::vector<SentenceRecord> rank_diverse(std::vector<SentenceRecord> sentences,
                                                const SummarySpec& spec) {
  std::sort(sentences.begin(), sentences.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  const double lambda = spec.diversity_weight;
  std::vector<SentenceRecord> ranked;
  std::vector<bool> taken(sentences.size(), false);
  std::vector<double> max_sim(sentences.size(), 0.0);
  for (std::size_t round = 0; round < sentences.size(); ++round) {
    std::vector<double> score(sentences.size(), 0.0);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (taken[i]) continue;
      score[i] = lambda * sentences[i].relevance - (1.0 - lambda) * max_sim[i];
      best = std::max(best, score[i]);
    }
    std::size_t pick = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (!taken[i] && score[i] >= best - kTieEpsilon) {
        pick = i;
        break;
      }
    }
    taken[pick] = true;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (!taken[i]) max_sim[i] = std::max(max_sim[i], text::cosine(sentences[i].tf, sentences[pick].tf));
    }
    ranked.push_back(sentences[pick]);
  }
  return ranked;
}

/// Longest ranked prefix whose word count stays within twice the budget (at
/// least one sentence), returned in article order.
inline std::vector<SentenceRecord> select_budget(const std::vector<SentenceRecord>& ranked,
                                                 const SummarySpec& spec) {
  std::vector<SentenceRecord> out;
  const std::size_t cap = 2 * static_cast<std::size_t>(spec.budget_words);
  std::size_t words = 0;
  for (const auto& s : ranked) {
    const std::size_t n = text::word_count(s.text);
    if (!out.empty() && words + n > cap) break;
    words += n;
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return out;
}

/// Top content terms of a sentence: by count, then first occurrence.
inline std::vector<std::string> key_terms(const SentenceRecord& s, std::size_t n = kKeyTermsPerSentence) {
  std::vector<std::string> order;
  for (auto& w : text::content_words(s.text)) {
    if (std::find(order.begin(), order.end(), w) == order.end()) order.push_back(std::move(w));
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](const auto& a, const auto& b) { return s.tf.at(a) > s.tf.at(b); });
  if (order.size() > n) order.resize(n);
  return order;
}

/// Key-term clusters of the selection: terms grouped by shared stem, in order
/// of first appearance.
inline std::vector<std::vector<std::string>> key_term_clusters(const std::vector<SentenceRecord>& selected) {
  std::vector<std::string> stems;
  std::map<std::string, std::vector<std::string>> by_stem;
  for (const auto& s : selected) {
    for (auto& t : key_terms(s)) {
      auto st = text::stem(t);
      auto& bucket = by_stem[st];
      if (bucket.empty()) stems.push_back(st);
      if (std::find(bucket.begin(), bucket.end(), t) == bucket.end()) bucket.push_back(std::move(t));
    }
  }
  std::vector<std::vector<std::string>> out;
  for (const auto& st : stems) out.push_back(by_stem[st]);
  return out;
}

inline QueryTask build_summary_task(const std::vector<SentenceRecord>& selected, const Document& doc,
                                    const SummarySpec& spec) {
  QueryTask t;
  t.id = "summary";
  t.description = "Summarize what the article says about the topic: " + spec.topic;
  if (!doc.title.empty()) t.context_excerpts.push_back({doc.id, doc.title});
  for (const auto& s : selected) t.context_excerpts.push_back({doc.id, s.text});
  t.requirements = {
      "Use at most " + std::to_string(spec.budget_words) + " words.",
      "Cover every distinct point the context sentences make about the topic.",
  };
  t.constraints = {
      "Use only information stated in the context sentences, read in the context of the article.",
      "Do not repeat a point.",
  };
  Json clusters = key_term_clusters(selected);
  const bool any_relevant =
      std::any_of(selected.begin(), selected.end(), [](const SentenceRecord& s) { return s.relevance > 0.0; });
  t.validation_method = {std::string(kValidatorId),
                         Json{{"topic", spec.topic},
                              {"topic_terms", any_relevant ? text::content_words(spec.topic)
                                                           : std::vector<std::string>{}},
                              {"clusters", std::move(clusters)}}};
  t.oracle_role = std::string(kOracleRole);
  return t;
}

/// Post-answer processing for summaries. params: {"topic_terms": [..],
/// "clusters": [[..], ..]}. Answer sentences with zero relevance to the topic
/// terms (by stem; skipped when there are none) or TF cosine above 0.8 to an
/// earlier kept sentence are pruned; coverage is the fraction of clusters with
/// a term (matched by stem) in the kept text.
inline ValidationOutcome validate_summary(const Answer& answer, const Json& params) {
  text::TermFreq topic_tf;
  for (const auto& t : params.value("topic_terms", std::vector<std::string>{})) {
    for (auto& w : text::content_words(t)) ++topic_tf[text::stem(w)];
  }
  const auto clusters = params.value("clusters", std::vector<std::vector<std::string>>{});

  std::vector<std::string> diagnostics;
  std::vector<std::string> kept;
  std::vector<text::TermFreq> kept_tf;
  for (auto& s : text::split_sentences(answer.text)) {
    auto tf = text::term_frequencies(s);
    if (!topic_tf.empty() && text::cosine(stemmed(tf), topic_tf) == 0.0) {
      diagnostics.push_back("pruned irrelevant sentence: " + s);
      continue;
    }
    bool redundant = false;
    for (const auto& k : kept_tf) redundant = redundant || text::cosine(tf, k) > kRedundancyThreshold;
    if (redundant) {
      diagnostics.push_back("pruned redundant sentence: " + s);
      continue;
    }
    kept.push_back(std::move(s));
    kept_tf.push_back(std::move(tf));
  }

  std::set<std::string> kept_stems;
  for (const auto& tf : kept_tf) {
    for (const auto& [w, c] : tf) kept_stems.insert(text::stem(w));
  }
  std::size_t covered = 0;
  for (const auto& cluster : clusters) {
    bool hit = false;
    for (const auto& term : cluster) hit = hit || kept_stems.count(text::stem(term));
    if (hit) {
      ++covered;
    } else {
      diagnostics.push_back("missing aspect: " + text::join(cluster, "/"));
    }
  }
  const double coverage = clusters.empty() ? (kept.empty() ? 0.0 : 1.0)
                                           : double(covered) / double(clusters.size());
  diagnostics.insert(diagnostics.begin(), "coverage " + std::to_string(covered) + "/" +
                                              std::to_string(clusters.size()));
  if (coverage <= 0.0 || kept.empty()) {
    return ValidationOutcome::invalid(std::move(diagnostics));
  }
  if (coverage >= kCoverageThreshold) return ValidationOutcome::valid(std::move(kept), std::move(diagnostics));
  return ValidationOutcome::partial(std::move(kept), std::move(diagnostics));
}

inline void register_validators(ValidatorRegistry& registry) {
  registry.add(std::string(kValidatorId),
               [](const Answer& a, const Json& p, const ValidationContext&) { return validate_summary(a, p); });
}

/// Pre-query pipeline: segment, score, keep relevant sentences (all of them
/// when none is relevant), rank, select.
struct Selection {
  std::vector<SentenceRecord> sentences;
  std::vector<SentenceRecord> ranked;
  std::vector<SentenceRecord> selected;
};

inline Selection prepare(const Document& doc, const SummarySpec& spec) {
  spec.check();
  Selection sel;
  sel.sentences = segment_sentences(doc);
  for (auto& s : sel.sentences) s.relevance = score_relevance(s, spec.topic);
  std::vector<SentenceRecord> relevant;
  for (const auto& s : sel.sentences) {
    if (s.relevance > 0.0) relevant.push_back(s);
  }
  if (relevant.empty()) relevant = sel.sentences;
  sel.ranked = rank_diverse(std::move(relevant), spec);
  sel.selected = select_budget(sel.ranked, spec);
  return sel;
}

/// "summarizer" controller. Reads the topic, budget, lambda and article id from
/// the task parameters ("topic", "budget", "lambda", "article"), falling back
/// to controller params of the same names, the task statement for the topic,
/// and the first document for the article.
class SummarizerController final : public Controller {
 public:
  explicit SummarizerController(const Json& params) : params_(params) {
    detail::check_keys(params, "summarizer controller params", {"topic", "budget", "lambda", "role"});
  }

  StepResult step(const MachineView& view) override {
    if (!started_) {
      started_ = true;
      const Document* doc = article(view);
      if (!doc) return StepResult::fail("summarizer: no article in the ground truth");
      SummarySpec spec = make_spec(view.task);
      auto sel = prepare(*doc, spec);
      if (sel.selected.empty()) return StepResult::fail("summarizer: article has no sentences");
      QueryTask t = build_summary_task(sel.selected, *doc, spec);
      t.oracle_role = params_.value("role", std::string(kOracleRole));
      return StepResult::emit({std::move(t)});
    }
    if (view.state.is_failed("summary")) return StepResult::fail("summary failed validation");
    if (const auto* o = view.state.outcome("summary"); o && o->usable()) {
      return StepResult::finish(text::join(o->extracted_spans, " "));
    }
    return StepResult::wait();
  }

  SummarySpec make_spec(const TaskSpec& task) const {
    SummarySpec spec;
    spec.topic = task.param("topic", params_.value("topic", task.statement));
    try {
      spec.budget_words = std::stoi(task.param("budget", std::to_string(params_.value("budget", 50))));
      spec.diversity_weight = std::stod(task.param("lambda", std::to_string(params_.value("lambda", 0.7))));
    } catch (const std::exception&) {
      throw ConfigurationError("summarizer: budget and lambda must be numbers");
    }
    spec.check();
    return spec;
  }

 private:
  const Document* article(const MachineView& view) const {
    const auto id = view.task.param("article");
    if (!id.empty()) {
      const auto* d = view.truth.find(id);
      if (!d) throw ReferenceError("summarizer: unknown article \"" + id + "\"");
      return d;
    }
    return view.truth.documents.empty() ? nullptr : &view.truth.documents.front();
  }

  Json params_;
  bool started_ = false;
};

inline void register_controllers(ControllerRegistry& registry) {
  registry.add("summarizer", [](const Json& p) { return std::make_unique<SummarizerController>(p); });
}

}  // namespace aiom::summarizer
