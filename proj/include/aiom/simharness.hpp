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

// Monte Carlo harness for the ARA machine: synthetic corpora with a latent
// difficulty per article, seeded noisy oracles, and accuracy reports that
// compare the local search against its own starting grade.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aiom/ara.hpp"
#include "aiom/backends.hpp"
#include "aiom/random.hpp"
#include "aiom/runtime.hpp"
#include "aiom/validators.hpp"

namespace aiom::sim {

inline constexpr double kSvcReferenceAccuracy = 0.50;
inline constexpr double kTargetAccuracy = 0.65;
inline constexpr double kTargetRelativeGainPercent = 24.0;

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Corpus

struct CorpusSpec {
  int n_articles = 1654;
  int n_genres = 33;
  double sigma = 0.3;
  std::uint64_t seed = 0;

  void check() const {
    if (n_articles < 1) throw ConfigurationError("corpus spec: n_articles must be positive");
    if (n_genres < 1) throw ConfigurationError("corpus spec: n_genres must be positive");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigurationError("corpus spec: sigma must be >= 0");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["n_articles"] = n_articles;
    j["n_genres"] = n_genres;
    j["sigma"] = sigma;
    j["seed"] = seed;
    return j;
  }

  static CorpusSpec from_json(const Json& j) {
    constexpr std::string_view what = "corpus spec";
    detail::check_keys(j, what, {"n_articles", "n_genres", "sigma", "seed"});
    CorpusSpec s;
    s.n_articles = detail::optional_field<int>(j, "n_articles", s.n_articles, what);
    s.n_genres = detail::optional_field<int>(j, "n_genres", s.n_genres, what);
    s.sigma = detail::optional_field<double>(j, "sigma", s.sigma, what);
    s.seed = detail::optional_field<std::uint64_t>(j, "seed", s.seed, what);
    s.check();
    return s;
  }
};

inline std::string padded(long value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

inline std::string genre_name(int index, int n_genres) {
  return "genre-" + padded(index + 1, std::max<std::size_t>(2, std::to_string(n_genres).size()));
}

/// Grades are dealt evenly over 3..12 and then shuffled; genres go
/// round-robin; difficulty = grade + sigma * N(0, 1).
inline std::vector<ara::LabeledArticle> generate_corpus(const CorpusSpec& spec) {
  spec.check();
  Rng rng(derive_seed(spec.seed, std::string_view("corpus")));
  std::vector<int> grades(spec.n_articles);
  for (int i = 0; i < spec.n_articles; ++i) grades[i] = ara::kMinGrade + i % ara::kGradeSpan;
  rng.shuffle(grades);
  const std::size_t width = std::to_string(spec.n_articles).size();
  std::vector<ara::LabeledArticle> out;
  out.reserve(spec.n_articles);
  for (int i = 0; i < spec.n_articles; ++i) {
    ara::LabeledArticle a;
    a.id = "a" + padded(i + 1, width);
    a.grade = grades[i];
    a.genre = genre_name(i % spec.n_genres, spec.n_genres);
    const double z = rng.normal();
    a.difficulty = a.grade + spec.sigma * z;
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<std::string> corpus_genres(const std::vector<ara::LabeledArticle>& corpus) {
  std::set<std::string> g;
  for (const auto& a : corpus) g.insert(a.genre);
  return {g.begin(), g.end()};
}

// ---------------------------------------------------------------------------
// Noise model

struct NoiseSpec {
  enum class Assessor { noisy, uniform, constant };

  double genre_accuracy = 1.0;
  Assessor assessor = Assessor::noisy;
  double assessor_accuracy = 0.5;
  double spread_1 = 0.7;  // P(|error| = 1 | wrong); the rest is |error| = 2
  int constant_grade = 7;
  double slope = 0.15;
  double cap = 0.95;
  double tie = 0.25;
  std::optional<double> comparator_p;  // constant accuracy, overrides the slope model
  std::string basis = "difficulty";

  /// p(gap) = min(cap, 0.5 + slope * |gap|), or the constant when set.
  double comparator_accuracy(double gap) const {
    if (comparator_p) return *comparator_p;
    return std::min(cap, 0.5 + slope * std::abs(gap));
  }

  void check() const {
    for (double p : {genre_accuracy, assessor_accuracy, spread_1, cap, comparator_p.value_or(0.5)}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigurationError("noise spec: probabilities must be in [0,1]");
    }
    if (!(slope >= 0.0) || !(tie >= 0.0)) throw ConfigurationError("noise spec: slope and tie must be >= 0");
    if (basis != "difficulty" && basis != "grade") {
      throw ConfigurationError("noise spec: basis must be \"difficulty\" or \"grade\"");
    }
    if (constant_grade < ara::kMinGrade || constant_grade > ara::kMaxGrade) {
      throw ConfigurationError("noise spec: constant_grade outside [3, 12]");
    }
  }

  static std::string_view to_string(Assessor a) {
    switch (a) {
      case Assessor::noisy:
        return "noisy";
      case Assessor::uniform:
        return "uniform";
      case Assessor::constant:
        return "constant";
    }
    return "noisy";
  }

  ordered_json to_json() const {
    ordered_json j;
    j["genre_accuracy"] = genre_accuracy;
    j["assessor"] = std::string(to_string(assessor));
    j["assessor_accuracy"] = assessor_accuracy;
    j["assessor_error_spread"] = ordered_json{{"1", spread_1}, {"2", 1.0 - spread_1}};
    j["constant_grade"] = constant_grade;
    j["comparator_slope"] = slope;
    j["comparator_cap"] = cap;
    j["comparator_tie"] = tie;
    j["comparator_p"] = comparator_p ? ordered_json(*comparator_p) : ordered_json(nullptr);
    j["comparator_basis"] = basis;
    return j;
  }

  static NoiseSpec from_json(const Json& j) {
    constexpr std::string_view what = "noise spec";
    detail::check_keys(j, what,
                       {"genre_accuracy", "assessor", "assessor_accuracy", "assessor_error_spread",
                        "constant_grade", "comparator_slope", "comparator_cap", "comparator_tie",
                        "comparator_p", "comparator_basis"});
    NoiseSpec n;
    n.genre_accuracy = detail::optional_field<double>(j, "genre_accuracy", n.genre_accuracy, what);
    const auto mode = detail::optional_field<std::string>(j, "assessor", "noisy", what);
    if (mode == "noisy") {
      n.assessor = Assessor::noisy;
    } else if (mode == "uniform") {
      n.assessor = Assessor::uniform;
    } else if (mode == "constant") {
      n.assessor = Assessor::constant;
    } else {
      throw SchemaError("noise spec: assessor must be noisy, uniform or constant");
    }
    n.assessor_accuracy = detail::optional_field<double>(j, "assessor_accuracy", n.assessor_accuracy, what);
    if (j.contains("assessor_error_spread")) {
      const auto& s = j["assessor_error_spread"];
      detail::check_keys(s, "assessor_error_spread", {"1", "2"});
      const double p1 = detail::required<double>(s, "1", "assessor_error_spread");
      const double p2 = detail::required<double>(s, "2", "assessor_error_spread");
      if (std::abs(p1 + p2 - 1.0) > 1e-9) throw SchemaError("assessor_error_spread: weights must sum to 1");
      n.spread_1 = p1;
    }
    n.constant_grade = detail::optional_field<int>(j, "constant_grade", n.constant_grade, what);
    n.slope = detail::optional_field<double>(j, "comparator_slope", n.slope, what);
    n.cap = detail::optional_field<double>(j, "comparator_cap", n.cap, what);
    n.tie = detail::optional_field<double>(j, "comparator_tie", n.tie, what);
    if (j.contains("comparator_p") && !j["comparator_p"].is_null()) {
      n.comparator_p = detail::required<double>(j, "comparator_p", what);
    }
    n.basis = detail::optional_field<std::string>(j, "comparator_basis", n.basis, what);
    n.check();
    return n;
  }
};

struct SearchConfig {
  std::size_t k = 5;
  double theta = ara::kDefaultTheta;
  double train_fraction = 0.8;
  int n_blocks = 6;

  void check() const {
    if (k < 1) throw ConfigurationError("search config: k must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigurationError("search config: theta must be in (0, 1)");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw ConfigurationError("search config: train_fraction must be in (0, 1)");
    }
    if (n_blocks < 1) throw ConfigurationError("search config: n_blocks must be positive");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["k"] = k;
    j["theta"] = theta;
    j["train_fraction"] = train_fraction;
    j["n_blocks"] = n_blocks;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Machine assembly

/// Oracle bindings and controller for the ARA machine over a genre partition.
inline MachineDefinition ara_machine(const ara::GenrePartition& partition, const std::vector<std::string>& genres,
                                     double theta) {
  MachineDefinition m;
  m.name = "ara";
  m.bindings.push_back({std::string(ara::kGenreRole), Modality::language, "stochastic:genre"});
  for (const auto& b : partition.blocks) m.bindings.push_back({b.role, Modality::language, "stochastic:" + b.role});
  m.bindings.push_back({std::string(ara::kComparatorRole), Modality::language, "stochastic:comparator"});
  m.controller = {"ara", Json{{"partition", partition.to_json()}, {"genres", genres}, {"theta", theta}}};
  m.limits.max_tasks = 256;
  m.limits.max_cycles = 64;
  return m;
}

/// Stochastic backends for every role of `machine`, following `noise`.
inline OracleSet stochastic_oracles(const MachineDefinition& machine, const NoiseSpec& noise,
                                    const std::vector<std::string>& genres,
                                    std::shared_ptr<const LatentTable> latents) {
  OracleSet set;
  for (const auto& b : machine.bindings) {
    std::string behavior;
    Json params = Json::object();
    if (b.role == ara::kGenreRole) {
      behavior = "noisy-genre-assessor";
      params = {{"accuracy", noise.genre_accuracy}, {"genres", genres}};
    } else if (b.role == ara::kComparatorRole) {
      behavior = "noisy-comparator";
      params = {{"slope", noise.slope}, {"cap", noise.cap}, {"tie", noise.tie}, {"basis", noise.basis}};
      if (noise.comparator_p) params["p_correct"] = *noise.comparator_p;
    } else {
      switch (noise.assessor) {
        case NoiseSpec::Assessor::noisy:
          behavior = "noisy-grade-assessor";
          params = {{"accuracy", noise.assessor_accuracy}, {"spread_1", noise.spread_1}};
          break;
        case NoiseSpec::Assessor::uniform:
          behavior = "uniform-grade-assessor";
          break;
        case NoiseSpec::Assessor::constant:
          behavior = "constant-grade-assessor";
          params = {{"grade", noise.constant_grade}};
          break;
      }
    }
    set.bind(b.role, std::make_shared<StochasticBackend>(b.backend_ref, behavior, params, latents));
  }
  return set;
}

inline Registries ara_registries() {
  Registries r;
  register_basic_validators(r.validators);
  ara::register_controllers(r.controllers);
  return r;
}

// ---------------------------------------------------------------------------
// Trials

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  int n_test = 0;
  int exact = 0;
  int adjacent = 0;
  int baseline_exact = 0;
  int baseline_adjacent = 0;
  int failed_runs = 0;
  long comparisons = 0;
};

struct AccuracyReport {
  double exact_match = 0.0;
  double adjacent_accuracy = 0.0;
  double baseline_exact_match = 0.0;
  double baseline_adjacent_accuracy = 0.0;
  double absolute_gain_points = 0.0;
  double relative_gain_percent = 0.0;
  int n_trials = 0;
  long n_scored = 0;
  long failed_runs = 0;
  double mean_comparisons = 0.0;
  std::uint64_t seed = 0;
  ordered_json config = ordered_json::object();
  std::vector<TrialResult> trials;

  static AccuracyReport aggregate(const std::vector<TrialResult>& trials, std::uint64_t seed) {
    AccuracyReport r;
    r.trials = trials;
    r.n_trials = static_cast<int>(trials.size());
    r.seed = seed;
    long exact = 0, adjacent = 0, base = 0, base_adj = 0, comparisons = 0;
    for (const auto& t : trials) {
      r.n_scored += t.n_test;
      exact += t.exact;
      adjacent += t.adjacent;
      base += t.baseline_exact;
      base_adj += t.baseline_adjacent;
      r.failed_runs += t.failed_runs;
      comparisons += t.comparisons;
    }
    if (r.n_scored > 0) {
      const double n = static_cast<double>(r.n_scored);
      r.exact_match = exact / n;
      r.adjacent_accuracy = adjacent / n;
      r.baseline_exact_match = base / n;
      r.baseline_adjacent_accuracy = base_adj / n;
      r.mean_comparisons = comparisons / n;
    }
    r.absolute_gain_points = 100.0 * (r.exact_match - r.baseline_exact_match);
    r.relative_gain_percent =
        r.baseline_exact_match > 0.0 ? 100.0 * (r.exact_match / r.baseline_exact_match - 1.0) : 0.0;
    return r;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["seed"] = seed;
    j["n_trials"] = n_trials;
    j["n_scored"] = n_scored;
    j["exact_match"] = exact_match;
    j["adjacent_accuracy"] = adjacent_accuracy;
    j["baseline_exact_match"] = baseline_exact_match;
    j["baseline_adjacent_accuracy"] = baseline_adjacent_accuracy;
    j["absolute_gain_points"] = absolute_gain_points;
    j["relative_gain_percent"] = relative_gain_percent;
    j["failed_runs"] = failed_runs;
    j["mean_comparisons"] = mean_comparisons;
    j["reference"] = ordered_json{{"svc_accuracy", kSvcReferenceAccuracy},
                                  {"target_accuracy", kTargetAccuracy},
                                  {"target_relative_gain_percent", kTargetRelativeGainPercent}};
    j["config"] = config;
    return j;
  }

  std::string to_json_text() const { return to_json().dump(2) + "\n"; }

  /// Aligned two-column table.
  std::string to_table() const {
    std::ostringstream os;
    os << std::fixed;
    auto row = [&](std::string_view label, double v, int prec, std::string_view unit = "") {
      os << std::left << std::setw(28) << label << std::right << std::setw(12) << std::setprecision(prec) << v
         << unit << "\n";
    };
    os << std::left << std::setw(28) << "metric" << std::right << std::setw(12) << "value" << "\n";
    row("exact match", exact_match, 4);
    row("adjacent accuracy", adjacent_accuracy, 4);
    row("baseline exact match", baseline_exact_match, 4);
    row("baseline adjacent accuracy", baseline_adjacent_accuracy, 4);
    row("absolute gain", absolute_gain_points, 2, " pts");
    row("relative gain", relative_gain_percent, 2, " %");
    row("mean comparisons", mean_comparisons, 2);
    row("trials", n_trials, 0);
    row("articles scored", static_cast<double>(n_scored), 0);
    row("failed runs", static_cast<double>(failed_runs), 0);
    return os.str();
  }

  /// One line per trial.
  std::string to_csv() const {
    std::ostringstream os;
    os << "trial,seed,n_test,exact,adjacent,baseline_exact,baseline_adjacent,failed_runs,comparisons\n";
    for (const auto& t : trials) {
      os << t.trial << ',' << t.seed << ',' << t.n_test << ',' << t.exact << ',' << t.adjacent << ','
         << t.baseline_exact << ',' << t.baseline_adjacent << ',' << t.failed_runs << ',' << t.comparisons
         << "\n";
    }
    return os.str();
  }
};

/// Splits `corpus` into (train, test) with a seeded shuffle.
inline std::pair<std::vector<ara::LabeledArticle>, std::vector<ara::LabeledArticle>> split_corpus(
    const std::vector<ara::LabeledArticle>& corpus, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, std::string_view("split")));
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(corpus.size())));
  std::pair<std::vector<ara::LabeledArticle>, std::vector<ara::LabeledArticle>> out;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? out.first : out.second).push_back(corpus[idx[i]]);
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(out.first.begin(), out.first.end(), by_id);
  std::sort(out.second.begin(), out.second.end(), by_id);
  return out;
}

/// Runs the full ARA machine through the runtime on every held-out article
/// of each trial. Per-trial seeds derive from (seed, trial); per-article run
/// seeds from (trial seed, article id).
inline AccuracyReport run_trials(const std::vector<ara::LabeledArticle>& corpus, const NoiseSpec& noise,
                                 const SearchConfig& search, int n_trials, std::uint64_t seed) {
  if (corpus.empty()) throw ConfigurationError("simulation: empty corpus");
  if (n_trials < 1) throw ConfigurationError("simulation: n_trials must be positive");
  noise.check();
  search.check();
  const auto genres = corpus_genres(corpus);
  const auto partition = ara::synthetic_partition(genres, search.n_blocks);
  const auto machine = ara_machine(partition, genres, search.theta);
  const auto registries = ara_registries();
  const auto latents = std::make_shared<const LatentTable>(ara::latent_table(corpus));
  const OracleSet oracles = stochastic_oracles(machine, noise, genres, latents);
  TaskSpec task;
  task.statement = "Assess the readability grade of the article.";

  std::vector<TrialResult> results;
  for (int trial = 0; trial < n_trials; ++trial) {
    TrialResult tr;
    tr.trial = trial;
    tr.seed = derive_seed(seed, static_cast<std::uint64_t>(trial));
    auto [train, test] = split_corpus(corpus, search.train_fraction, tr.seed);
    const auto refs = ara::ReferenceSets::select(train, search.k, tr.seed);
    const auto ref_docs = refs.documents();
    for (const auto& article : test) {
      ++tr.n_test;
      task.parameters["article"] = article.id;
      const auto truth = ara::assessment_truth(article.to_document(), ref_docs);
      std::optional<ara::SearchTrace> trace;
      try {
        auto result = run(machine, registries, oracles, truth, task, derive_seed(tr.seed, article.id));
        if (result.final_answer) trace = ara::SearchTrace::from_json(Json::parse(*result.final_answer));
      } catch (const RunError&) {
      }
      if (!trace) {
        ++tr.failed_runs;
        continue;
      }
      tr.comparisons += static_cast<long>(trace->visited.size() * search.k);
      const int err = std::abs(trace->final_grade - article.grade);
      const int base_err = std::abs(trace->initial_grade - article.grade);
      tr.exact += err == 0;
      tr.adjacent += err <= 1;
      tr.baseline_exact += base_err == 0;
      tr.baseline_adjacent += base_err <= 1;
    }
    results.push_back(tr);
  }
  auto report = AccuracyReport::aggregate(results, seed);
  report.config = ordered_json{{"noise", noise.to_json()}, {"search", search.to_json()}};
  return report;
}

/// Calibration sweep: one report per comparator slope, all with the same seed
/// so that differences are paired.
inline std::vector<std::pair<double, AccuracyReport>> slope_sweep(const std::vector<ara::LabeledArticle>& corpus,
                                                                  NoiseSpec noise, const SearchConfig& search,
                                                                  const std::vector<double>& slopes, int n_trials,
                                                                  std::uint64_t seed) {
  std::vector<std::pair<double, AccuracyReport>> out;
  for (double a : slopes) {
    noise.slope = a;
    noise.comparator_p.reset();
    out.emplace_back(a, run_trials(corpus, noise, search, n_trials, seed));
  }
  return out;
}

}  // namespace aiom::sim
