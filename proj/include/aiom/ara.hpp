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

// Readability grade assessment by local search over grades 3..12. Three
// oracle roles drive it: a genre assessor, one grade assessor per genre
// block, and a pairwise text comparator. The search starts at the assessed
// grade and moves one grade at a time in the direction of the mean
// comparison score against that grade's reference articles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aiom/core.hpp"
#include "aiom/random.hpp"
#include "aiom/runtime.hpp"
#include "aiom/validators.hpp"

namespace aiom::ara {

inline constexpr int kMinGrade = 3;
inline constexpr int kMaxGrade = 12;
inline constexpr int kGradeSpan = kMaxGrade - kMinGrade + 1;
inline constexpr int kMaxRounds = kGradeSpan;
inline constexpr double kDefaultTheta = 0.2;
inline constexpr std::string_view kGenreRole = "genre-assessor";
inline constexpr std::string_view kComparatorRole = "text-comparator";
inline constexpr std::string_view kReferenceGradeKey = "reference_grade";

inline int clamp_grade(long g) noexcept {
  return static_cast<int>(std::clamp<long>(g, kMinGrade, kMaxGrade));
}

// ---------------------------------------------------------------------------
// Corpus items

/// A graded article. Synthetic articles carry a latent difficulty instead of text.
struct LabeledArticle {
  std::string id;
  std::optional<std::string> text;
  std::optional<double> difficulty;
  std::string genre;
  int grade = kMinGrade;

  Document to_document() const {
    Document d;
    d.id = id;
    d.body = text ? *text : "[synthetic article " + id + "]";
    return d;
  }

  /// {"id", "text" | "difficulty", "genre", "grade"}; no trailing newline.
  std::string to_line() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    if (text) j["text"] = *text;
    if (difficulty) j["difficulty"] = *difficulty;
    j["genre"] = genre;
    j["grade"] = grade;
    return j.dump(-1, ' ', false, Json::error_handler_t::replace);
  }

  static LabeledArticle from_json(const Json& j) {
    constexpr std::string_view what = "corpus article";
    detail::check_keys(j, what, {"id", "text", "difficulty", "genre", "grade"});
    LabeledArticle a;
    a.id = detail::required<std::string>(j, "id", what);
    if (j.contains("text")) a.text = detail::required<std::string>(j, "text", what);
    if (j.contains("difficulty")) a.difficulty = detail::required<double>(j, "difficulty", what);
    if (!a.text && !a.difficulty) throw SchemaError("corpus article \"" + a.id + "\": needs \"text\" or \"difficulty\"");
    a.genre = detail::required<std::string>(j, "genre", what);
    a.grade = detail::required<int>(j, "grade", what);
    if (a.grade < kMinGrade || a.grade > kMaxGrade) {
      throw SchemaError("corpus article \"" + a.id + "\": grade " + std::to_string(a.grade) +
                        " outside [3, 12]");
    }
    return a;
  }

  bool operator==(const LabeledArticle&) const = default;
};

/// Corpus file: JSON Lines, one article per line. Errors name the line.
inline std::vector<LabeledArticle> parse_corpus(std::string_view jsonl) {
  std::vector<LabeledArticle> out;
  std::size_t start = 0;
  int line_no = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    ++line_no;
    auto line = jsonl.substr(start, end - start);
    start = end + 1;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(LabeledArticle::from_json(Json::parse(line)));
    } catch (const Json::parse_error& e) {
      throw SchemaError("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::string emit_corpus(const std::vector<LabeledArticle>& corpus) {
  std::string out;
  for (const auto& a : corpus) {
    out += a.to_line();
    out += '\n';
  }
  return out;
}

inline LatentTable latent_table(const std::vector<LabeledArticle>& corpus) {
  LatentTable t;
  for (const auto& a : corpus) t[a.id] = Latent{a.difficulty, a.genre, a.grade};
  return t;
}

// ---------------------------------------------------------------------------
// Genre partition

struct GenrePartition {
  struct Block {
    std::string id;
    std::vector<std::string> genres;
    std::string role;
    bool operator==(const Block&) const = default;
  };
  std::vector<Block> blocks;

  const Block* block_for(std::string_view genre) const {
    for (const auto& b : blocks) {
      for (const auto& g : b.genres) {
        if (g == genre) return &b;
      }
    }
    return nullptr;
  }

  std::vector<std::string> genres() const {
    std::vector<std::string> out;
    for (const auto& b : blocks) out.insert(out.end(), b.genres.begin(), b.genres.end());
    return out;
  }

  /// Blocks are disjoint, non-empty, each has a role, and together cover `genres`.
  void check(const std::vector<std::string>& configured) const {
    if (blocks.empty()) throw ConfigurationError("genre partition: no blocks");
    std::set<std::string> seen, ids;
    for (const auto& b : blocks) {
      if (b.id.empty() || b.role.empty()) throw ConfigurationError("genre partition: block needs id and role");
      if (!ids.insert(b.id).second) throw ConfigurationError("genre partition: duplicate block \"" + b.id + "\"");
      for (const auto& g : b.genres) {
        if (!seen.insert(g).second) {
          throw ConfigurationError("genre partition: genre \"" + g + "\" is in more than one block");
        }
      }
    }
    for (const auto& g : configured) {
      if (!seen.count(g)) throw ConfigurationError("genre partition: genre \"" + g + "\" is in no block");
    }
  }

  Json to_json() const {
    Json blocks_json = Json::array();
    for (const auto& b : blocks) blocks_json.push_back({{"id", b.id}, {"genres", b.genres}, {"role", b.role}});
    return Json{{"blocks", blocks_json}};
  }

  /// Partition file text: {"blocks": [{"id", "genres", "role"}]}, two-space indent.
  std::string emit() const {
    nlohmann::ordered_json j;
    j["blocks"] = nlohmann::ordered_json::array();
    for (const auto& b : blocks) {
      nlohmann::ordered_json o;
      o["id"] = b.id;
      o["genres"] = b.genres;
      o["role"] = b.role;
      j["blocks"].push_back(std::move(o));
    }
    return j.dump(2) + "\n";
  }

  static GenrePartition from_json(const Json& j) {
    detail::check_keys(j, "partition", {"blocks"});
    GenrePartition p;
    for (const auto& b : detail::required<Json>(j, "blocks", "partition")) {
      detail::check_keys(b, "partition block", {"id", "genres", "role"});
      p.blocks.push_back({detail::required<std::string>(b, "id", "partition block"),
                          detail::required<std::vector<std::string>>(b, "genres", "partition block"),
                          detail::required<std::string>(b, "role", "partition block")});
    }
    return p;
  }

  bool operator==(const GenrePartition&) const = default;
};

/// Hashes genres into `n_blocks` blocks of near-equal size: genres sorted by
/// FNV-1a hash (then name) are dealt round-robin. Roles are "grade-assessor-<block>".
inline GenrePartition synthetic_partition(std::vector<std::string> genres, int n_blocks = 6) {
  if (n_blocks < 1) throw ConfigurationError("synthetic partition: need at least one block");
  std::sort(genres.begin(), genres.end(), [](const auto& a, const auto& b) {
    const auto ha = fnv1a64(a), hb = fnv1a64(b);
    return ha != hb ? ha < hb : a < b;
  });
  const int n = std::min<int>(n_blocks, static_cast<int>(std::max<std::size_t>(genres.size(), 1)));
  GenrePartition p;
  for (int i = 0; i < n; ++i) {
    const std::string id = "b" + std::to_string(i);
    p.blocks.push_back({id, {}, "grade-assessor-" + id});
  }
  for (std::size_t i = 0; i < genres.size(); ++i) p.blocks[i % n].genres.push_back(genres[i]);
  for (auto& b : p.blocks) std::sort(b.genres.begin(), b.genres.end());
  return p;
}

// ---------------------------------------------------------------------------
// Reference sets

struct ReferenceSets {
  std::map<int, std::vector<LabeledArticle>> by_grade;

  /// Every grade 3..12 has at least one reference and references carry their grade.
  void check() const {
    for (int g = kMinGrade; g <= kMaxGrade; ++g) {
      auto it = by_grade.find(g);
      if (it == by_grade.end() || it->second.empty()) {
        throw ConfigurationError("reference sets: no reference article for grade " + std::to_string(g));
      }
      for (const auto& a : it->second) {
        if (a.grade != g) throw ConfigurationError("reference sets: article \"" + a.id + "\" filed under wrong grade");
      }
    }
  }

  /// Picks k references per grade from training articles. When every
  /// candidate has a latent difficulty, the k closest to the grade's median
  /// difficulty are taken (ties by id); otherwise k are sampled with the seed.
  static ReferenceSets select(const std::vector<LabeledArticle>& training, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ConfigurationError("reference sets: k must be positive");
    std::map<int, std::vector<const LabeledArticle*>> pool;
    for (const auto& a : training) pool[a.grade].push_back(&a);
    ReferenceSets refs;
    for (auto& [grade, cands] : pool) {
      std::sort(cands.begin(), cands.end(), [](auto* a, auto* b) { return a->id < b->id; });
      const bool latent = std::all_of(cands.begin(), cands.end(), [](auto* a) { return a->difficulty.has_value(); });
      if (latent) {
        std::vector<double> ds;
        for (auto* a : cands) ds.push_back(*a->difficulty);
        std::sort(ds.begin(), ds.end());
        const std::size_t m = ds.size();
        const double median = m % 2 ? ds[m / 2] : 0.5 * (ds[m / 2 - 1] + ds[m / 2]);
        std::stable_sort(cands.begin(), cands.end(), [&](auto* a, auto* b) {
          return std::abs(*a->difficulty - median) < std::abs(*b->difficulty - median);
        });
      } else {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(grade)));
        rng.shuffle(cands);
      }
      auto& out = refs.by_grade[grade];
      for (std::size_t i = 0; i < cands.size() && i < k; ++i) out.push_back(*cands[i]);
    }
    refs.check();
    return refs;
  }

  /// Reference documents tagged with their grade, for a machine's ground truth.
  std::vector<Document> documents() const {
    std::vector<Document> out;
    for (const auto& [g, arts] : by_grade) {
      for (const auto& a : arts) {
        Document d = a.to_document();
        d.metadata[std::string(kReferenceGradeKey)] = std::to_string(g);
        out.push_back(std::move(d));
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Comparison scores and the search

/// Pairwise difficulty signal: +1 input harder than the reference, -1 easier, 0 same.
struct ComparisonScore {
  double value = 0.0;

  static std::optional<ComparisonScore> parse(std::string_view answer) {
    auto v = text::parse_comparison(answer);
    if (!v) return std::nullopt;
    return ComparisonScore{static_cast<double>(*v)};
  }
};

/// Arithmetic mean of comparison scores. Throws ConfigurationError when empty.
inline double mean_comparison(const std::vector<ComparisonScore>& scores) {
  if (scores.empty()) throw ConfigurationError("mean comparison: empty reference list");
  double sum = 0.0;
  for (const auto& s : scores) sum += s.value;
  return sum / static_cast<double>(scores.size());
}

enum class HaltReason { within_threshold, oscillation, boundary, iteration_cap };

inline std::string_view to_string(HaltReason r) noexcept {
  switch (r) {
    case HaltReason::within_threshold:
      return "within-threshold";
    case HaltReason::oscillation:
      return "oscillation";
    case HaltReason::boundary:
      return "boundary";
    case HaltReason::iteration_cap:
      return "iteration-cap";
  }
  return "iteration-cap";
}

inline HaltReason parse_halt_reason(std::string_view s) {
  for (auto r : {HaltReason::within_threshold, HaltReason::oscillation, HaltReason::boundary,
                 HaltReason::iteration_cap}) {
    if (to_string(r) == s) return r;
  }
  throw SchemaError("unknown halt reason \"" + std::string(s) + "\"");
}

struct SearchTrace {
  std::vector<std::pair<int, double>> visited;  // (grade, mean score)
  int final_grade = kMinGrade;
  HaltReason halt_reason = HaltReason::within_threshold;
  // Filled by the machine, not by the search itself.
  std::string genre;
  int initial_grade = kMinGrade;
  std::vector<std::string> diagnostics;

  bool holds_invariants() const {
    if (final_grade < kMinGrade || final_grade > kMaxGrade) return false;
    for (std::size_t i = 1; i < visited.size(); ++i) {
      if (std::abs(visited[i].first - visited[i - 1].first) != 1) return false;
    }
    return true;
  }

  Json to_json() const {
    Json v = Json::array();
    for (const auto& [g, m] : visited) v.push_back({{"grade", g}, {"mean", m}});
    return Json{{"genre", genre},
                {"initial_grade", initial_grade},
                {"visited", std::move(v)},
                {"final_grade", final_grade},
                {"halt_reason", std::string(to_string(halt_reason))},
                {"diagnostics", diagnostics}};
  }

  static SearchTrace from_json(const Json& j) {
    SearchTrace t;
    t.genre = j.value("genre", std::string());
    t.initial_grade = j.at("initial_grade").get<int>();
    for (const auto& v : j.at("visited")) t.visited.emplace_back(v.at("grade").get<int>(), v.at("mean").get<double>());
    t.final_grade = j.at("final_grade").get<int>();
    t.halt_reason = parse_halt_reason(j.at("halt_reason").get<std::string>());
    t.diagnostics = j.value("diagnostics", std::vector<std::string>{});
    return t;
  }
};

/// Incremental hill climb over grades. Feed it the mean comparison score at
/// current() until done().
///   mean >  theta: move up;  mean < -theta: move down;  else stop here.
///   A move past grade 3 or 12 stops at the boundary. A move onto a visited
///   grade stops with the one of the two grades whose |mean| is smaller (the
///   lower grade on ties). At most kMaxRounds observations.
class LocalSearch {
 public:
  LocalSearch(int start_grade, double theta) : current_(clamp_grade(start_grade)), theta_(theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigurationError("local search: theta must be in (0, 1)");
  }

  int current() const noexcept { return current_; }
  bool done() const noexcept { return done_; }
  const SearchTrace& trace() const noexcept { return trace_; }

  void observe(double mean) {
    if (done_) return;
    trace_.visited.emplace_back(current_, mean);
    means_[current_] = mean;
    int next;
    if (mean > theta_) {
      next = current_ + 1;
    } else if (mean < -theta_) {
      next = current_ - 1;
    } else {
      return finish(current_, HaltReason::within_threshold);
    }
    if (next < kMinGrade || next > kMaxGrade) return finish(current_, HaltReason::boundary);
    if (auto it = means_.find(next); it != means_.end()) {
      const double here = std::abs(mean), there = std::abs(it->second);
      const int pick = here < there ? current_ : there < here ? next : std::min(current_, next);
      return finish(pick, HaltReason::oscillation);
    }
    if (static_cast<int>(trace_.visited.size()) >= kMaxRounds) {
      return finish(current_, HaltReason::iteration_cap);
    }
    current_ = next;
  }

 private:
  void finish(int grade, HaltReason reason) {
    done_ = true;
    trace_.final_grade = grade;
    trace_.halt_reason = reason;
  }

  int current_;
  double theta_;
  bool done_ = false;
  std::map<int, double> means_;
  SearchTrace trace_;
};

/// Runs the search to completion against a mean-score function.
inline SearchTrace local_search(int start_grade, double theta, const std::function<double(int)>& mean_at) {
  LocalSearch search(start_grade, theta);
  while (!search.done()) search.observe(mean_at(search.current()));
  SearchTrace t = search.trace();
  t.initial_grade = clamp_grade(start_grade);
  return t;
}

// ---------------------------------------------------------------------------
// Query-task builders

inline QueryTask genre_task(const Document& article, const std::vector<std::string>& genres) {
  QueryTask t;
  t.id = "genre";
  t.description = "Identify the genre of the article.";
  t.context_excerpts.push_back({article.id, article.body});
  t.requirements.push_back("Answer with exactly one genre name from: " + text::join(genres, ", "));
  t.validation_method = {"one-of", Json{{"choices", genres}, {"label", "genre name"}}};
  t.oracle_role = std::string(kGenreRole);
  return t;
}

inline QueryTask grade_task(const Document& article, const GenrePartition::Block& block) {
  QueryTask t;
  t.id = "grade";
  t.description = "Assess the school grade level (3 to 12) of the article.";
  t.context_excerpts.push_back({article.id, article.body});
  t.requirements.push_back("Answer with a single grade number.");
  t.validation_method = {"numeric-range", Json{{"min", kMinGrade}, {"max", kMaxGrade}, {"clamp", true}}};
  t.oracle_role = block.role;
  return t;
}

inline std::string comparison_task_id(int grade, std::string_view ref_id) {
  std::string g = std::to_string(grade);
  if (g.size() < 2) g.insert(0, "0");
  return "cmp-g" + g + "-" + std::string(ref_id);
}

inline QueryTask comparison_task(const Document& article, const Document& reference, int grade,
                                 std::string role = std::string(kComparatorRole)) {
  QueryTask t;
  t.id = comparison_task_id(grade, reference.id);
  t.description = "Compare the reading difficulty of the first text with the second text.";
  t.context_excerpts.push_back({article.id, article.body});
  t.context_excerpts.push_back({reference.id, reference.body});
  t.requirements.push_back("Answer with one word: harder, same, or easier (the first text relative to the second).");
  t.validation_method = {"comparison", Json::object()};
  t.oracle_role = std::move(role);
  return t;
}

// ---------------------------------------------------------------------------
// The ARA machine

struct AraParams {
  GenrePartition partition;
  std::vector<std::string> genres;
  double theta = kDefaultTheta;
  std::string genre_role = std::string(kGenreRole);
  std::string comparator_role = std::string(kComparatorRole);

  static AraParams from_json(const Json& params) {
    constexpr std::string_view what = "ara controller params";
    detail::check_keys(params, what, {"partition", "genres", "theta", "genre_role", "comparator_role"});
    AraParams p;
    p.partition = GenrePartition::from_json(detail::required<Json>(params, "partition", what));
    p.genres = detail::optional_field<std::vector<std::string>>(params, "genres", {}, what);
    if (p.genres.empty()) p.genres = p.partition.genres();
    p.theta = detail::optional_field<double>(params, "theta", kDefaultTheta, what);
    p.genre_role = detail::optional_field<std::string>(params, "genre_role", std::string(kGenreRole), what);
    p.comparator_role =
        detail::optional_field<std::string>(params, "comparator_role", std::string(kComparatorRole), what);
    p.partition.check(p.genres);
    if (!(p.theta > 0.0 && p.theta < 1.0)) throw ConfigurationError("ara: theta must be in (0, 1)");
    return p;
  }

  Json to_json() const {
    return Json{{"partition", partition.to_json()}, {"genres", genres}, {"theta", theta},
                {"genre_role", genre_role}, {"comparator_role", comparator_role}};
  }
};

/// "ara" controller. The article is the document named by task parameter
/// "article" (default: the first document without a reference grade);
/// references are the documents tagged with metadata "reference_grade".
/// The final answer is the SearchTrace as JSON.
class AraController final : public Controller {
 public:
  explicit AraController(const Json& params) : params_(AraParams::from_json(params)) {}

  StepResult step(const MachineView& view) override {
    const auto& st = view.state;
    switch (phase_) {
      case Phase::start: {
        load(view);
        QueryTask t = genre_task(*article_, params_.genres);
        t.oracle_role = params_.genre_role;
        phase_ = Phase::genre;
        return StepResult::emit({std::move(t)});
      }
      case Phase::genre: {
        if (st.is_failed("genre")) return StepResult::fail("ara: genre assessment failed");
        const auto* o = st.outcome("genre");
        if (!o || !o->usable()) return StepResult::wait();
        trace_.genre = o->extracted_spans.front();
        const auto* block = params_.partition.block_for(trace_.genre);
        if (!block) throw ConfigurationError("ara: genre \"" + trace_.genre + "\" is in no partition block");
        phase_ = Phase::grade;
        return StepResult::emit({grade_task(*article_, *block)});
      }
      case Phase::grade: {
        if (st.is_failed("grade")) return StepResult::fail("ara: grade assessment failed");
        const auto* o = st.outcome("grade");
        if (!o || !o->usable()) return StepResult::wait();
        const int start = clamp_grade(std::stol(o->extracted_spans.front()));
        trace_.initial_grade = start;
        search_.emplace(start, params_.theta);
        phase_ = Phase::compare;
        return StepResult::emit(comparisons(search_->current()));
      }
      case Phase::compare: {
        std::vector<ComparisonScore> scores;
        for (const auto& id : current_batch_) {
          if (st.is_failed(id)) {
            trace_.diagnostics.push_back("unparseable comparison " + id + " counted as 0");
            scores.push_back({0.0});
            continue;
          }
          const auto* o = st.outcome(id);
          if (!o || !o->usable()) return StepResult::wait();
          scores.push_back(*ComparisonScore::parse(o->extracted_spans.front()));
        }
        search_->observe(mean_comparison(scores));
        if (search_->done()) {
          const auto& t = search_->trace();
          trace_.visited = t.visited;
          trace_.final_grade = t.final_grade;
          trace_.halt_reason = t.halt_reason;
          return StepResult::finish(trace_.to_json().dump());
        }
        return StepResult::emit(comparisons(search_->current()));
      }
    }
    return StepResult::wait();
  }

 private:
  enum class Phase { start, genre, grade, compare };

  void load(const MachineView& view) {
    const auto id = view.task.param("article");
    for (const auto& d : view.truth.documents) {
      auto it = d.metadata.find(std::string(kReferenceGradeKey));
      if (it != d.metadata.end()) {
        int g;
        try {
          g = std::stoi(it->second);
        } catch (const std::exception&) {
          throw ConfigurationError("ara: bad reference grade on \"" + d.id + "\"");
        }
        references_[g].push_back(&d);
      } else if (!article_ && (id.empty() || d.id == id)) {
        article_ = &d;
      }
    }
    if (!id.empty() && (!article_ || article_->id != id)) {
      throw ReferenceError("ara: unknown article \"" + id + "\"");
    }
    if (!article_) throw ReferenceError("ara: no article to assess in the ground truth");
    for (int g = kMinGrade; g <= kMaxGrade; ++g) {
      if (references_[g].empty()) {
        throw ConfigurationError("ara: empty reference list for grade " + std::to_string(g));
      }
    }
  }

  std::vector<QueryTask> comparisons(int grade) {
    std::vector<QueryTask> out;
    current_batch_.clear();
    for (const auto* ref : references_.at(grade)) {
      out.push_back(comparison_task(*article_, *ref, grade, params_.comparator_role));
      current_batch_.push_back(out.back().id);
    }
    return out;
  }

  AraParams params_;
  Phase phase_ = Phase::start;
  const Document* article_ = nullptr;
  std::map<int, std::vector<const Document*>> references_;
  std::optional<LocalSearch> search_;
  std::vector<std::string> current_batch_;
  SearchTrace trace_;
};

inline void register_controllers(ControllerRegistry& registry) {
  registry.add("ara", [](const Json& p) { return std::make_unique<AraController>(p); });
}

/// Ground truth for assessing one article: the article followed by the references.
inline GroundTruth assessment_truth(const Document& article, const std::vector<Document>& reference_docs) {
  GroundTruth t;
  t.documents.reserve(reference_docs.size() + 1);
  t.documents.push_back(article);
  t.documents.insert(t.documents.end(), reference_docs.begin(), reference_docs.end());
  return t;
}

}  // namespace aiom::ara
