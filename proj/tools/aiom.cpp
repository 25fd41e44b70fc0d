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


// aiom: run AI-oracle machines, the summarizer and ARA machines, the
// simulation harness, and transcript replay.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 run error (limit,
// failed branch, definition error, replay divergence), 3 backend error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aiom/aiom.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRun = 2;
constexpr int kExitBackend = 3;

struct Common {
  fs::path output = "out";
  std::optional<std::uint64_t> seed;
  int verbosity = 0;
};

int fail(int code, const std::string& message) {
  std::cerr << "aiom: error: " << message << "\n";
  return code;
}

/// Runs a machine, writes the transcript, and maps the outcome to an exit code.
int execute(const aiom::MachineDefinition& def, const aiom::Dispatcher& oracles, const aiom::GroundTruth& truth,
            const aiom::TaskSpec& task, std::uint64_t seed, const Common& common,
            std::optional<std::string>* final_answer = nullptr) {
  const auto registries = aiom::default_registries();
  const fs::path transcript_path = common.output / "transcript.jsonl";
  try {
    auto result = aiom::run(def, registries, oracles, truth, task, seed);
    aiom::write_file(transcript_path, result.transcript.to_jsonl());
    if (common.verbosity > 0) std::cerr << "aiom: transcript: " << transcript_path.string() << "\n";
    if (!result.final_answer) return fail(kExitRun, result.diagnostic().value_or("run halted without an answer"));
    if (final_answer) *final_answer = result.final_answer;
    std::cout << *result.final_answer << "\n";
    return kExitOk;
  } catch (const aiom::RunError& e) {
    aiom::write_file(transcript_path, e.transcript().to_jsonl());
    return fail(e.cause() == aiom::RunError::Cause::backend ? kExitBackend : kExitRun, e.what());
  }
}

std::uint64_t pick_seed(const Common& common, std::uint64_t fallback) { return common.seed.value_or(fallback); }

/// Plain text becomes a document named after the file; *.json files hold a Document object.
aiom::Document read_document(const fs::path& path) {
  const std::string text = aiom::read_file(path);
  if (path.extension() == ".json") return aiom::parse_json_text(text, path.string()).get<aiom::Document>();
  aiom::Document d;
  d.id = path.stem().string();
  d.body = text;
  while (!d.body.empty() && (d.body.back() == '\n' || d.body.back() == '\r')) d.body.pop_back();
  return d;
}

/// A machine whose roles all use the HTTP backend with `model`.
aiom::MachineDefinition http_machine(std::string name, const std::vector<std::string>& roles,
                                     const std::string& model) {
  aiom::MachineDefinition def;
  def.name = std::move(name);
  for (const auto& role : roles) {
    const auto ref = aiom::backend_ref("http", role);
    def.bindings.push_back({role, aiom::Modality::language, ref});
    def.backends[ref] = {"http", aiom::Json{{"model", model}}};
  }
  return def;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string task;
  std::string truth;
  std::vector<std::string> params;
};

int cmd_run(const RunArgs& a, const Common& common) {
  const auto def = aiom::load_config(a.config);
  aiom::TaskSpec task;
  task.statement = a.task;
  for (const auto& kv : a.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw aiom::ConfigurationError("--param expects key=value, got \"" + kv + "\"");
    task.parameters[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  aiom::GroundTruth truth;
  if (!a.truth.empty()) {
    truth = aiom::parse_json_text(aiom::read_file(a.truth), a.truth).get<aiom::GroundTruth>();
  }
  const auto oracles = aiom::make_oracles(def, {fs::path(a.config).parent_path(), nullptr});
  return execute(def, oracles, truth, task, pick_seed(common, def.seed), common);
}

struct SummarizeArgs {
  std::string article;
  std::string topic;
  int budget = 50;
  double lambda = 0.7;
  std::string config;
  std::string model = "gpt-4o";
};

int cmd_summarize(const SummarizeArgs& a, const Common& common) {
  auto def = a.config.empty()
                 ? http_machine("summarizer", {std::string(aiom::summarizer::kOracleRole)}, a.model)
                 : aiom::load_config(a.config);
  def.controller = {"summarizer", aiom::Json::object()};
  aiom::GroundTruth truth;
  truth.documents.push_back(read_document(a.article));
  aiom::TaskSpec task;
  task.statement = "Summarize the article with respect to the topic.";
  task.parameters = {{"topic", a.topic},
                     {"budget", std::to_string(a.budget)},
                     {"lambda", aiom::Json(a.lambda).dump()},
                     {"article", truth.documents.front().id}};
  const auto oracles =
      aiom::make_oracles(def, {a.config.empty() ? fs::path() : fs::path(a.config).parent_path(), nullptr});
  std::optional<std::string> summary;
  const int code = execute(def, oracles, truth, task, pick_seed(common, def.seed), common, &summary);
  if (summary) {
    aiom::write_file(common.output / "report.json",
                     aiom::Json{{"topic", a.topic}, {"budget_words", a.budget}, {"summary", *summary}}.dump(2) + "\n");
  }
  return code;
}

struct AraArgs {
  std::string article;
  std::string article_id;
  std::string partition;
  std::string refs;
  double theta = aiom::ara::kDefaultTheta;
  std::size_t k = 5;
  std::string config;
  std::string model = "gpt-4o";
};

int cmd_ara(const AraArgs& a, const Common& common) {
  namespace ara = aiom::ara;
  const auto ref_articles = ara::parse_corpus(aiom::read_file(a.refs));
  auto latents = std::make_shared<aiom::LatentTable>(ara::latent_table(ref_articles));

  aiom::Document article;
  const fs::path article_path = a.article;
  if (article_path.extension() == ".jsonl") {
    const auto items = ara::parse_corpus(aiom::read_file(article_path));
    const ara::LabeledArticle* pick = nullptr;
    for (const auto& it : items) {
      if (a.article_id.empty() || it.id == a.article_id) {
        pick = &it;
        break;
      }
    }
    if (!pick) throw aiom::ConfigurationError("article \"" + a.article_id + "\" not found in " + a.article);
    article = pick->to_document();
    (*latents)[pick->id] = aiom::Latent{pick->difficulty, pick->genre, pick->grade};
  } else {
    article = read_document(article_path);
  }

  std::vector<std::string> genres;
  ara::GenrePartition partition;
  if (a.partition.empty()) {
    std::set<std::string> g;
    for (const auto& r : ref_articles) g.insert(r.genre);
    partition = ara::synthetic_partition({g.begin(), g.end()});
  } else {
    partition = ara::GenrePartition::from_json(aiom::parse_json_text(aiom::read_file(a.partition), a.partition));
  }
  genres = partition.genres();
  std::sort(genres.begin(), genres.end());

  aiom::MachineDefinition def;
  if (a.config.empty()) {
    std::vector<std::string> roles{std::string(ara::kGenreRole)};
    for (const auto& b : partition.blocks) roles.push_back(b.role);
    roles.emplace_back(ara::kComparatorRole);
    def = http_machine("ara", roles, a.model);
  } else {
    def = aiom::load_config(a.config);
  }
  def.controller = {"ara", aiom::Json{{"partition", partition.to_json()}, {"genres", genres}, {"theta", a.theta}}};
  if (def.limits.max_tasks < 256) def.limits.max_tasks = 256;

  const auto seed = pick_seed(common, def.seed);
  const auto refs = ara::ReferenceSets::select(ref_articles, a.k, seed);
  const auto truth = ara::assessment_truth(article, refs.documents());
  aiom::TaskSpec task;
  task.statement = "Assess the readability grade of the article.";
  task.parameters["article"] = article.id;
  const auto oracles = aiom::make_oracles(
      def, {a.config.empty() ? fs::path() : fs::path(a.config).parent_path(), std::move(latents)});
  std::optional<std::string> trace;
  const int code = execute(def, oracles, truth, task, seed, common, &trace);
  if (trace) aiom::write_file(common.output / "report.json", aiom::Json::parse(*trace).dump(2) + "\n");
  return code;
}

struct SimulateArgs {
  std::string corpus_spec;
  std::string corpus;
  std::string noise;
  int articles = 1654;
  int genres = 33;
  double sigma = 0.3;
  std::uint64_t corpus_seed = 0;
  std::optional<double> assessor_accuracy;
  std::optional<double> slope;
  std::optional<double> comparator_p;
  std::string basis;
  std::string assessor;
  int trials = 50;
  std::size_t k = 5;
  double theta = aiom::ara::kDefaultTheta;
  bool csv = false;
  std::vector<double> sweep;
};

int cmd_simulate(const SimulateArgs& a, const Common& common) {
  namespace sim = aiom::sim;
  std::vector<aiom::ara::LabeledArticle> corpus;
  sim::CorpusSpec spec;
  if (!a.corpus.empty()) {
    corpus = aiom::ara::parse_corpus(aiom::read_file(a.corpus));
  } else {
    if (!a.corpus_spec.empty()) {
      spec = sim::CorpusSpec::from_json(aiom::parse_json_text(aiom::read_file(a.corpus_spec), a.corpus_spec));
    } else {
      spec.n_articles = a.articles;
      spec.n_genres = a.genres;
      spec.sigma = a.sigma;
      spec.seed = a.corpus_seed;
    }
    corpus = sim::generate_corpus(spec);
  }
  sim::NoiseSpec noise;
  if (!a.noise.empty()) noise = sim::NoiseSpec::from_json(aiom::parse_json_text(aiom::read_file(a.noise), a.noise));
  if (a.assessor_accuracy) noise.assessor_accuracy = *a.assessor_accuracy;
  if (a.slope) noise.slope = *a.slope;
  if (a.comparator_p) noise.comparator_p = *a.comparator_p;
  if (!a.basis.empty()) noise.basis = a.basis;
  if (!a.assessor.empty()) {
    noise = sim::NoiseSpec::from_json([&] {
      auto j = aiom::Json::parse(noise.to_json().dump());
      j["assessor"] = a.assessor;
      return j;
    }());
  }
  sim::SearchConfig search;
  search.k = a.k;
  search.theta = a.theta;
  const std::uint64_t seed = pick_seed(common, 0);

  if (!a.sweep.empty()) {
    nlohmann::ordered_json out;
    out["seed"] = seed;
    out["sweep"] = nlohmann::ordered_json::array();
    for (const auto& [slope, report] : sim::slope_sweep(corpus, noise, search, a.sweep, a.trials, seed)) {
      std::cout << "slope " << slope << "\n" << report.to_table() << "\n";
      out["sweep"].push_back(nlohmann::ordered_json{{"slope", slope}, {"report", report.to_json()}});
    }
    aiom::write_file(common.output / "report.json", out.dump(2) + "\n");
    return kExitOk;
  }

  auto report = sim::run_trials(corpus, noise, search, a.trials, seed);
  if (a.corpus.empty()) report.config["corpus"] = spec.to_json();
  aiom::write_file(common.output / "report.json", report.to_json_text());
  if (a.csv) aiom::write_file(common.output / "trials.csv", report.to_csv());
  std::cout << report.to_table();
  return kExitOk;
}

struct ReplayArgs {
  std::string transcript;
  std::string config;
};

int cmd_replay(const ReplayArgs& a, const Common& common) {
  const auto def = aiom::load_config(a.config);
  const auto recorded = aiom::Transcript::from_jsonl(aiom::read_file(a.transcript));
  try {
    const auto produced = aiom::replay(recorded, def, aiom::default_registries());
    std::cout << "replay: ok (" << produced.events.size() << " events)\n";
    if (common.verbosity > 0) std::cerr << "aiom: replayed " << a.transcript << "\n";
    return kExitOk;
  } catch (const aiom::ReplayError& e) {
    return fail(kExitRun, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aiom: AI-oracle machine runtime"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-o,--output", common.output, "Output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "Run seed (64-bit unsigned)");
    sub->add_flag("-v,--verbose", common.verbosity, "More diagnostics");
  };

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a machine from a config file");
  run->add_option("-c,--config", run_args.config, "Machine config")->required()->check(CLI::ExistingFile);
  run->add_option("-t,--task", run_args.task, "Task statement")->required();
  run->add_option("--truth", run_args.truth, "Ground truth JSON {\"documents\": [...]}")->check(CLI::ExistingFile);
  run->add_option("-p,--param", run_args.params, "Task parameter key=value");
  add_common(run);

  SummarizeArgs sum_args;
  auto* sum = app.add_subcommand("summarize", "Summarize an article on a topic");
  sum->add_option("-a,--article", sum_args.article, "Article (text, or Document JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sum->add_option("--topic", sum_args.topic, "Topic")->required();
  sum->add_option("--budget", sum_args.budget, "Summary length in words")->capture_default_str();
  sum->add_option("--lambda", sum_args.lambda, "MMR diversity weight")->capture_default_str();
  sum->add_option("-c,--config", sum_args.config, "Machine config for the oracle")->check(CLI::ExistingFile);
  sum->add_option("--model", sum_args.model, "HTTP model when no config is given")->capture_default_str();
  add_common(sum);

  AraArgs ara_args;
  auto* ara = app.add_subcommand("ara", "Assess the grade level of an article");
  ara->add_option("-a,--article", ara_args.article, "Article (text, Document JSON, or corpus JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  ara->add_option("--id", ara_args.article_id, "Article id within a corpus JSONL file");
  ara->add_option("--partition", ara_args.partition, "Genre partition JSON")->check(CLI::ExistingFile);
  ara->add_option("--refs", ara_args.refs, "Reference corpus JSONL")->required()->check(CLI::ExistingFile);
  ara->add_option("--theta", ara_args.theta, "Direction threshold")->capture_default_str();
  ara->add_option("-k,--k", ara_args.k, "References per grade")->capture_default_str();
  ara->add_option("-c,--config", ara_args.config, "Machine config for the oracles")->check(CLI::ExistingFile);
  ara->add_option("--model", ara_args.model, "HTTP model when no config is given")->capture_default_str();
  add_common(ara);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo trials of the ARA machine");
  sim->add_option("--corpus-spec", sim_args.corpus_spec, "Corpus spec JSON")->check(CLI::ExistingFile);
  sim->add_option("--corpus", sim_args.corpus, "Corpus JSONL instead of a generated one")->check(CLI::ExistingFile);
  sim->add_option("--noise", sim_args.noise, "Noise spec JSON")->check(CLI::ExistingFile);
  sim->add_option("--articles", sim_args.articles, "Generated corpus size")->capture_default_str();
  sim->add_option("--genres", sim_args.genres, "Generated genre count")->capture_default_str();
  sim->add_option("--sigma", sim_args.sigma, "Difficulty jitter")->capture_default_str();
  sim->add_option("--corpus-seed", sim_args.corpus_seed, "Corpus seed")->capture_default_str();
  sim->add_option("--assessor-accuracy", sim_args.assessor_accuracy, "Grade assessor accuracy");
  sim->add_option("--assessor", sim_args.assessor, "Grade assessor: noisy, uniform, constant");
  sim->add_option("--slope", sim_args.slope, "Comparator slope a");
  sim->add_option("--comparator-p", sim_args.comparator_p, "Constant comparator accuracy");
  sim->add_option("--basis", sim_args.basis, "Comparator basis: difficulty or grade");
  sim->add_option("--trials", sim_args.trials, "Trials")->capture_default_str();
  sim->add_option("-k,--k", sim_args.k, "References per grade")->capture_default_str();
  sim->add_option("--theta", sim_args.theta, "Direction threshold")->capture_default_str();
  sim->add_flag("--csv", sim_args.csv, "Also write per-trial trials.csv");
  sim->add_option("--sweep", sim_args.sweep, "Comparator slopes to sweep (calibration)")->delimiter(',');
  add_common(sim);

  ReplayArgs replay_args;
  auto* rep = app.add_subcommand("replay", "Replay a transcript and check it is a fixed point");
  rep->add_option("--transcript", replay_args.transcript, "Transcript JSONL")->required()->check(CLI::ExistingFile);
  rep->add_option("-c,--config", replay_args.config, "Machine config")->required()->check(CLI::ExistingFile);
  add_common(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "aiom: error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_args, common);
    if (*sum) return cmd_summarize(sum_args, common);
    if (*ara) return cmd_ara(ara_args, common);
    if (*sim) return cmd_simulate(sim_args, common);
    if (*rep) return cmd_replay(replay_args, common);
  } catch (const aiom::ReplayError& e) {
    return fail(kExitRun, e.what());
  } catch (const aiom::BackendError& e) {
    return fail(kExitBackend, e.what());
  } catch (const aiom::ConfigurationError& e) {
    return fail(kExitUsage, e.what());
  } catch (const aiom::Error& e) {
    return fail(kExitRun, e.what());
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }
  return kExitUsage;
}
