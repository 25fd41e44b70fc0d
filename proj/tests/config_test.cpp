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

#include "aiom/config.hpp"
#include "test_support.hpp"

namespace aiom {
namespace {

using testing::fixture;

constexpr std::string_view kMinimal = R"({
  "machine": "m",
  "controller": {"id": "echo"},
  "oracles": [{"role": "r", "backend": {"kind": "scripted", "params": {"rules": [{"pattern": "^", "response": "ok"}]}}}]
})";

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const SchemaError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, MinimalUsesDefaults) {
  const auto def = parse_config(kMinimal);
  EXPECT_EQ(def.name, "m");
  EXPECT_EQ(def.controller.params, Json::object());
  ASSERT_EQ(def.bindings.size(), 1u);
  EXPECT_EQ(def.bindings[0].modality, Modality::language);
  EXPECT_EQ(def.bindings[0].backend_ref, "scripted:r");
  EXPECT_EQ(def.limits, RunLimits{});
  EXPECT_EQ(def.seed, 0u);
}

TEST(Config, UnknownKeyIsNamed) {
  std::string text(kMinimal);
  text.replace(text.find("\"oracles\""), 9, "\"oracel\"");
  EXPECT_NE(error_of(text).find("unknown field \"oracel\""), std::string::npos);
}

TEST(Config, ParseErrorHasLineAndColumn) {
  const auto msg = error_of("{\n  \"machine\": \"m\",\n  oops\n}");
  EXPECT_NE(msg.find("line 3, column 3"), std::string::npos) << msg;
}

TEST(Config, RejectsBadShapes) {
  std::string text(kMinimal);
  auto with = [&](std::string_view from, std::string_view to) {
    std::string t = text;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  EXPECT_FALSE(error_of(with("\"scripted\"", "\"grpc\"")).empty());
  EXPECT_FALSE(error_of(with("\"role\": \"r\"", "\"role\": \"r\", \"modality\": \"smell\"")).empty());
  EXPECT_FALSE(error_of(R"({"machine":"m","controller":{"id":"echo"},"oracles":[]})").empty());
  const auto dup = with("}}}]", "}}}, {\"role\": \"r\", \"backend\": {\"kind\": \"http\"}}]");
  EXPECT_NE(error_of(dup).find("duplicate oracle role"), std::string::npos);
  EXPECT_THROW(parse_config(with("\"m\",", "\"m\", \"limits\": {\"max_tasks\": 0},")), ConfigurationError);
}

TEST(Config, VisionParsesButCannotDispatch) {
  std::string text(kMinimal);
  text.replace(text.find("\"role\": \"r\""), 11, "\"role\": \"r\", \"modality\": \"vision\"");
  const auto def = parse_config(text);
  EXPECT_EQ(def.bindings[0].modality, Modality::vision);
  const auto oracles = make_oracles(def);
  EXPECT_THROW(run(def, default_registries(), oracles, {}, {"hi", {}}, 0), RunError);
}

TEST(Config, EmitRoundTrips) {
  const auto def = parse_config(kMinimal);
  const auto text = emit_config(def);
  EXPECT_EQ(parse_config(text), def);
  EXPECT_EQ(emit_config(parse_config(text)), text);
}

TEST(Config, RandomMachinesRoundTrip) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto m = testing::random_machine(seed);
    const auto text = emit_config(m.def);
    EXPECT_EQ(parse_config(text), m.def) << seed;
  }
}

TEST(Config, StochasticCorpusPathIsResolved) {
  const auto def = parse_config(R"({
    "machine": "m", "controller": {"id": "echo"},
    "oracles": [{"role": "r", "backend": {"kind": "stochastic",
      "params": {"behavior": "noisy-grade-assessor", "accuracy": 1, "corpus": "golden/corpus.jsonl"}}}]})");
  OracleOptions opts;
  opts.base_dir = testing::source_dir() / "tests" / "fixtures";
  const auto oracles = make_oracles(def, opts);
  GroundTruth truth{{{"a02", "", "text", {}}}};
  QueryTask t = ara::grade_task(truth.documents[0], {"b", {"news"}, "r"});
  const auto answer = oracles.backend("r")->query(render_prompt(t, truth), {3, t.id});
  EXPECT_EQ(answer.text, "7");
  EXPECT_THROW(make_oracles(def), ConfigurationError);
}

// Golden files parse and emit bit-exactly.

TEST(Golden, Config) {
  const auto text = read_file(fixture("golden/echo_config.json"));
  EXPECT_EQ(emit_config(parse_config(text)), text);
}

TEST(Golden, Corpus) {
  const auto text = read_file(fixture("golden/corpus.jsonl"));
  const auto corpus = ara::parse_corpus(text);
  ASSERT_EQ(corpus.size(), 4u);
  EXPECT_EQ(*corpus[2].text, "The committee reviewed the proposal.\nIt passed.");
  EXPECT_EQ(ara::emit_corpus(corpus), text);
}

TEST(Golden, Partition) {
  const auto text = read_file(fixture("golden/partition.json"));
  const auto p = ara::GenrePartition::from_json(parse_json_text(text, "partition"));
  p.check({"essay", "fable", "news"});
  EXPECT_EQ(p.emit(), text);
}

TEST(Golden, Transcript) {
  const auto text = read_file(fixture("golden/transcript.jsonl"));
  const auto t = Transcript::from_jsonl(text);
  EXPECT_EQ(t.to_jsonl(), text);
  EXPECT_TRUE(t.holds_invariants());
  const auto def = load_config(fixture("golden/echo_config.json"));
  EXPECT_EQ(replay(t, def, default_registries()).to_jsonl(), text);
}

}  // namespace
}  // namespace aiom
