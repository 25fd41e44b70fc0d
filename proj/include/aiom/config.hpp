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

// Machine config files and backend instantiation.
//
//   {"machine": name,
//    "controller": {"id", "params"},
//    "oracles": [{"role", "modality", "backend": {"kind", "params"}}],
//    "limits": {"max_tasks", "max_cycles", "per_query_timeout_ms"},
//    "seed": n}
//
// Parsing is strict: unknown fields are schema errors naming the field.

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "aiom/ara.hpp"
#include "aiom/backends.hpp"
#include "aiom/http_backend.hpp"
#include "aiom/runtime.hpp"
#include "aiom/summarizer.hpp"
#include "aiom/validators.hpp"

namespace aiom {

/// Every built-in validator and controller.
inline Registries default_registries() {
  Registries r;
  register_basic_validators(r.validators);
  summarizer::register_validators(r.validators);
  register_generic_controllers(r.controllers);
  summarizer::register_controllers(r.controllers);
  ara::register_controllers(r.controllers);
  return r;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot read \"" + path.string() + "\"");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigurationError("cannot write \"" + path.string() + "\"");
  out << content;
}

/// Parses JSON, reporting syntax errors with 1-based line and column.
inline Json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError(std::string(what) + ": parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
}

inline std::string backend_ref(std::string_view kind, std::string_view role) {
  return std::string(kind) + ":" + std::string(role);
}

inline MachineDefinition config_from_json(const Json& j) {
  constexpr std::string_view what = "config";
  detail::check_keys(j, what, {"machine", "controller", "oracles", "limits", "seed"});
  MachineDefinition def;
  def.name = detail::required<std::string>(j, "machine", what);

  const auto controller = detail::required<Json>(j, "controller", what);
  detail::check_keys(controller, "controller", {"id", "params"});
  def.controller.id = detail::required<std::string>(controller, "id", "controller");
  def.controller.params = detail::optional_field<Json>(controller, "params", Json::object(), "controller");

  const auto oracles = detail::required<Json>(j, "oracles", what);
  if (!oracles.is_array()) throw SchemaError("config: field \"oracles\" has the wrong type");
  for (const auto& o : oracles) {
    detail::check_keys(o, "oracle", {"role", "modality", "backend"});
    OracleBinding b;
    b.role = detail::required<std::string>(o, "role", "oracle");
    b.modality = parse_modality(detail::optional_field<std::string>(o, "modality", "language", "oracle"));
    const auto backend = detail::required<Json>(o, "backend", "oracle");
    detail::check_keys(backend, "backend", {"kind", "params"});
    BackendSpec spec;
    spec.kind = detail::required<std::string>(backend, "kind", "backend");
    if (spec.kind != "http" && spec.kind != "scripted" && spec.kind != "stochastic") {
      throw SchemaError("backend: unknown kind \"" + spec.kind + "\"");
    }
    spec.params = detail::optional_field<Json>(backend, "params", Json::object(), "backend");
    b.backend_ref = backend_ref(spec.kind, b.role);
    def.backends[b.backend_ref] = std::move(spec);
    def.bindings.push_back(std::move(b));
  }

  if (j.contains("limits")) {
    const auto& l = j["limits"];
    detail::check_keys(l, "limits", {"max_tasks", "max_cycles", "per_query_timeout_ms"});
    def.limits.max_tasks = detail::optional_field<int>(l, "max_tasks", def.limits.max_tasks, "limits");
    def.limits.max_cycles = detail::optional_field<int>(l, "max_cycles", def.limits.max_cycles, "limits");
    def.limits.per_query_timeout = std::chrono::milliseconds(
        detail::optional_field<long>(l, "per_query_timeout_ms", def.limits.per_query_timeout.count(), "limits"));
  }
  def.seed = detail::optional_field<std::uint64_t>(j, "seed", 0, what);
  def.limits.check();
  if (def.bindings.empty()) throw SchemaError("config: \"oracles\" must list at least one binding");
  std::set<std::string> roles;
  for (const auto& b : def.bindings) {
    if (!roles.insert(b.role).second) throw SchemaError("config: duplicate oracle role \"" + b.role + "\"");
  }
  return def;
}

inline MachineDefinition parse_config(std::string_view text) {
  return config_from_json(parse_json_text(text, "config"));
}

inline MachineDefinition load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

/// Canonical config text: every field present, fixed key order, two-space indent.
inline std::string emit_config(const MachineDefinition& def) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["machine"] = def.name;
  j["controller"] = oj{{"id", def.controller.id}, {"params", oj::parse(def.controller.params.dump())}};
  j["oracles"] = oj::array();
  for (const auto& b : def.bindings) {
    const auto& spec = def.backends.at(b.backend_ref);
    oj o;
    o["role"] = b.role;
    o["modality"] = std::string(to_string(b.modality));
    o["backend"] = oj{{"kind", spec.kind}, {"params", oj::parse(spec.params.dump())}};
    j["oracles"].push_back(std::move(o));
  }
  j["limits"] = oj{{"max_tasks", def.limits.max_tasks},
                   {"max_cycles", def.limits.max_cycles},
                   {"per_query_timeout_ms", def.limits.per_query_timeout.count()}};
  j["seed"] = def.seed;
  return j.dump(2) + "\n";
}

struct OracleOptions {
  std::filesystem::path base_dir;               // resolves relative "corpus" paths
  std::shared_ptr<const LatentTable> latents;  // extra latent attributes for stochastic backends
};

/// Builds the backend for one binding.
///   http:       HttpBackendConfig params
///   scripted:   {"rules": [...]}
///   stochastic: {"behavior", "corpus"?: JSONL path, ...behavior params}
inline BackendPtr make_backend(const OracleBinding& binding, const BackendSpec& spec, const OracleOptions& opts) {
  if (spec.kind == "scripted") return ScriptedBackend::from_params(binding.backend_ref, spec.params);
  if (spec.kind == "http") {
    return std::make_shared<HttpBackend>(binding.backend_ref, HttpBackendConfig::from_params(spec.params));
  }
  if (spec.kind == "stochastic") {
    if (!spec.params.is_object()) throw SchemaError("stochastic backend params: expected a JSON object");
    Json params = spec.params;
    const auto behavior = detail::required<std::string>(params, "behavior", "stochastic backend params");
    params.erase("behavior");
    auto table = std::make_shared<LatentTable>();
    if (opts.latents) *table = *opts.latents;
    if (params.contains("corpus")) {
      std::filesystem::path p = detail::required<std::string>(params, "corpus", "stochastic backend params");
      if (p.is_relative()) p = opts.base_dir / p;
      for (auto& [id, latent] : ara::latent_table(ara::parse_corpus(read_file(p)))) table->insert_or_assign(id, latent);
      params.erase("corpus");
    }
    return std::make_shared<StochasticBackend>(binding.backend_ref, behavior, params, std::move(table));
  }
  throw ConfigurationError("unknown backend kind \"" + spec.kind + "\"");
}

inline OracleSet make_oracles(const MachineDefinition& def, const OracleOptions& opts = {}) {
  OracleSet set;
  for (const auto& b : def.bindings) {
    auto it = def.backends.find(b.backend_ref);
    if (it == def.backends.end()) throw ConfigurationError("no backend for role \"" + b.role + "\"");
    set.bind(b.role, make_backend(b, it->second, opts));
  }
  return set;
}

}  // namespace aiom
