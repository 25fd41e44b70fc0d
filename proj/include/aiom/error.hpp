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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aiom {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query-task or prompt references a document that is not in the ground truth.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: unregistered validator/controller, unknown behavior, bad params.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// A machine produced something structurally impossible (unknown role, dependency cycle, ...).
class DefinitionError : public Error {
 public:
  using Error::Error;
};

/// Config text that fails to parse or violates the schema.
class SchemaError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable = false)
      : Error(what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// A scripted backend had no rule for the prompt it was given.
class FixtureGapError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Replay diverged from the recorded transcript.
class ReplayError : public Error {
 public:
  ReplayError(const std::string& what, std::int64_t seq)
      : Error(what), seq_(seq) {}

  /// Sequence number of the first divergent event, -1 when not tied to an event.
  std::int64_t seq() const noexcept { return seq_; }

 private:
  std::int64_t seq_;
};

}  // namespace aiom
