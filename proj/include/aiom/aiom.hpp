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

#include "aiom/ara.hpp"
#include "aiom/backends.hpp"
#include "aiom/config.hpp"
#include "aiom/core.hpp"
#include "aiom/error.hpp"
#include "aiom/http_backend.hpp"
#include "aiom/random.hpp"
#include "aiom/runtime.hpp"
#include "aiom/simharness.hpp"
#include "aiom/summarizer.hpp"
#include "aiom/text.hpp"
#include "aiom/validators.hpp"
