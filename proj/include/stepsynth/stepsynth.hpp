// Copyright 2026 The stepsynth Authors
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

// Umbrella header.

#ifndef STEPSYNTH_STEPSYNTH_HPP_
#define STEPSYNTH_STEPSYNTH_HPP_

#include "stepsynth/bench.hpp"
#include "stepsynth/dsl.hpp"
#include "stepsynth/grid.hpp"
#include "stepsynth/guidance.hpp"
#include "stepsynth/oracle.hpp"
#include "stepsynth/program_text.hpp"
#include "stepsynth/remote_guidance.hpp"
#include "stepsynth/search.hpp"
#include "stepsynth/tasks.hpp"
#include "stepsynth/token_codec.hpp"
#include "stepsynth/vocabulary.hpp"

#endif  // STEPSYNTH_STEPSYNTH_HPP_
