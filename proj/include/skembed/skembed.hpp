/*
 * Copyright 2026 The skembed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/// @file skembed.hpp
/// @brief Umbrella header for the library (the CLI front-end is separate,
/// in cli.hpp).

#pragma once

#include "skembed/error.hpp"
#include "skembed/matrix.hpp"
#include "skembed/measures.hpp"
#include "skembed/metrics.hpp"
#include "skembed/lattice.hpp"
#include "skembed/state_graph.hpp"
#include "skembed/stopping_dp.hpp"
#include "skembed/simplex.hpp"
#include "skembed/primal_lp.hpp"
#include "skembed/dual_solver.hpp"
#include "skembed/monotonicity.hpp"
#include "skembed/experiments.hpp"
#include "skembed/io.hpp"
