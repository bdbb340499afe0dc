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

#pragma once

#include <stdexcept>
#include <string>

namespace skembed {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (bad schema, violated precondition).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Market data rejected: arbitrage, non-interior prices, or an infeasible
/// call row.
class MarketRejected : public Error {
 public:
  using Error::Error;
};

/// A state space, enumeration or LP exceeded its configured size.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// The simplex hit a pivot below the numeric floor.
class NumericBreakdown : public Error {
 public:
  NumericBreakdown(const std::string& what, long row, long col)
      : Error(what + " (row " + std::to_string(row) + ", col " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}
  long row() const noexcept { return row_; }
  long col() const noexcept { return col_; }

 private:
  long row_;
  long col_;
};

}  // namespace skembed
