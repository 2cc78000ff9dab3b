// Copyright 2026 The rccpath Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RCCPATH_EXACT_SUM_H_
#define RCCPATH_EXACT_SUM_H_

#include <cmath>
#include <cstdint>

#include "rccpath/error.h"

namespace rccpath {

/// Fixed-point accumulator for values in [-1, 1] with 2^-62 resolution.
/// Integer addition makes add() and merge() exactly associative and
/// commutative, so partial sums from any number of workers combine to the
/// same bits in any order.
class ExactSum {
 public:
  static constexpr int kFractionBits = 62;

  void add(double v) {
    require(std::isfinite(v) && v >= -1.0 && v <= 1.0, ErrorCode::kInvalidInput,
            "exact sum accepts values in [-1, 1]");
    total_ += static_cast<__int128>(std::llround(std::ldexp(v, kFractionBits)));
  }
  void merge(const ExactSum& other) { total_ += other.total_; }

  double value() const { return std::ldexp(static_cast<double>(total_), -kFractionBits); }
  double mean(std::uint64_t count) const {
    return count == 0 ? 0.0 : value() / static_cast<double>(count);
  }

  friend bool operator==(const ExactSum& a, const ExactSum& b) { return a.total_ == b.total_; }

 private:
  __int128 total_ = 0;
};

}  // namespace rccpath

#endif  // RCCPATH_EXACT_SUM_H_
