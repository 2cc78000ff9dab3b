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

#ifndef RCCPATH_STATS_H_
#define RCCPATH_STATS_H_

#include <span>
#include <vector>

namespace rccpath {

/// Percentile with linear interpolation between order statistics
/// (q in [0, 100]). Takes its input by value and partially reorders it.
double percentile(std::vector<double> values, double q);

/// Middle order statistic; the mean of the two middle ones for even counts.
double median(std::span<const double> values);

}  // namespace rccpath

#endif  // RCCPATH_STATS_H_
