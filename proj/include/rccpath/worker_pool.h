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

#ifndef RCCPATH_WORKER_POOL_H_
#define RCCPATH_WORKER_POOL_H_

#include <cstddef>
#include <functional>

namespace rccpath {

/// Calls fn(i) for every i in [0, n) on up to `workers` threads. Results are
/// expected to be written to per-index slots, so output order never depends
/// on scheduling. If any call throws, the exception of the lowest failing
/// index is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace rccpath

#endif  // RCCPATH_WORKER_POOL_H_
