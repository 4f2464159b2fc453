// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
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

#ifndef MAST_PARALLEL_HPP_
#define MAST_PARALLEL_HPP_

#include <functional>

namespace mast {

// Worker count for task parallelism: MAST_THREADS if set (clamped to >=1),
// otherwise hardware concurrency.
int worker_count();

// Runs task(0), ..., task(n-1) on the shared pool and blocks until all have
// finished. Tasks must be independent of each other; any scheduling order
// must produce the same result, which keeps outputs bitwise independent of
// the worker count. Exceptions from tasks are rethrown on the caller.
void parallel_for(int n, const std::function<void(int)>& task);

}  // namespace mast

#endif  // MAST_PARALLEL_HPP_
