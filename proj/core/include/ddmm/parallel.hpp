// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace ddmm {

/// Worker count: DDMM_THREADS if set (>= 1), else hardware concurrency.
int thread_count();

/// Runs fn(i) for i in [0, n) across up to thread_count() workers. Work items
/// must write to disjoint outputs; callers reduce in index order afterwards so
/// results do not depend on the worker count. Exceptions are rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ddmm
