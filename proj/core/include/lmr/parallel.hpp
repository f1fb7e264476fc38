// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace lmr {

// Worker count honoring the LMR_THREADS cap; `requested` == 0 means "as many
// as allowed".
std::size_t thread_budget(std::size_t requested = 0);

// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
// contiguous partition. Callers write results into per-index slots, so the
// outcome does not depend on the worker count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace lmr
