// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace gprompt {

/// Number of workers to use. A positive `requested` wins; otherwise the
/// GPROMPT_THREADS environment variable caps hardware concurrency.
std::size_t worker_count(std::size_t requested = 0);

/// Runs fn(task) for task in [0, tasks) on up to `workers` threads. Tasks
/// must write to disjoint outputs; callers reduce in task order afterwards so
/// results do not depend on the worker count.
void parallel_for(std::size_t tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace gprompt
