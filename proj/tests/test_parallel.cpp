// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

#include "doctest.h"
#include "gprompt/parallel.hpp"

using namespace gprompt;

TEST_CASE("worker count") {
  CHECK(worker_count(3) == 3);
  ::setenv("GPROMPT_THREADS", "1", 1);
  CHECK(worker_count(0) == 1);
  CHECK(worker_count(5) == 5);
  ::setenv("GPROMPT_THREADS", "junk", 1);
  CHECK(worker_count(0) >= 1);
  ::unsetenv("GPROMPT_THREADS");
  CHECK(worker_count(0) >= 1);
}

TEST_CASE("every task runs exactly once") {
  for (std::size_t workers : {1u, 2u, 7u, 64u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), workers, [&](std::size_t t) { ++hits[t]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("no tasks expected"); });
}

TEST_CASE("exceptions reach the caller") {
  for (std::size_t workers : {1u, 4u}) {
    std::atomic<int> ran{0};
    CHECK_THROWS_AS(parallel_for(50, workers,
                                 [&](std::size_t t) {
                                   ++ran;
                                   if (t == 17) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
    CHECK(ran.load() >= 18);
  }
}
