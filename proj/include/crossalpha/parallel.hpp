#pragma once

#include <functional>

namespace crossalpha {

/// Worker pool width used by parallel_for; 0 picks hardware concurrency.
/// Parallelism affects speed only: every parallel site writes disjoint,
/// pre-allocated outputs.
void set_worker_threads(int n);
int worker_threads();

/// Runs fn(i) for i in [begin, end) on contiguous index blocks.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace crossalpha
