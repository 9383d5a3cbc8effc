#pragma once

#include <cstddef>
#include <functional>

namespace lrpseg {

// Worker count: LRPSEG_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

// Runs body(i) for i in [0, count). Each index is processed by exactly one
// worker, so results are independent of the thread count as long as body(i)
// only writes state owned by i.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace lrpseg
