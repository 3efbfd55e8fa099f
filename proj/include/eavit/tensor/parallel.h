#pragma once

#include <cstddef>
#include <functional>

namespace eavit::tensor {

// Worker count used by row-parallel kernels. Defaults to EAVIT_THREADS when
// set, otherwise the hardware concurrency. Results never depend on it: every
// output row is always reduced by one worker in a fixed order.
std::size_t thread_count();
void set_thread_count(std::size_t count);

// Calls body(begin, end) over disjoint ranges covering [0, rows). Runs inline
// when the estimated work is too small to pay for threads.
void parallel_rows(std::size_t rows, std::size_t work_per_row,
                   const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace eavit::tensor
