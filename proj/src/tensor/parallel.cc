#include "eavit/tensor/parallel.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace eavit::tensor {
namespace {

std::size_t initial_thread_count() {
  if (const char* env = std::getenv("EAVIT_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<std::size_t>& configured() {
  static std::atomic<std::size_t> count{initial_thread_count()};
  return count;
}

constexpr std::size_t kMinWorkPerThread = 1u << 16;

}  // namespace

std::size_t thread_count() { return configured().load(); }

void set_thread_count(std::size_t count) { configured().store(std::max<std::size_t>(1, count)); }

void parallel_rows(std::size_t rows, std::size_t work_per_row,
                   const std::function<void(std::size_t, std::size_t)>& body) {
  if (rows == 0) return;
  const std::size_t total = rows * std::max<std::size_t>(1, work_per_row);
  std::size_t workers = std::min({thread_count(), rows, total / kMinWorkPerThread});
  if (workers <= 1) {
    body(0, rows);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (rows + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(rows, chunk));
}

}  // namespace eavit::tensor
