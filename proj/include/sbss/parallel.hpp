#pragma once

#include <cstddef>
#include <functional>

namespace sbss {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_thread_count(unsigned threads);
unsigned thread_count() noexcept;

/// Runs body(i) for i in [0, count). Work is split across thread_count()
/// threads; calls made from inside a worker run serially. The first exception
/// by index is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace sbss
