#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lqmf {

// Process-wide worker cap. The CLI sets this from --jobs / LQMFPG_JOBS;
// results never depend on it because every parallel unit owns a derived
// RNG stream and reductions run in index order.

int max_jobs();
void set_max_jobs(int jobs);

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; fn must
// only write to per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lqmf
