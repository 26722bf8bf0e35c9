#pragma once

#include <cstddef>
#include <functional>

namespace kf {

// Process-wide worker budget.  0 means "hardware concurrency".  The CLI sets
// this from --jobs; library code never spawns more threads than this.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n).  Work items must be independent and write only
// to their own preallocated output slots; any reduction happens after this
// returns, sequentially, so results do not depend on thread scheduling.
// Exceptions thrown by fn are rethrown (first one in item order wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace kf
