#pragma once

#include <functional>

namespace poisson_embed {

// Worker count: hardware concurrency, capped by POISSON_EMBED_THREADS when set.
int worker_count();

// Runs body(i) for i in [0, n) on up to worker_count() threads. Iterations
// must write to disjoint outputs; results do not depend on the split.
void parallel_for(int n, const std::function<void(int)>& body);

} // namespace poisson_embed
