// Minimal fork-join loop over independent indices.
#pragma once

#include <functional>

namespace efric {

void set_thread_count(int n);
int thread_count();

// Calls body(i) for i in [0, n). Each index is visited exactly once; results
// must be written to per-index slots so output does not depend on scheduling.
void parallel_for(long n, const std::function<void(long)>& body);

}  // namespace efric
