#pragma once

namespace shearo {

/// Worker count: hardware threads capped by the SHEARO_THREADS environment
/// variable. Every parallel loop partitions output elements, so results do
/// not depend on the value.
int max_threads();

/// Applies the cap to the OpenMP runtime. Called once from entry points.
void init_threads();

}  // namespace shearo
