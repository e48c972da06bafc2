#pragma once

namespace roughpde {

// Selects the OpenMP kernel or its serial reference. Both produce identical
// results: every parallel loop writes disjoint outputs and reductions are
// performed serially afterwards.
enum class Execution { serial, parallel };

int max_threads() noexcept;

}  // namespace roughpde
