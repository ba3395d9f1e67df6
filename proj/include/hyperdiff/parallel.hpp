#pragma once

#include <cstddef>

namespace hyperdiff {

// Thread count used by the sparse kernels. Defaults to HYPERDIFF_THREADS when
// set, otherwise the OpenMP default.
int thread_count();
void set_thread_count(int threads);
// Re-read HYPERDIFF_THREADS.
void configure_threads_from_env();

}  // namespace hyperdiff
