#include "hyperdiff/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace hyperdiff {

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int threads) {
  if (threads >= 1) omp_set_num_threads(threads);
}

void configure_threads_from_env() {
  if (const char* env = std::getenv("HYPERDIFF_THREADS")) {
    try {
      set_thread_count(std::stoi(env));
    } catch (const std::exception&) {
      // unparsable value: keep the OpenMP default
    }
  }
}

}  // namespace hyperdiff
