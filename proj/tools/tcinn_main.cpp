#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#endif

#include "tcinn/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__) || defined(__linux__)
  // The training loop allocates and frees the same multi-megabyte buffers
  // every step. Keep them on the heap instead of round-tripping through
  // mmap/munmap, otherwise page faults dominate the per-step cost.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return tcinn::run_cli(argc, argv);
}
