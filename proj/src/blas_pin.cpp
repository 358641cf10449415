// OpenBLAS probes the CPU model string at load time, and inside this VM the
// masked model name makes it fall back to generic Prescott kernels (about 7x
// slower than the SkylakeX ones this core can actually run). Setting the core
// type before OpenBLAS initializes fixes that, which is why the library is
// linked statically: a constructor in the executable runs before the
// statically-linked OpenBLAS initializer, but after a shared one's.

#include <cstdlib>

namespace {

__attribute__((constructor(101))) void pin_openblas_core() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx512f")) setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
#endif
  // Single training thread owns all heavy math; a thread pool only adds
  // nondeterministic scheduling overhead on this machine.
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
}

}  // namespace
