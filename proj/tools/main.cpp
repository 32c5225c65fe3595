#include "specalign/cli.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training and penalty evaluation allocate and free one tape arena per
  // step; keeping freed chunks resident avoids refaulting the arena every
  // update.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return specalign::cli::dispatch(argc, argv);
}
