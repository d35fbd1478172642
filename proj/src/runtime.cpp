#include "etsbm/runtime.hpp"

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace etsbm {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_TOP_PAD, 256 * 1024 * 1024);
#endif
}

}  // namespace etsbm
