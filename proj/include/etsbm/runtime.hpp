#pragma once

namespace etsbm {

// Keeps freed blocks in the heap instead of returning them to the OS. The
// training loops allocate and free multi-megabyte temporaries every step, and
// with glibc defaults each one costs an mmap/munmap pair. No-op elsewhere.
void tune_allocator();

}  // namespace etsbm
