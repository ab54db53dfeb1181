#pragma once

namespace trs {

// Keeps freed tensor buffers inside the process. Rollout tapes allocate and
// release many same-sized arrays per step; with default glibc settings each
// large one is a fresh mmap, and page faults dominate training time. Call
// once at program start; no-op on other C libraries.
void tune_allocator();

}  // namespace trs
