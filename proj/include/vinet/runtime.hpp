#pragma once

namespace vinet {

// Keeps freed buffers in the process heap. Every training step allocates the
// same few megabytes again, and returning them to the OS each time makes page
// faults a large share of the step. No-op outside glibc.
void tune_allocator();

}  // namespace vinet
