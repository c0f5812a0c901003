#pragma once

#include <functional>

#include "koop/types.hpp"

namespace koop {

// Global worker count used by the chunked helpers below.  Set once at startup
// (the CLI wires --threads here); defaults to 1.
void set_thread_count(int n);
int thread_count();

// Partition [0, total) into fixed-size chunks and invoke
// fn(chunk_index, begin, end) for each, possibly concurrently.  The chunk
// layout depends only on `total` and `chunk_size`, never on the worker count,
// so callers that write disjoint outputs per chunk (or reduce the per-chunk
// partials in chunk order) get bit-identical results for any thread count.
// Exceptions from workers are rethrown on the calling thread.
void for_each_chunk(Index total, Index chunk_size,
                    const std::function<void(Index, Index, Index)>& fn);

// Default chunk width (in columns/items) used across the library.
inline constexpr Index kDefaultChunk = 2048;

// C = A * B with B (and C) processed in fixed column chunks.  Chunks write
// disjoint column blocks, so the result is independent of the thread count.
Matrix gemm_cols(const Matrix& A, const Matrix& B);

// C = A * B^T where A is m x N and B is r x N, contracting over the shared N
// dimension in fixed chunks whose partial products are summed in chunk order.
// Bitwise reproducible for any thread count.
Matrix gemm_abt(const Matrix& A, const Matrix& B);

}  // namespace koop
