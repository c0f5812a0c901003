#include "koop/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace koop {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }

int thread_count() { return g_threads.load(); }

void for_each_chunk(Index total, Index chunk_size,
                    const std::function<void(Index, Index, Index)>& fn) {
  if (total <= 0) return;
  if (chunk_size <= 0) throw InvalidInput("for_each_chunk: chunk_size must be positive");

  const Index n_chunks = (total + chunk_size - 1) / chunk_size;
  const int workers = std::min<Index>(thread_count(), n_chunks);

  if (workers <= 1) {
    for (Index c = 0; c < n_chunks; ++c) {
      const Index begin = c * chunk_size;
      fn(c, begin, std::min(begin + chunk_size, total));
    }
    return;
  }

  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const Index c = next.fetch_add(1);
      if (c >= n_chunks) return;
      const Index begin = c * chunk_size;
      try {
        fn(c, begin, std::min(begin + chunk_size, total));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  if (first_error) std::rethrow_exception(first_error);
}

Matrix gemm_cols(const Matrix& A, const Matrix& B) {
  if (A.cols() != B.rows()) throw InvalidInput("gemm_cols: inner dimensions disagree");
  Matrix C(A.rows(), B.cols());
  for_each_chunk(B.cols(), kDefaultChunk, [&](Index, Index b, Index e) {
    C.middleCols(b, e - b).noalias() = A * B.middleCols(b, e - b);
  });
  return C;
}

Matrix gemm_abt(const Matrix& A, const Matrix& B) {
  if (A.cols() != B.cols()) throw InvalidInput("gemm_abt: shared dimensions disagree");
  const Index total = A.cols();
  const Index n_chunks = std::max<Index>(1, (total + kDefaultChunk - 1) / kDefaultChunk);

  std::vector<Matrix> partial(static_cast<std::size_t>(n_chunks));
  for_each_chunk(total, kDefaultChunk, [&](Index c, Index b, Index e) {
    Matrix& p = partial[static_cast<std::size_t>(c)];
    p.setZero(A.rows(), B.rows());
    p.noalias() = A.middleCols(b, e - b) * B.middleCols(b, e - b).transpose();
  });

  Matrix C = Matrix::Zero(A.rows(), B.rows());
  for (const Matrix& p : partial)
    if (p.size() > 0) C += p;
  return C;
}

}  // namespace koop
