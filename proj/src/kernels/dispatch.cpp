#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

#if defined(__SSE__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include "relsem/kernels.hpp"

namespace relsem::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::Parallel};
}

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {
void flush_this_thread() {
#if defined(__SSE__)
  _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
  _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
}
}  // namespace

void flush_subnormals() {
  flush_this_thread();
#pragma omp parallel
  flush_this_thread();
}

#define RELSEM_DISPATCH(call) \
  (backend() == Backend::Serial ? serial::call : parallel::call)

void gemm(bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda, const float* B, int ldb,
          float beta, float* C, int ldc) {
  RELSEM_DISPATCH(gemm(ta, tb, M, N, K, alpha, A, lda, B, ldb, beta, C, ldc));
}

void gemm_batched(int G, bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda,
                  std::int64_t stride_a, const float* B, int ldb, std::int64_t stride_b, float beta, float* C,
                  int ldc, std::int64_t stride_c) {
  RELSEM_DISPATCH(
      gemm_batched(G, ta, tb, M, N, K, alpha, A, lda, stride_a, B, ldb, stride_b, beta, C, ldc, stride_c));
}

void softmax_rows(const float* x, float* y, std::int64_t rows, int cols) {
  RELSEM_DISPATCH(softmax_rows(x, y, rows, cols));
}

void softmax_rows_backward(const float* y, const float* dy, float* dx, std::int64_t rows, int cols) {
  RELSEM_DISPATCH(softmax_rows_backward(y, dy, dx, rows, cols));
}

void layernorm(const float* x, const float* gamma, const float* beta, float* y, float* mean, float* rstd,
               std::int64_t rows, int cols, float eps) {
  RELSEM_DISPATCH(layernorm(x, gamma, beta, y, mean, rstd, rows, cols, eps));
}

void layernorm_backward(const float* x, const float* gamma, const float* mean, const float* rstd, const float* dy,
                        float* dx, float* dgamma, float* dbeta, std::int64_t rows, int cols) {
  RELSEM_DISPATCH(layernorm_backward(x, gamma, mean, rstd, dy, dx, dgamma, dbeta, rows, cols));
}

void gelu(const float* x, float* y, std::int64_t n) { RELSEM_DISPATCH(gelu(x, y, n)); }

void gelu_backward(const float* x, const float* dy, float* dx, std::int64_t n) {
  RELSEM_DISPATCH(gelu_backward(x, dy, dx, n));
}

void cross_entropy(const float* logits, const std::int32_t* targets, float* probs, float* losses,
                   std::int64_t rows, int cols) {
  RELSEM_DISPATCH(cross_entropy(logits, targets, probs, losses, rows, cols));
}

void cross_entropy_backward(const float* probs, const std::int32_t* targets, const float* weights,
                            float dloss_over_norm, float* dlogits, std::int64_t rows, int cols) {
  RELSEM_DISPATCH(cross_entropy_backward(probs, targets, weights, dloss_over_norm, dlogits, rows, cols));
}

void adamw(float* w, const float* g, float* m, float* v, std::int64_t n, float lr, float beta1, float beta2,
           float eps, float weight_decay, float bc1, float bc2) {
  RELSEM_DISPATCH(adamw(w, g, m, v, n, lr, beta1, beta2, eps, weight_decay, bc1, bc2));
}

#undef RELSEM_DISPATCH

}  // namespace relsem::kernels
