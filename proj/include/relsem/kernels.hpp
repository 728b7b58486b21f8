#pragma once

#include <cstdint>

// Dense float kernels. `serial` holds straightforward reference loops used as
// test oracles; `parallel` holds the blocked, OpenMP-threaded versions. Both
// produce results independent of the thread count. The unqualified entry
// points dispatch on the process-wide backend.
namespace relsem::kernels {

enum class Backend { Serial, Parallel };

void set_backend(Backend b);
Backend backend();

/// RAII backend switch for tests and benchmarks.
class BackendScope {
 public:
  explicit BackendScope(Backend b) : previous_(backend()) { set_backend(b); }
  ~BackendScope() { set_backend(previous_); }
  BackendScope(const BackendScope&) = delete;
  BackendScope& operator=(const BackendScope&) = delete;

 private:
  Backend previous_;
};

// Row-major C[M,N] = alpha * op(A) * op(B) + beta * C, where op(A) is [M,K]
// and op(B) is [K,N]; ta/tb select the transposed layout of the stored matrix.
#define RELSEM_KERNEL_DECLS                                                                        \
  void gemm(bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda,         \
            const float* B, int ldb, float beta, float* C, int ldc);                             \
  /* G independent gemms with fixed strides between consecutive matrices. */                     \
  void gemm_batched(int G, bool ta, bool tb, int M, int N, int K, float alpha, const float* A,   \
                    int lda, std::int64_t stride_a, const float* B, int ldb, std::int64_t stride_b, \
                    float beta, float* C, int ldc, std::int64_t stride_c);                       \
  void softmax_rows(const float* x, float* y, std::int64_t rows, int cols);                      \
  /* dx = y * (dy - sum(dy * y)), accumulated into dx. */                                        \
  void softmax_rows_backward(const float* y, const float* dy, float* dx, std::int64_t rows, int cols); \
  void layernorm(const float* x, const float* gamma, const float* beta, float* y, float* mean,   \
                 float* rstd, std::int64_t rows, int cols, float eps);                           \
  /* Accumulates into dx, dgamma, dbeta. */                                                      \
  void layernorm_backward(const float* x, const float* gamma, const float* mean, const float* rstd, \
                          const float* dy, float* dx, float* dgamma, float* dbeta, std::int64_t rows, \
                          int cols);                                                             \
  void gelu(const float* x, float* y, std::int64_t n);                                           \
  void gelu_backward(const float* x, const float* dy, float* dx, std::int64_t n);                \
  /* Per-row loss = -log softmax(logits)[target]; probs receives the softmax. */                 \
  void cross_entropy(const float* logits, const std::int32_t* targets, float* probs, float* losses, \
                     std::int64_t rows, int cols);                                               \
  /* dlogits += scale_i * (probs - onehot(target)) with scale_i = dloss * w_i / normalizer. */   \
  void cross_entropy_backward(const float* probs, const std::int32_t* targets, const float* weights, \
                              float dloss_over_norm, float* dlogits, std::int64_t rows, int cols); \
  /* Decoupled-decay AdamW; bc1/bc2 are the bias corrections 1-beta^t. */                        \
  void adamw(float* w, const float* g, float* m, float* v, std::int64_t n, float lr, float beta1, \
             float beta2, float eps, float weight_decay, float bc1, float bc2);

namespace serial {
RELSEM_KERNEL_DECLS
}
namespace parallel {
RELSEM_KERNEL_DECLS
}
RELSEM_KERNEL_DECLS

#undef RELSEM_KERNEL_DECLS

/// Threads OpenMP will use for parallel regions (1 without OpenMP).
int max_threads();

/// Sets flush-to-zero and denormals-are-zero on the calling thread and every
/// OpenMP worker. Subnormal attention weights otherwise slow GEMMs ~20x.
void flush_subnormals();

}  // namespace relsem::kernels
