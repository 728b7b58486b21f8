// Blocked, OpenMP-threaded kernels. Work is split over output rows (or fixed
// chunks), and every output element is reduced in the same order whatever the
// thread count, so results are reproducible across OMP_NUM_THREADS settings.
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <vector>

#include "relsem/kernels.hpp"

namespace relsem::kernels::parallel {

namespace {

using v16 = float __attribute__((vector_size(64)));

constexpr int MR = 8;
constexpr int NR = 32;
constexpr int KC = 256;
constexpr int MC = 128;
constexpr int NC = 2048;

inline float load_a(bool ta, const float* A, int lda, int i, int k) { return ta ? A[k * lda + i] : A[i * lda + k]; }
inline float load_b(bool tb, const float* B, int ldb, int k, int j) { return tb ? B[j * ldb + k] : B[k * ldb + j]; }

// A block -> MR-row panels, k-major inside a panel, zero padded.
void pack_a(bool ta, const float* A, int lda, int i0, int mc, int k0, int kc, float* out) {
  for (int p = 0; p < mc; p += MR) {
    const int rows = std::min(MR, mc - p);
    if (!ta && rows == MR) {
      for (int k = 0; k < kc; ++k)
        for (int r = 0; r < MR; ++r) *out++ = A[(i0 + p + r) * lda + k0 + k];
      continue;
    }
    for (int k = 0; k < kc; ++k)
      for (int r = 0; r < MR; ++r) *out++ = r < rows ? load_a(ta, A, lda, i0 + p + r, k0 + k) : 0.0f;
  }
}

// B block -> NR-column panels, k-major inside a panel, zero padded.
void pack_b(bool tb, const float* B, int ldb, int k0, int kc, int j0, int nc, float* out) {
  for (int p = 0; p < nc; p += NR) {
    const int cols = std::min(NR, nc - p);
    for (int k = 0; k < kc; ++k) {
      if (!tb && cols == NR) {
        std::memcpy(out, B + (k0 + k) * ldb + j0 + p, NR * sizeof(float));
        out += NR;
      } else {
        for (int c = 0; c < NR; ++c) *out++ = c < cols ? load_b(tb, B, ldb, k0 + k, j0 + p + c) : 0.0f;
      }
    }
  }
}

void micro_kernel(int kc, const float* a, const float* b, float alpha, float* C, int ldc, int rows, int cols) {
  v16 acc[MR][2] = {};
  for (int k = 0; k < kc; ++k) {
    v16 b0, b1;
    std::memcpy(&b0, b + k * NR, sizeof b0);
    std::memcpy(&b1, b + k * NR + 16, sizeof b1);
    for (int r = 0; r < MR; ++r) {
      const float av = a[k * MR + r];
      acc[r][0] += av * b0;
      acc[r][1] += av * b1;
    }
  }
  if (rows == MR && cols == NR) {
    for (int r = 0; r < MR; ++r) {
      float* c = C + r * ldc;
      v16 c0, c1;
      std::memcpy(&c0, c, sizeof c0);
      std::memcpy(&c1, c + 16, sizeof c1);
      c0 += alpha * acc[r][0];
      c1 += alpha * acc[r][1];
      std::memcpy(c, &c0, sizeof c0);
      std::memcpy(c + 16, &c1, sizeof c1);
    }
    return;
  }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) C[r * ldc + c] += alpha * acc[r][c / 16][c % 16];
}

std::vector<float>& scratch_a() {
  thread_local std::vector<float> buf;
  return buf;
}
std::vector<float>& scratch_b() {
  thread_local std::vector<float> buf;
  return buf;
}

void scale_c(int M, int N, float beta, float* C, int ldc) {
  if (beta == 1.0f) return;
  for (int i = 0; i < M; ++i) {
    float* row = C + static_cast<std::int64_t>(i) * ldc;
    if (beta == 0.0f)
      std::fill(row, row + N, 0.0f);
    else
      for (int j = 0; j < N; ++j) row[j] *= beta;
  }
}

void gemm_impl(bool threaded, bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda,
               const float* B, int ldb, float beta, float* C, int ldc) {
  scale_c(M, N, beta, C, ldc);
  if (M == 0 || N == 0 || K == 0 || alpha == 0.0f) return;
  auto& bbuf = scratch_b();
  const int n_mblocks = (M + MC - 1) / MC;
  for (int jc = 0; jc < N; jc += NC) {
    const int nc = std::min(NC, N - jc);
    const int nc_pad = (nc + NR - 1) / NR * NR;
    for (int pc = 0; pc < K; pc += KC) {
      const int kc = std::min(KC, K - pc);
      bbuf.resize(static_cast<std::size_t>(nc_pad) * kc);
      pack_b(tb, B, ldb, pc, kc, jc, nc, bbuf.data());
      const float* bp = bbuf.data();
#pragma omp parallel for schedule(static) if (threaded && n_mblocks > 1)
      for (int mb = 0; mb < n_mblocks; ++mb) {
        const int ic = mb * MC;
        const int mc = std::min(MC, M - ic);
        auto& abuf = scratch_a();
        abuf.resize(static_cast<std::size_t>((mc + MR - 1) / MR * MR) * kc);
        pack_a(ta, A, lda, ic, mc, pc, kc, abuf.data());
        for (int jr = 0; jr < nc; jr += NR) {
          const int cols = std::min(NR, nc - jr);
          for (int ir = 0; ir < mc; ir += MR) {
            const int rows = std::min(MR, mc - ir);
            micro_kernel(kc, abuf.data() + static_cast<std::size_t>(ir) * kc, bp + static_cast<std::size_t>(jr) * kc,
                         alpha, C + static_cast<std::int64_t>(ic + ir) * ldc + jc + jr, ldc, rows, cols);
          }
        }
      }
    }
  }
}

// Vectorisable exp: Cody-Waite range reduction plus a degree-6 polynomial.
inline float fast_exp(float x) {
  // Below -87 the result would be a tiny normal or subnormal; return 0 like
  // std::exp does soon after, and keep subnormals out of later products.
  const float keep = x < -87.0f ? 0.0f : 1.0f;
  x = x < -87.0f ? -87.0f : x;
  x = x > 88.0f ? 88.0f : x;
  // Round to nearest via the 1.5 * 2^23 trick; floorf is a libm call here.
  const float n = (x * 1.44269504088896341f + 12582912.0f) - 12582912.0f;
  const float r = x - n * 0.693359375f + n * 2.12194440e-4f;
  float y = 1.9875691500e-4f;
  y = y * r + 1.3981999507e-3f;
  y = y * r + 8.3334519073e-3f;
  y = y * r + 4.1665795894e-2f;
  y = y * r + 1.6666665459e-1f;
  y = y * r + 5.0000001201e-1f;
  y = y * r * r + r + 1.0f;
  const auto bits = static_cast<std::int32_t>(n + 127.0f) << 23;
  return keep * y * std::bit_cast<float>(bits);
}

inline void softmax_row(const float* x, float* y, int cols) {
  float mx = x[0];
#pragma omp simd reduction(max : mx)
  for (int c = 1; c < cols; ++c) mx = x[c] > mx ? x[c] : mx;
  for (int c = 0; c < cols; ++c) y[c] = fast_exp(x[c] - mx);
  float sum = 0.0f;
#pragma omp simd reduction(+ : sum)
  for (int c = 0; c < cols; ++c) sum += y[c];
  const float inv = 1.0f / sum;
#pragma omp simd
  for (int c = 0; c < cols; ++c) y[c] *= inv;
}

constexpr int kReduceChunks = 64;

}  // namespace

void gemm(bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda, const float* B, int ldb,
          float beta, float* C, int ldc) {
  gemm_impl(true, ta, tb, M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}

void gemm_batched(int G, bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda,
                  std::int64_t stride_a, const float* B, int ldb, std::int64_t stride_b, float beta, float* C,
                  int ldc, std::int64_t stride_c) {
  if (G >= max_threads()) {
#pragma omp parallel for schedule(static)
    for (int g = 0; g < G; ++g)
      gemm_impl(false, ta, tb, M, N, K, alpha, A + g * stride_a, lda, B + g * stride_b, ldb, beta,
                C + g * stride_c, ldc);
  } else {
    for (int g = 0; g < G; ++g)
      gemm_impl(true, ta, tb, M, N, K, alpha, A + g * stride_a, lda, B + g * stride_b, ldb, beta,
                C + g * stride_c, ldc);
  }
}

void softmax_rows(const float* x, float* y, std::int64_t rows, int cols) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows_backward(const float* y, const float* dy, float* dx, std::int64_t rows, int cols) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* yr = y + r * cols;
    const float* gr = dy + r * cols;
    float* dr = dx + r * cols;
    float dot = 0.0f;
#pragma omp simd reduction(+ : dot)
    for (int c = 0; c < cols; ++c) dot += yr[c] * gr[c];
    for (int c = 0; c < cols; ++c) dr[c] += yr[c] * (gr[c] - dot);
  }
}

void layernorm(const float* x, const float* gamma, const float* beta, float* y, float* mean, float* rstd,
               std::int64_t rows, int cols, float eps) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    float* yr = y + r * cols;
    float m = 0.0f;
#pragma omp simd reduction(+ : m)
    for (int c = 0; c < cols; ++c) m += xr[c];
    m /= static_cast<float>(cols);
    float v = 0.0f;
#pragma omp simd reduction(+ : v)
    for (int c = 0; c < cols; ++c) v += (xr[c] - m) * (xr[c] - m);
    v /= static_cast<float>(cols);
    const float s = 1.0f / std::sqrt(v + eps);
    for (int c = 0; c < cols; ++c) yr[c] = (xr[c] - m) * s * gamma[c] + beta[c];
    mean[r] = m;
    rstd[r] = s;
  }
}

void layernorm_backward(const float* x, const float* gamma, const float* mean, const float* rstd, const float* dy,
                        float* dx, float* dgamma, float* dbeta, std::int64_t rows, int cols) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    const float* gr = dy + r * cols;
    float* dr = dx + r * cols;
    float sum_g = 0.0f, sum_gx = 0.0f;
#pragma omp simd reduction(+ : sum_g, sum_gx)
    for (int c = 0; c < cols; ++c) {
      const float g = gr[c] * gamma[c];
      sum_g += g;
      sum_gx += g * (xr[c] - mean[r]) * rstd[r];
    }
    sum_g /= static_cast<float>(cols);
    sum_gx /= static_cast<float>(cols);
    for (int c = 0; c < cols; ++c) {
      const float xhat = (xr[c] - mean[r]) * rstd[r];
      dr[c] += rstd[r] * (gr[c] * gamma[c] - sum_g - xhat * sum_gx);
    }
  }
  // Parameter gradients: fixed row chunks, then an in-order reduction.
  const std::int64_t chunk = (rows + kReduceChunks - 1) / kReduceChunks;
  std::vector<float> partial(static_cast<std::size_t>(kReduceChunks) * cols * 2, 0.0f);
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < kReduceChunks; ++ch) {
    float* pg = partial.data() + static_cast<std::size_t>(ch) * cols * 2;
    float* pb = pg + cols;
    const std::int64_t end = std::min(rows, (ch + 1) * chunk);
    for (std::int64_t r = ch * chunk; r < end; ++r) {
      const float* xr = x + r * cols;
      const float* gr = dy + r * cols;
      for (int c = 0; c < cols; ++c) {
        pg[c] += gr[c] * (xr[c] - mean[r]) * rstd[r];
        pb[c] += gr[c];
      }
    }
  }
  for (int ch = 0; ch < kReduceChunks; ++ch) {
    const float* pg = partial.data() + static_cast<std::size_t>(ch) * cols * 2;
    for (int c = 0; c < cols; ++c) {
      dgamma[c] += pg[c];
      dbeta[c] += pg[cols + c];
    }
  }
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;
}

void gelu(const float* x, float* y, std::int64_t n) {
#pragma omp parallel for simd schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const float v = x[i];
    const float u = kGeluC * (v + 0.044715f * v * v * v);
    // tanh(u) = 1 - 2 / (exp(2u) + 1)
    const float t = 1.0f - 2.0f / (fast_exp(2.0f * u) + 1.0f);
    y[i] = 0.5f * v * (1.0f + t);
  }
}

void gelu_backward(const float* x, const float* dy, float* dx, std::int64_t n) {
#pragma omp parallel for simd schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const float v = x[i];
    const float u = kGeluC * (v + 0.044715f * v * v * v);
    const float t = 1.0f - 2.0f / (fast_exp(2.0f * u) + 1.0f);
    const float d = 0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * kGeluC * (1.0f + 3.0f * 0.044715f * v * v);
    dx[i] += dy[i] * d;
  }
}

void cross_entropy(const float* logits, const std::int32_t* targets, float* probs, float* losses,
                   std::int64_t rows, int cols) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* lr = logits + r * cols;
    float* pr = probs + r * cols;
    float mx = lr[0];
#pragma omp simd reduction(max : mx)
    for (int c = 1; c < cols; ++c) mx = lr[c] > mx ? lr[c] : mx;
    float sum = 0.0f;
#pragma omp simd reduction(+ : sum)
    for (int c = 0; c < cols; ++c) {
      pr[c] = fast_exp(lr[c] - mx);
      sum += pr[c];
    }
    const float inv = 1.0f / sum;
    for (int c = 0; c < cols; ++c) pr[c] *= inv;
    const std::int32_t t = targets[r];
    losses[r] = t < 0 ? 0.0f : std::log(sum) + mx - lr[t];
  }
}

void cross_entropy_backward(const float* probs, const std::int32_t* targets, const float* weights,
                            float dloss_over_norm, float* dlogits, std::int64_t rows, int cols) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int32_t t = targets[r];
    const float w = weights ? weights[r] : 1.0f;
    if (t < 0 || w == 0.0f) continue;
    const float s = dloss_over_norm * w;
    const float* pr = probs + r * cols;
    float* dr = dlogits + r * cols;
    for (int c = 0; c < cols; ++c) dr[c] += s * pr[c];
    dr[t] -= s;
  }
}

void adamw(float* w, const float* g, float* m, float* v, std::int64_t n, float lr, float beta1, float beta2,
           float eps, float weight_decay, float bc1, float bc2) {
  const float inv_bc1 = 1.0f / bc1;
  const float inv_bc2 = 1.0f / bc2;
#pragma omp parallel for simd schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    const float mhat = m[i] * inv_bc1;
    const float vhat = v[i] * inv_bc2;
    w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
  }
}

}  // namespace relsem::kernels::parallel
