// Reference kernels: plain loops, no blocking, no threads.
#include <cmath>
#include <numbers>

#include "relsem/kernels.hpp"

namespace relsem::kernels::serial {

void gemm(bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda, const float* B, int ldb,
          float beta, float* C, int ldc) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < K; ++k) {
        const float a = ta ? A[k * lda + i] : A[i * lda + k];
        const float b = tb ? B[j * ldb + k] : B[k * ldb + j];
        acc += a * b;
      }
      float& c = C[i * ldc + j];
      c = alpha * acc + (beta == 0.0f ? 0.0f : beta * c);
    }
  }
}

void gemm_batched(int G, bool ta, bool tb, int M, int N, int K, float alpha, const float* A, int lda,
                  std::int64_t stride_a, const float* B, int ldb, std::int64_t stride_b, float beta, float* C,
                  int ldc, std::int64_t stride_c) {
  for (int g = 0; g < G; ++g)
    gemm(ta, tb, M, N, K, alpha, A + g * stride_a, lda, B + g * stride_b, ldb, beta, C + g * stride_c, ldc);
}

void softmax_rows(const float* x, float* y, std::int64_t rows, int cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    float* yr = y + r * cols;
    float mx = xr[0];
    for (int c = 1; c < cols; ++c) mx = std::fmax(mx, xr[c]);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (int c = 0; c < cols; ++c) yr[c] = static_cast<float>(yr[c] / sum);
  }
}

void softmax_rows_backward(const float* y, const float* dy, float* dx, std::int64_t rows, int cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* yr = y + r * cols;
    const float* gr = dy + r * cols;
    double dot = 0.0;
    for (int c = 0; c < cols; ++c) dot += static_cast<double>(yr[c]) * gr[c];
    for (int c = 0; c < cols; ++c) dx[r * cols + c] += yr[c] * (gr[c] - static_cast<float>(dot));
  }
}

void layernorm(const float* x, const float* gamma, const float* beta, float* y, float* mean, float* rstd,
               std::int64_t rows, int cols, float eps) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    double m = 0.0;
    for (int c = 0; c < cols; ++c) m += xr[c];
    m /= cols;
    double v = 0.0;
    for (int c = 0; c < cols; ++c) v += (xr[c] - m) * (xr[c] - m);
    v /= cols;
    const double s = 1.0 / std::sqrt(v + eps);
    for (int c = 0; c < cols; ++c)
      y[r * cols + c] = static_cast<float>((xr[c] - m) * s) * gamma[c] + beta[c];
    mean[r] = static_cast<float>(m);
    rstd[r] = static_cast<float>(s);
  }
}

void layernorm_backward(const float* x, const float* gamma, const float* mean, const float* rstd, const float* dy,
                        float* dx, float* dgamma, float* dbeta, std::int64_t rows, int cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    const float* gr = dy + r * cols;
    double sum_g = 0.0, sum_gx = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mean[r]) * rstd[r];
      const double g = gr[c] * gamma[c];
      sum_g += g;
      sum_gx += g * xhat;
      dgamma[c] += static_cast<float>(gr[c] * xhat);
      dbeta[c] += gr[c];
    }
    sum_g /= cols;
    sum_gx /= cols;
    for (int c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mean[r]) * rstd[r];
      const double g = gr[c] * gamma[c];
      dx[r * cols + c] += static_cast<float>(rstd[r] * (g - sum_g - xhat * sum_gx));
    }
  }
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

void gelu(const float* x, float* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = x[i];
    y[i] = static_cast<float>(0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v))));
  }
}

void gelu_backward(const float* x, const float* dy, float* dx, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = x[i];
    const double t = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
    const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
    dx[i] += static_cast<float>(dy[i] * d);
  }
}

void cross_entropy(const float* logits, const std::int32_t* targets, float* probs, float* losses,
                   std::int64_t rows, int cols) {
  softmax_rows(logits, probs, rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int32_t t = targets[r];
    if (t < 0) {
      losses[r] = 0.0f;
      continue;
    }
    const float* lr = logits + r * cols;
    float mx = lr[0];
    for (int c = 1; c < cols; ++c) mx = std::fmax(mx, lr[c]);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) sum += std::exp(static_cast<double>(lr[c]) - mx);
    losses[r] = static_cast<float>(std::log(sum) + mx - lr[t]);
  }
}

void cross_entropy_backward(const float* probs, const std::int32_t* targets, const float* weights,
                            float dloss_over_norm, float* dlogits, std::int64_t rows, int cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int32_t t = targets[r];
    const float w = weights ? weights[r] : 1.0f;
    if (t < 0 || w == 0.0f) continue;
    const float s = dloss_over_norm * w;
    for (int c = 0; c < cols; ++c) dlogits[r * cols + c] += s * (probs[r * cols + c] - (c == t ? 1.0f : 0.0f));
  }
}

void adamw(float* w, const float* g, float* m, float* v, std::int64_t n, float lr, float beta1, float beta2,
           float eps, float weight_decay, float bc1, float bc2) {
  for (std::int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    const float mhat = m[i] / bc1;
    const float vhat = v[i] / bc2;
    w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
  }
}

}  // namespace relsem::kernels::serial
