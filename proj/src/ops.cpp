#include "relsem/ops.hpp"

#include <algorithm>
#include <cmath>

#include "relsem/error.hpp"
#include "relsem/kernels.hpp"

namespace relsem::ops {

namespace {

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeMismatch(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

Node* parent(Node& self, std::size_t i) { return self.parents[i].get(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  if (a.ndim() < 2 || b.ndim() != 2 || (ta && a.ndim() != 2)) mismatch("matmul", a.shape(), b.shape());
  const int K = ta ? a.dim(0) : a.dim(-1);
  const int M = static_cast<int>(a.numel() / K);
  const int bk = tb ? b.dim(1) : b.dim(0);
  const int N = tb ? b.dim(0) : b.dim(1);
  if (bk != K) mismatch("matmul", a.shape(), b.shape());
  Shape out_shape = a.shape();
  if (ta) out_shape = {M, N};
  else out_shape.back() = N;
  Tensor out = make_result(out_shape, {&a, &b});
  const int lda = ta ? M : K;
  const int ldb = tb ? K : N;
  kernels::gemm(ta, tb, M, N, K, 1.0f, a.data(), lda, b.data(), ldb, 0.0f, out.data(), N);
  if (out.requires_grad()) {
    out.node()->backward = [=](Node& self) {
      Node* A = parent(self, 0);
      Node* B = parent(self, 1);
      const float* dC = self.grad.data();
      if (A->requires_grad) {
        if (!ta)
          kernels::gemm(false, !tb, M, K, N, 1.0f, dC, N, B->value.data(), ldb, 1.0f, A->grad_data(), K);
        else
          kernels::gemm(tb, true, K, M, N, 1.0f, B->value.data(), ldb, dC, N, 1.0f, A->grad_data(), M);
      }
      if (B->requires_grad) {
        if (!tb)
          kernels::gemm(!ta, false, K, N, M, 1.0f, A->value.data(), lda, dC, N, 1.0f, B->grad_data(), N);
        else
          kernels::gemm(true, ta, N, K, M, 1.0f, dC, N, A->value.data(), lda, 1.0f, B->grad_data(), K);
      }
    };
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) mismatch("bmm", a.shape(), b.shape());
  const int G = a.dim(0);
  const int M = ta ? a.dim(2) : a.dim(1);
  const int K = ta ? a.dim(1) : a.dim(2);
  const int bk = tb ? b.dim(2) : b.dim(1);
  const int N = tb ? b.dim(1) : b.dim(2);
  if (bk != K) mismatch("bmm", a.shape(), b.shape());
  Tensor out = make_result({G, M, N}, {&a, &b});
  const int lda = a.dim(2);
  const int ldb = b.dim(2);
  const std::int64_t sa = static_cast<std::int64_t>(M) * K;
  const std::int64_t sb = static_cast<std::int64_t>(K) * N;
  const std::int64_t sc = static_cast<std::int64_t>(M) * N;
  kernels::gemm_batched(G, ta, tb, M, N, K, 1.0f, a.data(), lda, sa, b.data(), ldb, sb, 0.0f, out.data(), N, sc);
  if (out.requires_grad()) {
    out.node()->backward = [=](Node& self) {
      Node* A = parent(self, 0);
      Node* B = parent(self, 1);
      const float* dC = self.grad.data();
      if (A->requires_grad) {
        if (!ta)
          kernels::gemm_batched(G, false, !tb, M, K, N, 1.0f, dC, N, sc, B->value.data(), ldb, sb, 1.0f,
                                A->grad_data(), K, sa);
        else
          kernels::gemm_batched(G, tb, true, K, M, N, 1.0f, B->value.data(), ldb, sb, dC, N, sc, 1.0f,
                                A->grad_data(), M, sa);
      }
      if (B->requires_grad) {
        if (!tb)
          kernels::gemm_batched(G, !ta, false, K, N, M, 1.0f, A->value.data(), lda, sa, dC, N, sc, 1.0f,
                                B->grad_data(), N, sb);
        else
          kernels::gemm_batched(G, true, ta, N, K, M, 1.0f, dC, N, sc, A->value.data(), lda, sa, 1.0f,
                                B->grad_data(), K, sb);
      }
    };
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool bias = !same && b.ndim() == 1 && a.ndim() >= 1 && b.dim(0) == a.dim(-1);
  if (!same && !bias) mismatch("add", a.shape(), b.shape());
  Tensor out = make_result(a.shape(), {&a, &b});
  const std::int64_t n = a.numel();
  const int cols = bias ? b.dim(0) : 0;
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  if (same) {
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  } else {
    for (std::int64_t r = 0; r < n / cols; ++r)
      for (int c = 0; c < cols; ++c) po[r * cols + c] = pa[r * cols + c] + pb[c];
  }
  if (out.requires_grad()) {
    out.node()->backward = [same, n, cols](Node& self) {
      Node* A = parent(self, 0);
      Node* B = parent(self, 1);
      const float* g = self.grad.data();
      if (A->requires_grad) {
        float* da = A->grad_data();
        for (std::int64_t i = 0; i < n; ++i) da[i] += g[i];
      }
      if (B->requires_grad) {
        float* db = B->grad_data();
        if (same) {
          for (std::int64_t i = 0; i < n; ++i) db[i] += g[i];
        } else {
          for (std::int64_t r = 0; r < n / cols; ++r)
            for (int c = 0; c < cols; ++c) db[c] += g[r * cols + c];
        }
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("mul", a.shape(), b.shape());
  Tensor out = make_result(a.shape(), {&a, &b});
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (out.requires_grad()) {
    out.node()->backward = [n](Node& self) {
      Node* A = parent(self, 0);
      Node* B = parent(self, 1);
      const float* g = self.grad.data();
      if (A->requires_grad) {
        float* da = A->grad_data();
        for (std::int64_t i = 0; i < n; ++i) da[i] += g[i] * B->value[static_cast<std::size_t>(i)];
      }
      if (B->requires_grad) {
        float* db = B->grad_data();
        for (std::int64_t i = 0; i < n; ++i) db[i] += g[i] * A->value[static_cast<std::size_t>(i)];
      }
    };
  }
  return out;
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = make_result(a.shape(), {&a});
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
  if (out.requires_grad()) {
    out.node()->backward = [n, s](Node& self) {
      float* da = parent(self, 0)->grad_data();
      for (std::int64_t i = 0; i < n; ++i) da[i] += self.grad[static_cast<std::size_t>(i)] * s;
    };
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() < 2) mismatch("transpose", a.shape(), a.shape());
  Shape s = a.shape();
  const int R = s[s.size() - 2];
  const int C = s.back();
  std::swap(s[s.size() - 2], s.back());
  const std::int64_t G = a.numel() / (static_cast<std::int64_t>(R) * C);
  Tensor out = make_result(s, {&a});
  auto permute = [G, R, C](const float* src, float* dst, bool forward) {
    for (std::int64_t g = 0; g < G; ++g)
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) {
          const std::int64_t i = g * R * C + static_cast<std::int64_t>(r) * C + c;
          const std::int64_t j = g * R * C + static_cast<std::int64_t>(c) * R + r;
          if (forward) dst[j] = src[i];
          else dst[i] += src[j];
        }
  };
  permute(a.data(), out.data(), true);
  if (out.requires_grad())
    out.node()->backward = [permute](Node& self) { permute(self.grad.data(), parent(self, 0)->grad_data(), false); };
  return out;
}

Tensor embedding(const Tensor& weight, std::span<const std::int32_t> ids, const Shape& ids_shape) {
  if (weight.ndim() != 2 || numel(ids_shape) != static_cast<std::int64_t>(ids.size()))
    mismatch("embedding", weight.shape(), ids_shape);
  const int V = weight.dim(0);
  const int d = weight.dim(1);
  for (auto id : ids)
    if (id < 0 || id >= V)
      throw ShapeMismatch("embedding: id " + std::to_string(id) + " outside table " + shape_str(weight.shape()));
  Shape s = ids_shape;
  s.push_back(d);
  Tensor out = make_result(s, {&weight});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(weight.data() + static_cast<std::int64_t>(ids[i]) * d, d, out.data() + i * d);
  if (out.requires_grad()) {
    out.node()->backward = [idv = std::vector<std::int32_t>(ids.begin(), ids.end()), d](Node& self) {
      float* dw = parent(self, 0)->grad_data();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        float* row = dw + static_cast<std::int64_t>(idv[i]) * d;
        const float* g = self.grad.data() + i * d;
        for (int c = 0; c < d; ++c) row[c] += g[c];
      }
    };
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const int d = x.dim(-1);
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) mismatch("layer_norm", x.shape(), gamma.shape());
  const std::int64_t rows = x.numel() / d;
  Tensor out = make_result(x.shape(), {&x, &gamma, &beta});
  auto stats = std::make_shared<std::vector<float>>(static_cast<std::size_t>(rows) * 2);
  kernels::layernorm(x.data(), gamma.data(), beta.data(), out.data(), stats->data(), stats->data() + rows, rows, d,
                     eps);
  if (out.requires_grad()) {
    out.node()->backward = [stats, rows, d](Node& self) {
      Node* X = parent(self, 0);
      Node* Gm = parent(self, 1);
      Node* Bt = parent(self, 2);
      // Parameter grads are always computed; scratch buffers absorb unneeded ones.
      std::vector<float> dx_scratch, dg_scratch, db_scratch;
      float* dx = X->requires_grad ? X->grad_data() : (dx_scratch.resize(X->value.size()), dx_scratch.data());
      float* dg = Gm->requires_grad ? Gm->grad_data() : (dg_scratch.resize(d), dg_scratch.data());
      float* db = Bt->requires_grad ? Bt->grad_data() : (db_scratch.resize(d), db_scratch.data());
      kernels::layernorm_backward(X->value.data(), Gm->value.data(), stats->data(), stats->data() + rows,
                                  self.grad.data(), dx, dg, db, rows, d);
    };
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = make_result(x.shape(), {&x});
  const std::int64_t n = x.numel();
  kernels::gelu(x.data(), out.data(), n);
  if (out.requires_grad()) {
    out.node()->backward = [n](Node& self) {
      Node* X = parent(self, 0);
      kernels::gelu_backward(X->value.data(), self.grad.data(), X->grad_data(), n);
    };
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  const int cols = x.dim(-1);
  const std::int64_t rows = x.numel() / cols;
  Tensor out = make_result(x.shape(), {&x});
  kernels::softmax_rows(x.data(), out.data(), rows, cols);
  if (out.requires_grad()) {
    out.node()->backward = [rows, cols](Node& self) {
      kernels::softmax_rows_backward(self.value.data(), self.grad.data(), parent(self, 0)->grad_data(), rows, cols);
    };
  }
  return out;
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, int mask_groups, float value) {
  if (x.ndim() != 3 || mask_groups <= 0 || x.dim(0) % mask_groups != 0)
    mismatch("masked_fill", x.shape(), {mask_groups});
  const int G = x.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
  if (static_cast<std::int64_t>(mask.size()) != plane * mask_groups)
    mismatch("masked_fill", x.shape(), {mask_groups, x.dim(1), x.dim(2)});
  const int per = G / mask_groups;
  Tensor out = make_result(x.shape(), {&x});
  for (int g = 0; g < G; ++g) {
    const std::uint8_t* m = mask.data() + (g / per) * plane;
    const float* src = x.data() + g * plane;
    float* dst = out.data() + g * plane;
    for (std::int64_t i = 0; i < plane; ++i) dst[i] = m[i] ? value : src[i];
  }
  if (out.requires_grad()) {
    out.node()->backward = [mv = std::vector<std::uint8_t>(mask.begin(), mask.end()), G, per, plane](Node& self) {
      float* dx = parent(self, 0)->grad_data();
      for (int g = 0; g < G; ++g) {
        const std::uint8_t* m = mv.data() + (g / per) * plane;
        const float* gr = self.grad.data() + g * plane;
        for (std::int64_t i = 0; i < plane; ++i)
          if (!m[i]) dx[g * plane + i] += gr[i];
      }
    };
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets, std::span<const float> weights,
                     float normalizer) {
  const int V = logits.dim(-1);
  const std::int64_t rows = logits.numel() / V;
  if (static_cast<std::int64_t>(targets.size()) != rows ||
      (!weights.empty() && static_cast<std::int64_t>(weights.size()) != rows))
    mismatch("cross_entropy", logits.shape(), {static_cast<int>(targets.size())});
  if (!(normalizer > 0.0f)) throw ShapeMismatch("cross_entropy: normalizer must be positive");
  for (auto t : targets)
    if (t >= V) throw ShapeMismatch("cross_entropy: target " + std::to_string(t) + " outside vocab " +
                                    std::to_string(V));
  auto probs = std::make_shared<std::vector<float>>(static_cast<std::size_t>(logits.numel()));
  std::vector<float> losses(static_cast<std::size_t>(rows));
  kernels::cross_entropy(logits.data(), targets.data(), probs->data(), losses.data(), rows, V);
  double total = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) total += static_cast<double>(losses[r]) * (weights.empty() ? 1.0f : weights[r]);
  Tensor out = make_result({1}, {&logits});
  out.data()[0] = static_cast<float>(total / normalizer);
  if (out.requires_grad()) {
    out.node()->backward = [probs, tv = std::vector<std::int32_t>(targets.begin(), targets.end()),
                            wv = std::vector<float>(weights.begin(), weights.end()), normalizer, rows,
                            V](Node& self) {
      kernels::cross_entropy_backward(probs->data(), tv.data(), wv.empty() ? nullptr : wv.data(),
                                      self.grad[0] / normalizer, parent(self, 0)->grad_data(), rows, V);
    };
  }
  return out;
}

Tensor dropout(const Tensor& x, float p, Rng& rng) {
  if (p <= 0.0f) return x;
  if (p >= 1.0f) throw ShapeMismatch("dropout: p must be < 1");
  const std::int64_t n = x.numel();
  auto keep = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n));
  const float s = 1.0f / (1.0f - p);
  for (auto& k : *keep) k = rng.bernoulli(p) ? 0.0f : s;
  Tensor out = make_result(x.shape(), {&x});
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * (*keep)[static_cast<std::size_t>(i)];
  if (out.requires_grad()) {
    out.node()->backward = [keep, n](Node& self) {
      float* dx = parent(self, 0)->grad_data();
      for (std::int64_t i = 0; i < n; ++i) dx[i] += self.grad[static_cast<std::size_t>(i)] * (*keep)[static_cast<std::size_t>(i)];
    };
  }
  return out;
}

namespace {

// Index of x[b, t, h*dh + j] inside the split layout [(b*H + h), t, j].
template <bool kSplit>
void head_permute(const float* src, float* dst, int B, int T, int H, int dh, bool accumulate) {
  const int d = H * dh;
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < H; ++h) {
        const std::int64_t merged = (static_cast<std::int64_t>(b) * T + t) * d + h * dh;
        const std::int64_t split = ((static_cast<std::int64_t>(b) * H + h) * T + t) * dh;
        const float* s = src + (kSplit ? merged : split);
        float* o = dst + (kSplit ? split : merged);
        if (accumulate)
          for (int j = 0; j < dh; ++j) o[j] += s[j];
        else
          std::copy_n(s, dh, o);
      }
}

}  // namespace

Tensor split_heads(const Tensor& x, int heads) {
  if (x.ndim() != 3 || heads <= 0 || x.dim(2) % heads != 0) mismatch("split_heads", x.shape(), {heads});
  const int B = x.dim(0), T = x.dim(1), dh = x.dim(2) / heads;
  Tensor out = make_result({B * heads, T, dh}, {&x});
  head_permute<true>(x.data(), out.data(), B, T, heads, dh, false);
  if (out.requires_grad()) {
    out.node()->backward = [=](Node& self) {
      head_permute<false>(self.grad.data(), parent(self, 0)->grad_data(), B, T, heads, dh, true);
    };
  }
  return out;
}

Tensor merge_heads(const Tensor& x, int heads) {
  if (x.ndim() != 3 || heads <= 0 || x.dim(0) % heads != 0) mismatch("merge_heads", x.shape(), {heads});
  const int B = x.dim(0) / heads, T = x.dim(1), dh = x.dim(2);
  Tensor out = make_result({B, T, heads * dh}, {&x});
  head_permute<false>(x.data(), out.data(), B, T, heads, dh, false);
  if (out.requires_grad()) {
    out.node()->backward = [=](Node& self) {
      head_permute<true>(self.grad.data(), parent(self, 0)->grad_data(), B, T, heads, dh, true);
    };
  }
  return out;
}

Tensor slice_last(const Tensor& x, int start, int len) {
  const int d = x.dim(-1);
  if (start < 0 || len < 0 || start + len > d) mismatch("slice_last", x.shape(), {start, len});
  Shape s = x.shape();
  s.back() = len;
  const std::int64_t rows = x.numel() / d;
  Tensor out = make_result(s, {&x});
  for (std::int64_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * d + start, len, out.data() + r * len);
  if (out.requires_grad()) {
    out.node()->backward = [=](Node& self) {
      float* dx = parent(self, 0)->grad_data();
      for (std::int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < len; ++c) dx[r * d + start + c] += self.grad[static_cast<std::size_t>(r * len + c)];
    };
  }
  return out;
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_last: no inputs");
  Shape s = parts[0].shape();
  const std::int64_t rows = parts[0].numel() / parts[0].dim(-1);
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    Shape lead = p.shape();
    lead.pop_back();
    Shape lead0 = s;
    lead0.pop_back();
    if (lead != lead0) mismatch("concat_last", s, p.shape());
    widths.push_back(p.dim(-1));
    total += p.dim(-1);
  }
  s.back() = total;
  auto out_node = std::make_shared<Node>();
  out_node->shape = s;
  out_node->value.assign(static_cast<std::size_t>(numel(s)), 0.0f);
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  needs = needs && grad_enabled();
  int offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (std::int64_t r = 0; r < rows; ++r)
      std::copy_n(parts[i].data() + r * widths[i], widths[i], out_node->value.data() + r * total + offset);
    offset += widths[i];
    if (needs) out_node->parents.push_back(parts[i].node_ptr());
  }
  out_node->requires_grad = needs;
  if (needs) {
    out_node->backward = [widths, rows, total](Node& self) {
      int off = 0;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        Node* P = parent(self, i);
        if (P->requires_grad) {
          float* dp = P->grad_data();
          for (std::int64_t r = 0; r < rows; ++r)
            for (int c = 0; c < widths[i]; ++c)
              dp[r * widths[i] + c] += self.grad[static_cast<std::size_t>(r * total + off + c)];
        }
        off += widths[i];
      }
    };
  }
  return Tensor(std::move(out_node));
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> rows) {
  const int d = x.dim(-1);
  const std::int64_t R = x.numel() / d;
  for (auto r : rows)
    if (r < 0 || r >= R) throw ShapeMismatch("gather_rows: row " + std::to_string(r) + " outside " + shape_str(x.shape()));
  Tensor out = make_result({static_cast<int>(rows.size()), d}, {&x});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(x.data() + rows[i] * d, d, out.data() + i * d);
  if (out.requires_grad()) {
    out.node()->backward = [rv = std::vector<std::int64_t>(rows.begin(), rows.end()), d](Node& self) {
      float* dx = parent(self, 0)->grad_data();
      for (std::size_t i = 0; i < rv.size(); ++i)
        for (int c = 0; c < d; ++c) dx[rv[i] * d + c] += self.grad[i * d + c];
    };
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = make_result({1}, {&x});
  double s = 0.0;
  for (float v : x.values()) s += v;
  out.data()[0] = static_cast<float>(s);
  if (out.requires_grad()) {
    out.node()->backward = [](Node& self) {
      Node* X = parent(self, 0);
      float* dx = X->grad_data();
      for (std::size_t i = 0; i < X->value.size(); ++i) dx[i] += self.grad[0];
    };
  }
  return out;
}

}  // namespace relsem::ops
