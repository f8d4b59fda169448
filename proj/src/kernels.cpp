#include "cg/kernels.hpp"

#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cg::kernels {

namespace {
Exec g_mode = Exec::Parallel;

// Below this many multiply-adds the parallel dispatch falls back to the
// serial path; spawning a team costs more than the loop.
constexpr int64_t kParallelCutoff = 1 << 14;
}  // namespace

Exec execution_mode() { return g_mode; }
void set_execution_mode(Exec mode) { g_mode = mode; }

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

namespace detail {

// Four specialised loops so the inner index always walks contiguous memory
// where possible. The accumulation order over k is identical in every
// variant and in the parallel versions, which keeps results bit-identical.
inline void matmul_nn(const double* A, const double* B, double* C, int M,
                      int N, int K, bool accumulate, int i) {
  double* c = C + static_cast<int64_t>(i) * N;
  if (!accumulate)
    for (int j = 0; j < N; ++j) c[j] = 0.0;
  const double* a = A + static_cast<int64_t>(i) * K;
  for (int k = 0; k < K; ++k) {
    const double aik = a[k];
    const double* b = B + static_cast<int64_t>(k) * N;
    for (int j = 0; j < N; ++j) c[j] += aik * b[j];
  }
}

inline void matmul_nt(const double* A, const double* B, double* C, int M,
                      int N, int K, bool accumulate, int i) {
  double* c = C + static_cast<int64_t>(i) * N;
  const double* a = A + static_cast<int64_t>(i) * K;
  for (int j = 0; j < N; ++j) {
    const double* b = B + static_cast<int64_t>(j) * K;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) acc += a[k] * b[k];
    if (accumulate)
      c[j] += acc;
    else
      c[j] = acc;
  }
}

inline void matmul_tn(const double* A, const double* B, double* C, int M,
                      int N, int K, bool accumulate, int i) {
  double* c = C + static_cast<int64_t>(i) * N;
  if (!accumulate)
    for (int j = 0; j < N; ++j) c[j] = 0.0;
  for (int k = 0; k < K; ++k) {
    const double aik = A[static_cast<int64_t>(k) * M + i];
    const double* b = B + static_cast<int64_t>(k) * N;
    for (int j = 0; j < N; ++j) c[j] += aik * b[j];
  }
}

inline void matmul_tt(const double* A, const double* B, double* C, int M,
                      int N, int K, bool accumulate, int i) {
  double* c = C + static_cast<int64_t>(i) * N;
  for (int j = 0; j < N; ++j) {
    double acc = 0.0;
    for (int k = 0; k < K; ++k)
      acc += A[static_cast<int64_t>(k) * M + i] * B[static_cast<int64_t>(j) * K + k];
    if (accumulate)
      c[j] += acc;
    else
      c[j] = acc;
  }
}

inline void matmul_row(const double* A, const double* B, double* C, int M,
                       int N, int K, bool ta, bool tb, bool acc, int i) {
  if (!ta && !tb)
    matmul_nn(A, B, C, M, N, K, acc, i);
  else if (!ta && tb)
    matmul_nt(A, B, C, M, N, K, acc, i);
  else if (ta && !tb)
    matmul_tn(A, B, C, M, N, K, acc, i);
  else
    matmul_tt(A, B, C, M, N, K, acc, i);
}

// One input-channel slice of col2im; row-disjoint across c so the parallel
// version can split on c without synchronisation.
inline void col2im_channel(const double* col, int C, int H, int W, int kh,
                           int kw, int stride, int pad, double* img, int Ho,
                           int Wo, int c) {
  (void)C;
  const int64_t plane = static_cast<int64_t>(Ho) * Wo;
  for (int ki = 0; ki < kh; ++ki) {
    for (int kj = 0; kj < kw; ++kj) {
      const double* src = col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * plane;
      for (int ho = 0; ho < Ho; ++ho) {
        const int h = ho * stride - pad + ki;
        if (h < 0 || h >= H) continue;
        double* dst = img + (static_cast<int64_t>(c) * H + h) * W;
        const double* s = src + static_cast<int64_t>(ho) * Wo;
        for (int wo = 0; wo < Wo; ++wo) {
          const int w = wo * stride - pad + kj;
          if (w < 0 || w >= W) continue;
          dst[w] += s[wo];
        }
      }
    }
  }
}

inline void im2col_channel(const double* img, int C, int H, int W, int kh,
                           int kw, int stride, int pad, double* col, int Ho,
                           int Wo, int c) {
  (void)C;
  const int64_t plane = static_cast<int64_t>(Ho) * Wo;
  for (int ki = 0; ki < kh; ++ki) {
    for (int kj = 0; kj < kw; ++kj) {
      double* dst = col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * plane;
      for (int ho = 0; ho < Ho; ++ho) {
        const int h = ho * stride - pad + ki;
        double* d = dst + static_cast<int64_t>(ho) * Wo;
        if (h < 0 || h >= H) {
          for (int wo = 0; wo < Wo; ++wo) d[wo] = 0.0;
          continue;
        }
        const double* src = img + (static_cast<int64_t>(c) * H + h) * W;
        for (int wo = 0; wo < Wo; ++wo) {
          const int w = wo * stride - pad + kj;
          d[wo] = (w >= 0 && w < W) ? src[w] : 0.0;
        }
      }
    }
  }
}

}  // namespace detail

void matmul(const double* A, const double* B, double* C, int M, int N, int K,
            bool trans_a, bool trans_b, bool accumulate) {
  for (int i = 0; i < M; ++i)
    detail::matmul_row(A, B, C, M, N, K, trans_a, trans_b, accumulate, i);
}

void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* col, int Ho, int Wo) {
  for (int c = 0; c < C; ++c)
    detail::im2col_channel(img, C, H, W, kh, kw, stride, pad, col, Ho, Wo, c);
}

void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* img, int Ho, int Wo) {
  for (int c = 0; c < C; ++c)
    detail::col2im_channel(col, C, H, W, kh, kw, stride, pad, img, Ho, Wo, c);
}

void axpy(int64_t n, double a, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace serial

namespace parallel {

void matmul(const double* A, const double* B, double* C, int M, int N, int K,
            bool trans_a, bool trans_b, bool accumulate) {
  const int64_t work = static_cast<int64_t>(M) * N * K;
  if (work < kParallelCutoff || M == 1) {
    serial::matmul(A, B, C, M, N, K, trans_a, trans_b, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i)
    serial::detail::matmul_row(A, B, C, M, N, K, trans_a, trans_b, accumulate, i);
}

void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* col, int Ho, int Wo) {
  if (static_cast<int64_t>(C) * kh * kw * Ho * Wo < kParallelCutoff) {
    serial::im2col(img, C, H, W, kh, kw, stride, pad, col, Ho, Wo);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c)
    serial::detail::im2col_channel(img, C, H, W, kh, kw, stride, pad, col, Ho, Wo, c);
}

void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* img, int Ho, int Wo) {
  if (static_cast<int64_t>(C) * kh * kw * Ho * Wo < kParallelCutoff) {
    serial::col2im(col, C, H, W, kh, kw, stride, pad, img, Ho, Wo);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c)
    serial::detail::col2im_channel(col, C, H, W, kh, kw, stride, pad, img, Ho, Wo, c);
}

void axpy(int64_t n, double a, const double* x, double* y) {
  if (n < kParallelCutoff) {
    serial::axpy(n, a, x, y);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace parallel

void matmul(const double* A, const double* B, double* C, int M, int N, int K,
            bool trans_a, bool trans_b, bool accumulate) {
  if (g_mode == Exec::Parallel)
    parallel::matmul(A, B, C, M, N, K, trans_a, trans_b, accumulate);
  else
    serial::matmul(A, B, C, M, N, K, trans_a, trans_b, accumulate);
}

void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* col, int Ho, int Wo) {
  if (g_mode == Exec::Parallel)
    parallel::im2col(img, C, H, W, kh, kw, stride, pad, col, Ho, Wo);
  else
    serial::im2col(img, C, H, W, kh, kw, stride, pad, col, Ho, Wo);
}

void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* img, int Ho, int Wo) {
  if (g_mode == Exec::Parallel)
    parallel::col2im(col, C, H, W, kh, kw, stride, pad, img, Ho, Wo);
  else
    serial::col2im(col, C, H, W, kh, kw, stride, pad, img, Ho, Wo);
}

void axpy(int64_t n, double a, const double* x, double* y) {
  if (g_mode == Exec::Parallel)
    parallel::axpy(n, a, x, y);
  else
    serial::axpy(n, a, x, y);
}

}  // namespace cg::kernels
