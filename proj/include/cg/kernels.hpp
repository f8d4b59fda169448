#pragma once

#include <cstdint>

namespace cg::kernels {

// Execution backend for the compute kernels. Parallel is the default; the
// serial implementations are the reference the parallel ones are tested
// against (results must match bit for bit, so training runs are reproducible
// regardless of thread count).
enum class Exec { Serial, Parallel };

Exec execution_mode();
void set_execution_mode(Exec mode);
void set_num_threads(int n);
int num_threads();

// C (M x N) = op(A) * op(B), where op transposes when the flag is set.
// A is M x K (or K x M transposed), B is K x N (or N x K transposed).
// When accumulate is false C is overwritten.
void matmul(const double* A, const double* B, double* C, int M, int N, int K,
            bool trans_a, bool trans_b, bool accumulate);

// im2col for a CxHxW image with kh x kw kernel: writes (C*kh*kw) x (Ho*Wo).
void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* col, int Ho, int Wo);

// scatter-add of a column buffer back into a CxHxW image (image must be
// zeroed by the caller when accumulation is not wanted).
void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* img, int Ho, int Wo);

// y[i] += a * x[i]
void axpy(int64_t n, double a, const double* x, double* y);

namespace serial {
void matmul(const double* A, const double* B, double* C, int M, int N, int K,
            bool trans_a, bool trans_b, bool accumulate);
void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* col, int Ho, int Wo);
void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* img, int Ho, int Wo);
void axpy(int64_t n, double a, const double* x, double* y);
}  // namespace serial

namespace parallel {
void matmul(const double* A, const double* B, double* C, int M, int N, int K,
            bool trans_a, bool trans_b, bool accumulate);
void im2col(const double* img, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* col, int Ho, int Wo);
void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, double* img, int Ho, int Wo);
void axpy(int64_t n, double a, const double* x, double* y);
}  // namespace parallel

}  // namespace cg::kernels
