// Times the serial reference kernels against the OpenMP implementations and
// checks that both produce identical bytes.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "cg/kernels.hpp"
#include "cg/rng.hpp"
#include "cg/tensor.hpp"

using namespace cg;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

void fill(Tensor& t, Rng& rng) {
  for (auto& v : t.data) v = rng.normal();
}

struct Row {
  std::string name;
  double serial_ms, parallel_ms;
  bool identical;
};

void print(const std::vector<Row>& rows) {
  std::printf("%-34s %12s %12s %9s %6s\n", "kernel", "serial(ms)", "parallel(ms)",
              "speedup", "equal");
  for (const auto& r : rows)
    std::printf("%-34s %12.3f %12.3f %8.2fx %6s\n", r.name.c_str(), r.serial_ms,
                r.parallel_ms, r.serial_ms / r.parallel_ms,
                r.identical ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 20;
  if (argc > 1) reps = std::atoi(argv[1]);
  std::printf("threads: %d, reps: %d\n\n", kernels::num_threads(), reps);

  Rng rng(7);
  std::vector<Row> rows;

  // matmul shapes that dominate the conv workload
  struct MM {
    int m, n, k;
  };
  for (const MM mm : {MM{48, 960, 108}, MM{64, 240, 432}, MM{256, 240, 512}}) {
    Tensor a({mm.m, mm.k}), b({mm.k, mm.n}), cs({mm.m, mm.n}), cp({mm.m, mm.n});
    fill(a, rng);
    fill(b, rng);
    Row row;
    row.name = "matmul " + std::to_string(mm.m) + "x" + std::to_string(mm.k) + "x" +
               std::to_string(mm.n);
    row.serial_ms = time_ms(
        [&] {
          kernels::serial::matmul(a.data.data(), b.data.data(), cs.data.data(), mm.m,
                                  mm.n, mm.k, false, false, false);
        },
        reps);
    row.parallel_ms = time_ms(
        [&] {
          kernels::parallel::matmul(a.data.data(), b.data.data(), cp.data.data(), mm.m,
                                    mm.n, mm.k, false, false, false);
        },
        reps);
    row.identical = cs.data == cp.data;
    rows.push_back(row);
  }

  // im2col / col2im at a backbone feature-map size
  {
    const int C = 48, H = 48, W = 80, k = 3, stride = 2, pad = 1;
    const int Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
    Tensor img({C, H, W}), col_s({C * 9, Ho * Wo}), col_p({C * 9, Ho * Wo});
    fill(img, rng);
    Row row;
    row.name = "im2col 48x48x80 k3 s2";
    row.serial_ms = time_ms(
        [&] {
          kernels::serial::im2col(img.data.data(), C, H, W, k, k, stride, pad,
                                  col_s.data.data(), Ho, Wo);
        },
        reps);
    row.parallel_ms = time_ms(
        [&] {
          kernels::parallel::im2col(img.data.data(), C, H, W, k, k, stride, pad,
                                    col_p.data.data(), Ho, Wo);
        },
        reps);
    row.identical = col_s.data == col_p.data;
    rows.push_back(row);

    Tensor back_s({C, H, W}), back_p({C, H, W});
    Row r2;
    r2.name = "col2im 48x48x80 k3 s2";
    r2.serial_ms = time_ms(
        [&] {
          back_s.fill(0.0);
          kernels::serial::col2im(col_s.data.data(), C, H, W, k, k, stride, pad,
                                  back_s.data.data(), Ho, Wo);
        },
        reps);
    r2.parallel_ms = time_ms(
        [&] {
          back_p.fill(0.0);
          kernels::parallel::col2im(col_s.data.data(), C, H, W, k, k, stride, pad,
                                    back_p.data.data(), Ho, Wo);
        },
        reps);
    r2.identical = back_s.data == back_p.data;
    rows.push_back(r2);
  }

  // axpy (gradient accumulation)
  {
    const int64_t n = 1 << 20;
    Tensor x({1 << 20}), ys({1 << 20}), yp({1 << 20});
    fill(x, rng);
    Row row;
    row.name = "axpy 1M";
    row.serial_ms = time_ms(
        [&] { kernels::serial::axpy(n, 0.5, x.data.data(), ys.data.data()); }, reps);
    row.parallel_ms = time_ms(
        [&] { kernels::parallel::axpy(n, 0.5, x.data.data(), yp.data.data()); }, reps);
    row.identical = ys.data == yp.data;
    rows.push_back(row);
  }

  print(rows);
  for (const auto& r : rows)
    if (!r.identical) {
      std::fprintf(stderr, "mismatch between serial and parallel results\n");
      return 1;
    }
  return 0;
}
