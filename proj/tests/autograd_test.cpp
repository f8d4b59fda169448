#include <cmath>

#include "cg/autograd.hpp"
#include "cg/kernels.hpp"
#include "cg/rng.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace cg;
using cgtest::grad_check;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0, scale);
  return t;
}

}  // namespace

TEST_CASE("matmul matches serial reference bit for bit in parallel mode") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int M = rng.uniform_int(1, 40);
    const int N = rng.uniform_int(1, 40);
    const int K = rng.uniform_int(1, 40);
    for (bool ta : {false, true})
      for (bool tb : {false, true}) {
        Tensor A = random_tensor(ta ? std::vector<int>{K, M} : std::vector<int>{M, K}, rng);
        Tensor B = random_tensor(tb ? std::vector<int>{N, K} : std::vector<int>{K, N}, rng);
        Tensor Cs({M, N}), Cp({M, N});
        kernels::serial::matmul(A.data.data(), B.data.data(), Cs.data.data(), M, N, K,
                                ta, tb, false);
        kernels::parallel::matmul(A.data.data(), B.data.data(), Cp.data.data(), M, N, K,
                                  ta, tb, false);
        REQUIRE(Cs.data == Cp.data);
      }
  }
}

TEST_CASE("im2col/col2im serial and parallel agree exactly") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int C = rng.uniform_int(1, 8), H = rng.uniform_int(3, 20), W = rng.uniform_int(3, 20);
    const int k = 3, stride = rng.uniform_int(1, 2), pad = 1;
    const int Ho = (H + 2 * pad - k) / stride + 1;
    const int Wo = (W + 2 * pad - k) / stride + 1;
    Tensor img = random_tensor({C, H, W}, rng);
    Tensor col_s({C * k * k, Ho * Wo}), col_p({C * k * k, Ho * Wo});
    kernels::serial::im2col(img.data.data(), C, H, W, k, k, stride, pad,
                            col_s.data.data(), Ho, Wo);
    kernels::parallel::im2col(img.data.data(), C, H, W, k, k, stride, pad,
                              col_p.data.data(), Ho, Wo);
    REQUIRE(col_s.data == col_p.data);

    Tensor back_s({C, H, W}), back_p({C, H, W});
    kernels::serial::col2im(col_s.data.data(), C, H, W, k, k, stride, pad,
                            back_s.data.data(), Ho, Wo);
    kernels::parallel::col2im(col_s.data.data(), C, H, W, k, k, stride, pad,
                              back_p.data.data(), Ho, Wo);
    REQUIRE(back_s.data == back_p.data);
  }
}

TEST_CASE("conv2d output is identical in serial and parallel execution") {
  Rng rng(13);
  Tensor xv = random_tensor({8, 17, 13}, rng);
  Tensor wv = random_tensor({12, 8, 3, 3}, rng, 0.2);
  Tensor bv = random_tensor({12}, rng, 0.1);

  kernels::set_execution_mode(kernels::Exec::Serial);
  Var y_serial = conv2d(leaf(xv, false), leaf(wv, false), leaf(bv, false), 2, 1);
  kernels::set_execution_mode(kernels::Exec::Parallel);
  Var y_parallel = conv2d(leaf(xv, false), leaf(wv, false), leaf(bv, false), 2, 1);
  REQUIRE(y_serial->value.data == y_parallel->value.data);
  REQUIRE(y_serial->value.shape == std::vector<int>{12, 9, 7});
}

TEST_CASE("elementwise and reduction ops gradcheck") {
  Rng rng(21);
  auto a = leaf(random_tensor({7}, rng));
  auto b = leaf(random_tensor({7}, rng));

  SUBCASE("add/mul/tanh/sigmoid/relu chain") {
    auto build = [&] {
      return sum_all(mul(tanh_act(a), sigmoid(add(a, b))));
    };
    CHECK(grad_check(build, {a, b}).max_rel_err < 1e-6);
  }
  SUBCASE("affine + relu") {
    auto build = [&] { return sum_all(relu(affine(a, 1.7, -0.3))); };
    CHECK(grad_check(build, {a}).max_rel_err < 1e-6);
  }
  SUBCASE("dot / l2_normalize") {
    auto build = [&] { return dot(l2_normalize(a), l2_normalize(b)); };
    CHECK(grad_check(build, {a, b}).max_rel_err < 1e-6);
  }
  SUBCASE("logsumexp minus pick") {
    auto build = [&] { return sub(logsumexp(a), pick(a, 3)); };
    CHECK(grad_check(build, {a}).max_rel_err < 1e-6);
  }
  SUBCASE("concat and slice") {
    auto build = [&] {
      auto c = concat0({a, b});
      return sum_all(mul(slice0(c, 2, 9), slice0(c, 3, 10)));
    };
    CHECK(grad_check(build, {a, b}).max_rel_err < 1e-6);
  }
}

TEST_CASE("matmul gradcheck over all transpose combinations") {
  Rng rng(22);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto A = leaf(random_tensor(ta ? std::vector<int>{4, 5} : std::vector<int>{5, 4}, rng));
      auto B = leaf(random_tensor(tb ? std::vector<int>{6, 4} : std::vector<int>{4, 6}, rng));
      auto build = [&] { return sum_all(tanh_act(matmul(A, B, ta, tb))); };
      CAPTURE(ta);
      CAPTURE(tb);
      CHECK(grad_check(build, {A, B}).max_rel_err < 1e-6);
    }
}

TEST_CASE("linear and rowwise_dot gradcheck") {
  Rng rng(23);
  auto W = leaf(random_tensor({6, 5}, rng));
  auto x = leaf(random_tensor({5}, rng));
  auto bias = leaf(random_tensor({6}, rng));
  auto build = [&] { return sum_all(tanh_act(linear(W, x, bias))); };
  CHECK(grad_check(build, {W, x, bias}).max_rel_err < 1e-6);

  auto F = leaf(random_tensor({6, 5}, rng));
  auto build2 = [&] { return sum_all(sigmoid(rowwise_dot(W, F))); };
  CHECK(grad_check(build2, {W, F}).max_rel_err < 1e-6);
}

TEST_CASE("conv2d gradcheck (stride 1 and 2)") {
  Rng rng(24);
  for (int stride : {1, 2}) {
    auto x = leaf(random_tensor({3, 6, 5}, rng));
    auto w = leaf(random_tensor({4, 3, 3, 3}, rng, 0.4));
    auto b = leaf(random_tensor({4}, rng, 0.2));
    auto build = [&] { return sum_all(tanh_act(conv2d(x, w, b, stride, 1))); };
    CAPTURE(stride);
    CHECK(grad_check(build, {x, w, b}).max_rel_err < 1e-6);
  }
}

TEST_CASE("spatial ops gradcheck") {
  Rng rng(25);
  auto m = leaf(random_tensor({4, 3, 5}, rng));
  auto l = leaf(random_tensor({4}, rng));
  auto r = leaf(random_tensor({1, 3, 5}, rng));

  SUBCASE("channel_dot") {
    auto build = [&] { return sum_all(tanh_act(channel_dot(m, l))); };
    CHECK(grad_check(build, {m, l}).max_rel_err < 1e-6);
  }
  SUBCASE("spatial_mul") {
    auto build = [&] { return sum_all(tanh_act(spatial_mul(m, r))); };
    CHECK(grad_check(build, {m, r}).max_rel_err < 1e-6);
  }
  SUBCASE("channel_mul") {
    auto build = [&] { return sum_all(tanh_act(channel_mul(m, sigmoid(l)))); };
    CHECK(grad_check(build, {m, l}).max_rel_err < 1e-6);
  }
  SUBCASE("softmax_rows") {
    auto flat = [&] { return reshape(m, {4, 15}); };
    auto build = [&] { return sum_all(mul(softmax_rows(flat()), flat())); };
    CHECK(grad_check(build, {m}).max_rel_err < 1e-6);
  }
  SUBCASE("upsample_nearest2") {
    auto build = [&] { return sum_all(tanh_act(upsample_nearest2(m, 6, 10))); };
    CHECK(grad_check(build, {m}).max_rel_err < 1e-6);
  }
}

TEST_CASE("embedding lookup gradcheck") {
  Rng rng(26);
  auto table = leaf(random_tensor({9, 4}, rng));
  std::vector<int> ids{2, 7, 2, 0};
  auto build = [&] { return sum_all(tanh_act(embed_lookup(table, ids))); };
  CHECK(grad_check(build, {table}).max_rel_err < 1e-6);
}

TEST_CASE("softmax rows normalize and match closed form") {
  Rng rng(27);
  Tensor t = random_tensor({5, 12}, rng, 2.0);
  Var y = softmax_rows(leaf(t, false));
  for (int r = 0; r < 5; ++r) {
    double s = 0;
    for (int i = 0; i < 12; ++i) {
      const double v = y->value.at2(r, i);
      CHECK(v >= 0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("focal loss: closed forms and gradcheck") {
  SUBCASE("value on one positive at c=0.5") {
    // confidence one half, alpha 0.25, gamma 2
    auto z = leaf(Tensor({1, 1, 1}, {0.0}), false);
    Var loss = focal_loss_sum(z, {1}, 0.25, 2.0);
    CHECK(loss->value[0] == doctest::Approx(0.25 * 0.25 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("gamma=0 alpha=0.5 reduces to half of BCE") {
    Rng rng(28);
    Tensor z = random_tensor({1, 2, 3}, rng);
    std::vector<uint8_t> mask{1, 0, 0, 1, 0, 1};
    Var loss = focal_loss_sum(leaf(z, false), mask, 0.5, 0.0);
    double bce = 0;
    for (int i = 0; i < 6; ++i) {
      const double c = 1.0 / (1.0 + std::exp(-z[i]));
      bce += mask[i] ? -std::log(c) : -std::log(1 - c);
    }
    CHECK(loss->value[0] == doctest::Approx(0.5 * bce).epsilon(1e-10));
  }
  SUBCASE("gradcheck") {
    Rng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
      auto z = leaf(random_tensor({1, 3, 4}, rng, 1.5));
      std::vector<uint8_t> mask(12, 0);
      for (auto& m : mask) m = rng.uniform() < 0.3 ? 1 : 0;
      auto build = [&] { return focal_loss_sum(z, mask, 0.25, 2.0); };
      CHECK(grad_check(build, {z}).max_rel_err < 1e-6);
    }
  }
}

TEST_CASE("giou loss: gradcheck against finite differences") {
  Rng rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    auto raw = leaf(random_tensor({4, 3, 4}, rng, 0.5));
    BoxRegressionTargets t;
    t.stride = 4.0;
    t.gt = {3.0 + rng.uniform(), 2.0 + rng.uniform(), 9.0 + rng.uniform(),
            8.0 + rng.uniform()};
    for (int p = 0; p < 4; ++p) {
      const int pos = rng.uniform_int(0, 11);
      t.positions.push_back(pos);
      t.center_x.push_back(2.0 + (pos % 4) * 4.0);
      t.center_y.push_back(2.0 + (pos / 4) * 4.0);
    }
    auto build = [&] { return giou_loss_sum(raw, t); };
    CHECK(grad_check(build, {raw}).max_rel_err < 1e-6);
  }
}

TEST_CASE("backward accumulates across shared subgraphs") {
  auto x = leaf(Tensor({2}, {1.0, 2.0}));
  auto y = mul(x, x);           // x^2
  auto z = add(y, mul(x, x));   // 2 x^2
  backward(sum_all(z));
  CHECK(x->g()[0] == doctest::Approx(4.0));
  CHECK(x->g()[1] == doctest::Approx(8.0));
}

TEST_CASE("NoGrad skips graph construction") {
  auto x = leaf(Tensor({2}, {1.0, 2.0}));
  NoGrad guard;
  auto y = mul(x, x);
  CHECK_FALSE(y->requires_grad);
  CHECK(y->parents.empty());
}

TEST_CASE("instance_norm: standardization and gradcheck") {
  Rng rng(31);
  auto x = leaf(random_tensor({3, 4, 5}, rng, 2.0));
  auto gamma = leaf(random_tensor({3}, rng, 0.5));
  auto beta = leaf(random_tensor({3}, rng, 0.5));

  SUBCASE("unit gamma, zero beta standardizes each channel") {
    Var y = instance_norm(x, constant(Tensor::full({3}, 1.0)), constant(Tensor({3})));
    for (int c = 0; c < 3; ++c) {
      double mu = 0, var = 0;
      for (int i = 0; i < 20; ++i) mu += y->value[c * 20 + i];
      mu /= 20;
      for (int i = 0; i < 20; ++i) {
        const double d = y->value[c * 20 + i] - mu;
        var += d * d;
      }
      CHECK(std::abs(mu) < 1e-10);
      CHECK(var / 20 == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  SUBCASE("gradcheck") {
    auto build = [&] { return sum_all(tanh_act(instance_norm(x, gamma, beta))); };
    CHECK(grad_check(build, {x, gamma, beta}).max_rel_err < 1e-5);
  }
}
