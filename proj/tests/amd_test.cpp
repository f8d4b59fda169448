#include <cmath>

#include "cg/amd.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace cg;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng, double s = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0, s);
  return t;
}

ModelConfig small_cfg(int c, int c_k, int c_q) {
  ModelConfig m;
  m.c = c;
  m.c_k = c_k;
  m.c_q = c_q;
  return m;
}

}  // namespace

TEST_CASE("visual decomposition: 8 maps of 256 channels at the paper widths") {
  ParamStore ps;
  Rng rng(2);
  AttributeDecomposition amd(ps, 8, small_cfg(256, 256, 64), rng);
  Rng data_rng(3);
  Var level = leaf(randn({256, 2, 3}, data_rng), false);
  auto splits = amd.visual_split(level);
  REQUIRE(splits.size() == 8);
  for (const auto& s : splits) CHECK(s->value.shape == std::vector<int>{256, 2, 3});
}

TEST_CASE("visual decomposition: zero input with zero bias gives zero maps") {
  ParamStore ps;
  Rng rng(4);
  AttributeDecomposition amd(ps, 3, small_cfg(6, 4, 8), rng);
  auto splits = amd.visual_split(leaf(Tensor({6, 3, 3}), false));
  for (const auto& s : splits)
    for (double v : s->value.data) CHECK(v == 0.0);
}

TEST_CASE("identity-initialized projections pass the visual features through") {
  ParamStore ps;
  Rng rng(5);
  AttributeDecomposition amd(ps, 2, small_cfg(5, 5, 8), rng);
  for (int k = 0; k < 2; ++k) {
    amd.visual_proj[k].w->value.fill(0.0);
    amd.visual_proj[k].b->value.fill(0.0);
    for (int c = 0; c < 5; ++c) amd.visual_proj[k].w->value.data[c * 5 + c] = 1.0;
  }
  Rng data_rng(6);
  Tensor v = randn({5, 4, 3}, data_rng);
  auto splits = amd.visual_split(leaf(v, false));
  for (const auto& s : splits) CHECK(s->value.data == v.data);
}

TEST_CASE("language filters stay strictly inside (-1, 1)") {
  ParamStore ps;
  Rng rng(7);
  AttributeDecomposition amd(ps, 4, small_cfg(6, 5, 9), rng);
  Rng data_rng(8);
  auto filters = amd.language_filters(leaf(randn({9}, data_rng, 3.0), false));
  REQUIRE(filters.size() == 4);
  for (const auto& f : filters) {
    CHECK(f->value.shape == std::vector<int>{5});
    for (double v : f->value.data) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }

  SUBCASE("zero language and zero bias give zero filters") {
    for (int k = 0; k < 4; ++k) amd.language_proj[k].b->value.fill(0.0);
    auto zero = amd.language_filters(leaf(Tensor({9}), false));
    for (const auto& f : zero)
      for (double v : f->value.data) CHECK(v == 0.0);
  }
  SUBCASE("a large aligned row saturates toward 1") {
    amd.language_proj[0].w->value.fill(0.0);
    amd.language_proj[0].b->value.fill(0.0);
    amd.language_proj[0].w->value.at2(0, 0) = 50.0;
    Tensor e1({9});
    e1[0] = 1.0;
    auto sat = amd.language_filters(leaf(e1, false));
    CHECK(sat[0]->value[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("relation map: constant features give the uniform map") {
  ParamStore ps;
  Rng rng(9);
  AttributeDecomposition amd(ps, 2, small_cfg(4, 3, 6), rng);
  Rng data_rng(10);
  // constant over space after the 1x1 projection of a constant input
  Tensor v({4, 3, 5});
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 15; ++i) v.data[c * 15 + i] = 0.3 * (c + 1);
  auto filters = amd.language_filters(leaf(randn({6}, data_rng), false));
  auto fused = amd.fuse_level(leaf(v, false), filters);
  for (const auto& r : fused.relation)
    for (double x : r->value.data) CHECK(x == doctest::Approx(1.0 / 15).epsilon(1e-12));
}

TEST_CASE("relation map: logits differing by ln 9 give (0.1, 0.9)") {
  ParamStore ps;
  Rng rng(11);
  AttributeDecomposition amd(ps, 1, small_cfg(1, 1, 2), rng);
  // identity visual projection, unit language filter
  amd.visual_proj[0].w->value.fill(0.0);
  amd.visual_proj[0].b->value.fill(0.0);
  amd.visual_proj[0].w->value[0] = 1.0;
  amd.language_proj[0].w->value.fill(0.0);
  amd.language_proj[0].b->value.fill(0.0);
  amd.language_proj[0].b->value[0] = 20.0;  // tanh(20) ~ 1 to 4e-18

  Tensor v({1, 1, 2});
  v[0] = 0.37;
  v[1] = 0.37 + std::log(9.0);
  auto filters = amd.language_filters(leaf(Tensor({2}), false));
  auto fused = amd.fuse_level(leaf(v, false), filters);
  CHECK(fused.relation[0]->value[0] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(fused.relation[0]->value[1] == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("relation maps normalize to one for random inputs (both softmax axes)") {
  for (const char* axis : {"spatial", "across_types"}) {
    ParamStore ps;
    Rng rng(12);
    ModelConfig cfg = small_cfg(5, 4, 7);
    cfg.relation_softmax = axis;
    AttributeDecomposition amd(ps, 3, cfg, rng);
    Rng data_rng(13);
    auto filters = amd.language_filters(leaf(randn({7}, data_rng), false));
    auto fused = amd.fuse_level(leaf(randn({5, 4, 6}, data_rng), false), filters);

    if (std::string(axis) == "spatial") {
      for (const auto& r : fused.relation) {
        double sum = 0;
        for (double x : r->value.data) {
          CHECK(x >= 0.0);
          sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    } else {
      for (int i = 0; i < 24; ++i) {
        double sum = 0;
        for (const auto& r : fused.relation) sum += r->value[i];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
    for (const auto& m : fused.fused) CHECK(m->value.shape == std::vector<int>{5, 4, 6});
  }
}

TEST_CASE("fused maps depend on the language only through the filters") {
  // perturbing L inside the joint nullspace of every W_q leaves M^k unchanged
  ParamStore ps;
  Rng rng(14);
  AttributeDecomposition amd(ps, 2, small_cfg(4, 2, 6), rng);

  // stack the 2*2=4 projection rows and project a random vector off them
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < 2; ++k)
    for (int r = 0; r < 2; ++r) {
      std::vector<double> row(6);
      for (int c = 0; c < 6; ++c) row[c] = amd.language_proj[k].w->value.at2(r, c);
      rows.push_back(row);
    }
  // orthonormalize the row space, then project the perturbation off it
  std::vector<std::vector<double>> basis;
  for (auto row : rows) {
    for (const auto& b : basis) {
      double d = 0;
      for (int c = 0; c < 6; ++c) d += row[c] * b[c];
      for (int c = 0; c < 6; ++c) row[c] -= d * b[c];
    }
    double norm = 0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) continue;
    for (auto& v : row) v /= norm;
    basis.push_back(row);
  }
  Rng data_rng(15);
  std::vector<double> delta(6);
  for (auto& v : delta) v = data_rng.normal();
  for (const auto& b : basis) {
    double d = 0;
    for (int c = 0; c < 6; ++c) d += delta[c] * b[c];
    for (int c = 0; c < 6; ++c) delta[c] -= d * b[c];
  }

  Tensor L = randn({6}, data_rng);
  Tensor L2 = L;
  for (int c = 0; c < 6; ++c) L2[c] += delta[c];

  Tensor v = randn({4, 3, 4}, data_rng);
  auto f1 = amd.fuse_level(leaf(v, false), amd.language_filters(leaf(L, false)));
  auto f2 = amd.fuse_level(leaf(v, false), amd.language_filters(leaf(L2, false)));
  for (int k = 0; k < 2; ++k)
    for (int64_t i = 0; i < f1.fused[k]->value.size(); ++i)
      CHECK(f1.fused[k]->value[i] ==
            doctest::Approx(f2.fused[k]->value[i]).epsilon(1e-9));
}

TEST_CASE("fusion gradients match finite differences") {
  ParamStore ps;
  Rng rng(16);
  AttributeDecomposition amd(ps, 2, small_cfg(4, 3, 5), rng);
  Rng data_rng(17);
  auto level = leaf(randn({4, 2, 3}, data_rng));
  auto language = leaf(randn({5}, data_rng));

  auto build = [&] {
    auto fused = amd.fuse_level(level, amd.language_filters(language));
    Var s = sum_all(tanh_act(fused.fused[0]));
    return add(s, sum_all(tanh_act(fused.fused[1])));
  };
  auto res = cgtest::grad_check(build, {level, language, amd.fuse_proj[0].w,
                                        amd.language_proj[1].w, amd.visual_proj[0].w});
  CHECK(res.max_rel_err < 1e-4);
}
