#include <cmath>

#include "cg/encoders.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace cg;

namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.embed_dim = 4;
  m.c_q = 8;
  m.channels = {4, 4, 6, 6};
  m.c = 6;
  m.c_k = 4;
  m.strides = {8, 16, 32};
  return m;
}

Tensor random_image(int h, int w, Rng& rng) {
  Tensor t({3, h, w});
  for (auto& v : t.data) v = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("language feature width is twice the hidden width (1024 default)") {
  ParamStore ps;
  Rng rng(3);
  ModelConfig def;  // defaults: embed 256, c_q 1024
  LanguageEncoder enc(ps, 50, def.embed_dim, def.c_q, rng);
  CHECK(enc.hidden == 512);
  Var L = enc.encode({4, 9, 2});
  CHECK(L->value.shape == std::vector<int>{1024});
  CHECK(all_finite(L->value));
}

TEST_CASE("language encoder: determinism, length-1, oov, empty") {
  ParamStore ps;
  Rng rng(4);
  LanguageEncoder enc(ps, 12, 6, 10, rng);

  Var a = enc.encode({3, 5, 7});
  Var b = enc.encode({3, 5, 7});
  CHECK(a->value.data == b->value.data);

  Var single = enc.encode({2});
  CHECK(all_finite(single->value));
  CHECK(single->value.shape == std::vector<int>{10});

  // out-of-vocabulary ids collapse onto <unk>
  Var oov = enc.encode({500});
  Var unk = enc.encode({1});
  CHECK(oov->value.data == unk->value.data);

  CHECK_THROWS_AS(enc.encode({}), Error);
}

TEST_CASE("visual encoder shapes follow ceil(image/stride)") {
  ParamStore ps;
  Rng rng(5);
  VisualEncoder enc(ps, tiny_model(), rng);

  SUBCASE("128x128 gives 16/8/4 maps") {
    Rng img_rng(6);
    auto levels = enc.encode(leaf(random_image(128, 128, img_rng), false));
    REQUIRE(levels.size() == 3);
    CHECK(levels[0].feat->value.shape == std::vector<int>{6, 16, 16});
    CHECK(levels[1].feat->value.shape == std::vector<int>{6, 8, 8});
    CHECK(levels[2].feat->value.shape == std::vector<int>{6, 4, 4});
    CHECK(levels[0].stride == 8);
    CHECK(levels[2].stride == 32);
  }
  SUBCASE("non-square 96x160") {
    Rng img_rng(7);
    auto levels = enc.encode(leaf(random_image(96, 160, img_rng), false));
    CHECK(levels[0].feat->value.shape == std::vector<int>{6, 12, 20});
    CHECK(levels[1].feat->value.shape == std::vector<int>{6, 6, 10});
    CHECK(levels[2].feat->value.shape == std::vector<int>{6, 3, 5});
  }
  SUBCASE("random sizes: ceil-division property") {
    Rng size_rng(8);
    for (int trial = 0; trial < 8; ++trial) {
      const int h = size_rng.uniform_int(33, 120);
      const int w = size_rng.uniform_int(33, 120);
      auto levels = enc.encode(leaf(random_image(h, w, size_rng), false));
      for (const auto& lvl : levels) {
        CHECK(lvl.feat->value.shape[1] == (h + lvl.stride - 1) / lvl.stride);
        CHECK(lvl.feat->value.shape[2] == (w + lvl.stride - 1) / lvl.stride);
      }
    }
  }
  SUBCASE("image smaller than the coarsest stride is a configuration error") {
    Rng img_rng(9);
    CHECK_THROWS_AS(enc.encode(leaf(random_image(16, 100, img_rng), false)), Error);
  }
}

TEST_CASE("zero image with a zero-initialized output conv yields a zero map") {
  ParamStore ps;
  Rng rng(10);
  VisualEncoder enc(ps, tiny_model(), rng);
  enc.smooth[0].w->value.fill(0.0);
  enc.smooth[0].b->value.fill(0.0);
  auto levels = enc.encode(leaf(Tensor({3, 64, 64}), false));
  for (double v : levels[0].feat->value.data) CHECK(v == 0.0);
}

TEST_CASE("encoder gradients match finite differences") {
  ParamStore ps;
  Rng rng(11);
  ModelConfig m = tiny_model();
  LanguageEncoder lang(ps, 10, m.embed_dim, m.c_q, rng);
  VisualEncoder vis(ps, m, rng);
  Rng img_rng(12);
  Tensor img = random_image(40, 40, img_rng);

  SUBCASE("language path: embedding and gate weights") {
    auto build = [&] { return sum_all(tanh_act(lang.encode({3, 7, 1, 4}))); };
    auto res = cgtest::grad_check(build, {lang.embedding, lang.wx_f, lang.wh_b, lang.b_f});
    CHECK(res.max_rel_err < 1e-4);
  }
  SUBCASE("visual path: stage and pyramid convs") {
    auto build = [&] {
      auto levels = vis.encode(leaf(img, false));
      Var s = sum_all(levels[0].feat);
      for (size_t i = 1; i < levels.size(); ++i) s = add(s, sum_all(levels[i].feat));
      return s;
    };
    auto res = cgtest::grad_check(
        build, {vis.stages[0].w, vis.stages[3].b, vis.lateral[0].w, vis.smooth[0].w});
    CHECK(res.max_rel_err < 1e-4);
  }
}
