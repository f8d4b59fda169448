#include "cg/encoders.hpp"

#include <algorithm>

#include "cg/dataset.hpp"

namespace cg {

LanguageEncoder::LanguageEncoder(ParamStore& ps, int vocab, int embed, int c_q,
                                 Rng& rng) {
  check(c_q % 2 == 0, "language encoder: c_q must be even");
  vocab_size = vocab;
  embed_dim = embed;
  hidden = c_q / 2;

  Tensor emb({vocab, embed});
  for (auto& v : emb.data) v = rng.normal(0, 0.1);
  embedding = ps.add("lang.embed", std::move(emb));

  auto gates = [&](const std::string& name, Var& wx, Var& wh, Var& b) {
    wx = ps.add(name + ".wx", xavier_init({4 * hidden, embed}, embed, hidden, rng));
    wh = ps.add(name + ".wh", xavier_init({4 * hidden, hidden}, hidden, hidden, rng));
    Tensor bias({4 * hidden});
    for (int i = hidden; i < 2 * hidden; ++i) bias[i] = 1.0;  // forget gate bias
    b = ps.add(name + ".b", std::move(bias));
  };
  gates("lang.fwd", wx_f, wh_f, b_f);
  gates("lang.bwd", wx_b, wh_b, b_b);
}

namespace {

Var lstm_last_hidden(const Var& emb_seq, int T, int hidden, const Var& wx, const Var& wh,
                     const Var& b, bool reverse) {
  Var h = constant(Tensor({hidden}));
  Var c = constant(Tensor({hidden}));
  for (int step = 0; step < T; ++step) {
    const int t = reverse ? T - 1 - step : step;
    Var e = row(emb_seq, t);
    Var z = add(linear(wx, e, b), linear(wh, h));
    Var i = sigmoid(slice0(z, 0, hidden));
    Var f = sigmoid(slice0(z, hidden, 2 * hidden));
    Var g = tanh_act(slice0(z, 2 * hidden, 3 * hidden));
    Var o = sigmoid(slice0(z, 3 * hidden, 4 * hidden));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh_act(c));
  }
  return h;
}

}  // namespace

Var LanguageEncoder::encode(const std::vector<int>& tokens) const {
  check(!tokens.empty(), "encode_language: empty token sequence");
  std::vector<int> ids(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i)
    ids[i] = (tokens[i] >= 0 && tokens[i] < vocab_size) ? tokens[i] : Vocabulary::kUnk;

  Var emb = embed_lookup(embedding, ids);
  const int T = static_cast<int>(ids.size());
  Var hf = lstm_last_hidden(emb, T, hidden, wx_f, wh_f, b_f, false);
  Var hb = lstm_last_hidden(emb, T, hidden, wx_b, wh_b, b_b, true);
  return concat0({hf, hb});
}

VisualEncoder::VisualEncoder(ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  strides = cfg.strides;
  c = cfg.c;
  const auto& ch = cfg.channels;
  stages.push_back(make_conv(ps, "vis.stage1", 3, ch[0], 3, 2, rng));
  stages.push_back(make_conv(ps, "vis.stage2", ch[0], ch[1], 3, 2, rng));
  stages.push_back(make_conv(ps, "vis.stage3", ch[1], ch[2], 3, 2, rng));
  stages.push_back(make_conv(ps, "vis.stage4", ch[2], ch[3], 3, 2, rng));
  stages.push_back(make_conv(ps, "vis.stage5", ch[3], ch[3], 3, 2, rng));
  const int stage_ch[5] = {ch[0], ch[1], ch[2], ch[3], ch[3]};
  for (int i = 0; i < 5; ++i)
    stage_norm.push_back(make_norm(ps, "vis.norm" + std::to_string(i + 1), stage_ch[i]));

  for (size_t i = 0; i < strides.size(); ++i) {
    int stage_idx = 0;
    for (int s = strides[i]; s > 2; s /= 2) ++stage_idx;
    lateral.push_back(make_conv(ps, "vis.lateral" + std::to_string(strides[i]),
                                stage_ch[stage_idx], c, 1, 1, rng));
  }
  for (size_t i = 0; i + 1 < strides.size(); ++i) {
    smooth.push_back(
        make_conv(ps, "vis.smooth" + std::to_string(strides[i]), c, c, 3, 1, rng));
    smooth_norm.push_back(
        make_norm(ps, "vis.smooth_norm" + std::to_string(strides[i]), c));
  }
}

std::vector<LevelFeature> VisualEncoder::encode(const Var& image) const {
  check(image->value.ndim() == 3 && image->value.shape[0] == 3,
        "encode_image: expects (3,H,W)");
  const int H = image->value.shape[1], W = image->value.shape[2];
  const int coarsest = strides.back();
  check(std::min(H, W) >= coarsest,
        "encode_image: image smaller than the coarsest stride (" +
            std::to_string(coarsest) + ")");

  // center the pixel values
  Var x = affine(image, 1.0, -0.5);
  std::vector<Var> stage_feats;
  for (size_t i = 0; i < stages.size(); ++i) {
    x = relu(stage_norm[i](stages[i](x)));
    stage_feats.push_back(x);
  }

  // laterals at the configured strides, then a top-down merge
  std::vector<Var> lat(strides.size());
  for (size_t i = 0; i < strides.size(); ++i) {
    int stage_idx = 0;
    for (int s = strides[i]; s > 2; s /= 2) ++stage_idx;
    lat[i] = lateral[i](stage_feats[stage_idx]);
  }
  std::vector<Var> merged(strides.size());
  merged.back() = lat.back();
  for (int i = static_cast<int>(strides.size()) - 2; i >= 0; --i) {
    Var up = upsample_nearest2(merged[i + 1], lat[i]->value.shape[1],
                               lat[i]->value.shape[2]);
    merged[i] = smooth_norm[i](smooth[i](add(lat[i], up)));
  }

  std::vector<LevelFeature> out;
  for (size_t i = 0; i < strides.size(); ++i)
    out.push_back({merged[i], strides[i]});
  return out;
}

}  // namespace cg
