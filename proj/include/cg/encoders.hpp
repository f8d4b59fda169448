#pragma once

#include <vector>

#include "cg/config.hpp"
#include "cg/nn.hpp"

namespace cg {

// Word embedding + bidirectional LSTM; the sentence feature is the
// concatenation of the last forward and last backward hidden states.
struct LanguageEncoder {
  int vocab_size = 0, embed_dim = 0, hidden = 0;
  Var embedding;
  Var wx_f, wh_f, b_f;  // forward direction gates (i,f,g,o stacked)
  Var wx_b, wh_b, b_b;

  LanguageEncoder() = default;
  LanguageEncoder(ParamStore& ps, int vocab, int embed, int c_q, Rng& rng);

  // (c_q) feature; out-of-vocabulary ids map to <unk>, empty input throws
  Var encode(const std::vector<int>& tokens) const;
};

struct LevelFeature {
  Var feat;  // (C, H, W)
  int stride = 0;
};

// Stride-2 conv stages feeding a top-down pyramid at the configured strides.
// Every conv is followed by a per-channel normalization, which keeps the
// multi-branch fusion downstream well-scaled.
struct VisualEncoder {
  std::vector<Conv2dLayer> stages;  // strides 2,4,8,16,32
  std::vector<NormLayer> stage_norm;
  std::vector<Conv2dLayer> lateral;  // per pyramid level, 1x1 to C
  std::vector<Conv2dLayer> smooth;   // 3x3 on merged levels (all but coarsest)
  std::vector<NormLayer> smooth_norm;
  std::vector<int> strides;
  int c = 0;

  VisualEncoder() = default;
  VisualEncoder(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  // image: (3, H, W) in [0,1]; H and W must be at least the coarsest stride
  std::vector<LevelFeature> encode(const Var& image) const;
};

}  // namespace cg
