#pragma once

#include <vector>

#include "cg/config.hpp"
#include "cg/geometry.hpp"
#include "cg/nn.hpp"

namespace cg {

struct LevelGeometry {
  int stride = 0, h = 0, w = 0;
};

// Dense assignment for the single referred box: positives are the locations
// inside the (optionally center-shrunk) box whose max regression distance
// falls in the level's range; a tiny box falls back to one forced positive.
struct DenseTargets {
  struct Level {
    std::vector<uint8_t> positive;  // h*w mask
    BoxRegressionTargets reg;       // positives with centers and gt corners
  };
  std::vector<Level> levels;
  int total_positives = 0;
};

DenseTargets assign_targets(const BoundingBox& target,
                            const std::vector<LevelGeometry>& levels,
                            const ModelConfig& cfg);

// location center of grid cell (x,y) at a stride
inline double location_coord(int idx, int stride) { return stride / 2.0 + idx * stride; }

// Dense per-location confidence and side distances, plus the shared towers.
struct DetectionHead {
  std::vector<Conv2dLayer> cls_tower, reg_tower;
  std::vector<NormLayer> cls_norm, reg_norm;
  Conv2dLayer cls_out, reg_out;

  DetectionHead() = default;
  DetectionHead(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  struct LevelOut {
    Var cls_logits;  // (1,H,W)
    Var reg_raw;     // (4,H,W), distances are exp(raw)*stride
    int stride = 0;
  };
  LevelOut forward_level(const Var& feat, int stride) const;
};

// Value-space outputs for decoding and dumping.
struct DetectionOutput {
  struct Level {
    Tensor confidence;  // (H,W), sigmoid applied
    Tensor distances;   // (4,H,W), exp(raw)*stride
    int stride = 0;
  };
  std::vector<Level> levels;
  int image_width = 0, image_height = 0;
};

DetectionOutput extract_output(const std::vector<DetectionHead::LevelOut>& outs,
                               int image_width, int image_height);

// argmax decode; ties break toward the lower (level, row-major location)
std::pair<BoundingBox, double> decode_top(const DetectionOutput& out);
std::vector<std::pair<BoundingBox, double>> decode_topk(const DetectionOutput& out,
                                                        int k);

}  // namespace cg
