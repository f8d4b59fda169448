#pragma once

#include <vector>

#include "cg/config.hpp"
#include "cg/nn.hpp"

namespace cg {

// Attribute-aware decomposition + fusion. The language feature is projected
// into K per-type filters; each filter is convolved (1x1, i.e. a per-location
// inner product) with that type's visual split to form a spatial relation
// map, and the relation-weighted features are fused back to C channels.
// Parameters are shared across pyramid levels.
struct AttributeDecomposition {
  int k = 0, c = 0, c_k = 0;
  std::string relation_softmax;  // "spatial" | "across_types"
  std::vector<Conv2dLayer> visual_proj;  // per type, 1x1 C -> C_k
  std::vector<LinearLayer> language_proj;  // per type, C_q -> C_k
  std::vector<Conv2dLayer> fuse_proj;    // per type, 1x1 2*C_k -> C
  std::vector<NormLayer> fuse_norm;

  AttributeDecomposition() = default;
  AttributeDecomposition(ParamStore& ps, int k_types, const ModelConfig& cfg, Rng& rng);

  // tanh-squashed per-type language filters, each (C_k)
  std::vector<Var> language_filters(const Var& language) const;

  // per-type visual splits of one pyramid level, each (C_k,H,W)
  std::vector<Var> visual_split(const Var& level) const;

  struct Fused {
    std::vector<Var> relation;  // per type (1,H,W), normalized
    std::vector<Var> fused;     // per type (C,H,W)
  };
  Fused fuse_level(const Var& level, const std::vector<Var>& filters) const;
};

}  // namespace cg
