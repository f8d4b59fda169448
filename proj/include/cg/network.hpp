#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cg/amd.hpp"
#include "cg/config.hpp"
#include "cg/dataset.hpp"
#include "cg/detection.hpp"
#include "cg/encoders.hpp"
#include "cg/fac.hpp"

namespace cg {

// Full grounding network: language + visual encoders, per-type decomposition
// and fusion, fine-grained attention with the memory bank, and the dense
// detection head. Architecture variants:
//   full        - everything
//   amd_only    - no fine-grained attention branch (and no aco/ace losses)
//   flat_fusion - single undecomposed fusion (K=1, C_k=C), no attention
struct GroundingModel {
  TrainConfig cfg;
  AttributeSchema schema;
  ParamStore params;

  LanguageEncoder lang;
  VisualEncoder vis;
  AttributeDecomposition amd;
  FineGrainedAttention fac;
  Conv2dLayer combine;  // 1x1 (K_fusion*C) -> C
  NormLayer combine_norm;
  DetectionHead head;
  MemoryBank bank;

  GroundingModel(const TrainConfig& cfg, const AttributeSchema& schema, int vocab_size);

  bool has_fac() const { return cfg.arch_variant == "full"; }
  int fusion_types() const { return cfg.arch_variant == "flat_fusion" ? 1 : schema.k(); }

  struct Forward {
    Var language;  // (C_q), zeros when the expression is suppressed
    struct Level {
      Var fused;                  // (C,H,W) final multi-modal map
      std::vector<Var> relation;  // per fusion type (1,H,W)
      DetectionHead::LevelOut det;
      int h = 0, w = 0;
    };
    std::vector<Level> levels;
    // fine-grained branch, finest level (empty unless arch == full)
    std::vector<FineGrainedAttention::TypeOut> types;
    int image_width = 0, image_height = 0;
  };

  // tokens may be empty: the language feature is then a zero vector
  // (expression-suppression path used by the bias harness)
  Forward forward(const Tensor& image, const std::vector<int>& tokens) const;

  std::vector<LevelGeometry> level_geometry(int image_h, int image_w) const;
};

struct LossBreakdown {
  double det = 0, aco = 0, ace = 0, total = 0;
  int aco_terms = 0, ace_terms = 0;
};

// L = w_det*(giou + focal) + w_aco*contrastive + w_ace*classification, the
// attribute terms averaged over present types. Throws when a component is
// non-finite. rng drives the triplet-variant negative pick.
Var sample_loss(const GroundingModel& model, const GroundingModel::Forward& fwd,
                const GroundingSample& sample, Rng& rng, LossBreakdown* breakdown);

// normalized pooled features of present types, for bank updates after a step
struct BankUpdate {
  int type = 0, cls = 0;
  std::vector<double> feature;
};
std::vector<BankUpdate> pending_bank_updates(const GroundingModel& model,
                                             const GroundingModel::Forward& fwd,
                                             const GroundingSample& sample);

}  // namespace cg
