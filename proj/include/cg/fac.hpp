#pragma once

#include <cstdint>
#include <vector>

#include "cg/config.hpp"
#include "cg/nn.hpp"
#include "cg/schema.hpp"

namespace cg {

// One persistent feature slot per fine-grained class, updated by exponential
// moving average after each training iteration. Slots stay unit-normalized.
struct MemoryBank {
  struct TypeBank {
    Tensor slots;  // (N_k, C)
    std::vector<uint8_t> populated;
  };

  double momentum = 0.999;
  double temperature = 0.2;
  std::vector<TypeBank> types;

  void init(const AttributeSchema& schema, int c, Rng& rng);
  bool populated(int type, int cls) const { return types[type].populated[cls] != 0; }

  // feat must be unit-normalized; the first touch seeds the slot directly,
  // later touches apply the moving average
  void update(int type, int cls, const std::vector<double>& feat);
};

// slot <- normalize(m*slot + (1-m)*feat)
Tensor ema_update(const Tensor& slot, const Tensor& feat, double momentum);

// Per-type fine-grained attention pooling plus the per-class classifier.
struct FineGrainedAttention {
  int k = 0, c = 0;
  std::vector<int> n_classes;
  std::vector<Conv2dLayer> attn_proj;    // per type, 1x1 C -> N_k
  std::vector<Var> score_w, score_b;     // per type, (N_k,C) and (N_k)

  FineGrainedAttention() = default;
  FineGrainedAttention(ParamStore& ps, const AttributeSchema& schema,
                       const ModelConfig& cfg, Rng& rng);

  struct TypeOut {
    Var attention;  // (N_k, H*W), rows normalized
    Var pooled;     // (N_k, C)
    Var logits;     // (N_k)
    Var probs;      // (N_k)
  };
  TypeOut forward_type(int type, const Var& fused_map) const;
};

enum class ContrastVariant { kBankSoftmax, kTriplet, kAllBankNegatives, kNoBank };
ContrastVariant contrast_variant_from_string(const std::string& name);

// Softmax-form contrastive loss for one attribute type: positive similarity
// against the bank slot of the true class, negatives against the sample's
// other pooled class features (variant-dependent). Returns 0 for degenerate
// types (single class) and while the positive slot is unpopulated.
Var contrastive_loss(const Var& pooled, int label, const MemoryBank& bank, int type,
                     ContrastVariant variant, double triplet_margin, Rng& rng);

// Frequency-weighted cross entropy for one type: w_l * (-log p_l).
Var classification_loss(const Var& logits, int label, double weight);

// probs-weighted blend of the pooled class features: sum_n p_n F_n -> (C)
Var soft_attribute_feature(const Var& probs, const Var& pooled);

// sigmoid(gate) * m + m, the channel-wise soft re-fusion
Var apply_soft_gate(const Var& fused_map, const Var& blended_feature);

}  // namespace cg
