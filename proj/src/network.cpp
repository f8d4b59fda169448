#include "cg/network.hpp"

#include <cmath>

namespace cg {

GroundingModel::GroundingModel(const TrainConfig& cfg_, const AttributeSchema& schema_,
                               int vocab_size)
    : cfg(cfg_), schema(schema_) {
  cfg.validate();
  schema.validate();
  Rng rng(cfg.seed);

  lang = LanguageEncoder(params, vocab_size, cfg.model.embed_dim, cfg.model.c_q, rng);
  vis = VisualEncoder(params, cfg.model, rng);

  ModelConfig amd_cfg = cfg.model;
  if (cfg.arch_variant == "flat_fusion") amd_cfg.c_k = cfg.model.c;
  amd = AttributeDecomposition(params, fusion_types(), amd_cfg, rng);

  if (has_fac()) fac = FineGrainedAttention(params, schema, cfg.model, rng);

  combine = make_conv(params, "combine", fusion_types() * cfg.model.c, cfg.model.c, 1, 1,
                      rng);
  combine_norm = make_norm(params, "combine_norm", cfg.model.c);
  head = DetectionHead(params, cfg.model, rng);

  bank.momentum = cfg.model.bank_momentum;
  bank.temperature = cfg.model.bank_temperature;
  bank.init(schema, cfg.model.c, rng);
}

std::vector<LevelGeometry> GroundingModel::level_geometry(int image_h, int image_w) const {
  std::vector<LevelGeometry> out;
  for (int s : cfg.model.strides) {
    LevelGeometry g;
    g.stride = s;
    g.h = (image_h + s - 1) / s;
    g.w = (image_w + s - 1) / s;
    out.push_back(g);
  }
  return out;
}

GroundingModel::Forward GroundingModel::forward(const Tensor& image,
                                                const std::vector<int>& tokens) const {
  Forward fwd;
  fwd.image_height = image.shape[1];
  fwd.image_width = image.shape[2];

  fwd.language = tokens.empty() ? constant(Tensor({cfg.model.c_q}))
                                : lang.encode(tokens);

  auto levels = vis.encode(leaf(image, false));
  auto filters = amd.language_filters(fwd.language);

  // fine-grained branch reads the finest level's fused maps
  std::vector<Var> gates;  // per type (C), sigmoid applied inside apply_soft_gate
  for (size_t li = 0; li < levels.size(); ++li) {
    auto fused = amd.fuse_level(levels[li].feat, filters);
    Forward::Level lvl;
    lvl.h = levels[li].feat->value.shape[1];
    lvl.w = levels[li].feat->value.shape[2];
    lvl.relation = fused.relation;

    std::vector<Var> maps = fused.fused;
    if (has_fac()) {
      if (li == 0) {
        for (int k = 0; k < schema.k(); ++k) {
          auto t = fac.forward_type(k, maps[k]);
          gates.push_back(soft_attribute_feature(t.probs, t.pooled));
          fwd.types.push_back(std::move(t));
        }
      }
      for (int k = 0; k < schema.k(); ++k)
        maps[k] = apply_soft_gate(maps[k], gates[k]);
    }

    lvl.fused = relu(combine_norm(combine(concat0(maps))));
    lvl.det = head.forward_level(lvl.fused, levels[li].stride);
    fwd.levels.push_back(std::move(lvl));
  }
  return fwd;
}

Var sample_loss(const GroundingModel& model, const GroundingModel::Forward& fwd,
                const GroundingSample& sample, Rng& rng, LossBreakdown* breakdown) {
  const auto& cfg = model.cfg;

  std::vector<LevelGeometry> geoms;
  for (const auto& lvl : fwd.levels)
    geoms.push_back({lvl.det.stride, lvl.h, lvl.w});
  DenseTargets targets = assign_targets(sample.target, geoms, cfg.model);

  Var focal_total, giou_total;
  for (size_t li = 0; li < fwd.levels.size(); ++li) {
    Var f = focal_loss_sum(fwd.levels[li].det.cls_logits, targets.levels[li].positive,
                           cfg.model.focal_alpha, cfg.model.focal_gamma);
    focal_total = focal_total ? add(focal_total, f) : f;
    if (!targets.levels[li].reg.positions.empty()) {
      Var g = giou_loss_sum(fwd.levels[li].det.reg_raw, targets.levels[li].reg);
      giou_total = giou_total ? add(giou_total, g) : g;
    }
  }
  const double inv_pos = 1.0 / std::max(1, targets.total_positives);
  Var det = affine(focal_total, inv_pos, 0.0);
  if (giou_total) det = add(det, affine(giou_total, inv_pos, 0.0));

  Var aco, ace;
  int aco_terms = 0, ace_terms = 0;
  if (model.has_fac()) {
    const auto variant = contrast_variant_from_string(cfg.loss_variant);
    for (int k = 0; k < model.schema.k(); ++k) {
      const int label = sample.labels[k];
      if (label == kAbsent) continue;
      const auto& type_out = fwd.types[k];

      Var c = contrastive_loss(type_out.pooled, label, model.bank, k, variant,
                               cfg.model.triplet_margin, rng);
      if (c) {
        aco = aco ? add(aco, c) : c;
        ++aco_terms;
      }
      const double w = model.schema.class_weight(k, label);
      Var e = classification_loss(type_out.logits, label, w);
      ace = ace ? add(ace, e) : e;
      ++ace_terms;
    }
    if (aco) aco = affine(aco, 1.0 / aco_terms, 0.0);
    if (ace) ace = affine(ace, 1.0 / ace_terms, 0.0);
  }

  auto check_component = [](const Var& v, const char* name) {
    if (v && !std::isfinite(v->value[0]))
      throw Error(std::string("non-finite loss component: ") + name);
  };
  check_component(det, "detection");
  check_component(aco, "attribute_contrastive");
  check_component(ace, "attribute_classification");

  if (breakdown) {
    breakdown->det = det->value[0];
    breakdown->aco = aco ? aco->value[0] : 0.0;
    breakdown->ace = ace ? ace->value[0] : 0.0;
    breakdown->aco_terms = aco_terms;
    breakdown->ace_terms = ace_terms;
  }

  Var total = affine(det, cfg.w_det, 0.0);
  if (aco) total = add(total, affine(aco, cfg.w_aco, 0.0));
  if (ace) total = add(total, affine(ace, cfg.w_ace, 0.0));
  if (breakdown) breakdown->total = total->value[0];
  return total;
}

std::vector<BankUpdate> pending_bank_updates(const GroundingModel& model,
                                             const GroundingModel::Forward& fwd,
                                             const GroundingSample& sample) {
  std::vector<BankUpdate> updates;
  if (!model.has_fac()) return updates;
  for (int k = 0; k < model.schema.k(); ++k) {
    const int label = sample.labels[k];
    if (label == kAbsent) continue;
    const auto& pooled = fwd.types[k].pooled->value;
    const int c = pooled.shape[1];
    BankUpdate u;
    u.type = k;
    u.cls = label;
    u.feature.resize(c);
    double sq = 0;
    for (int j = 0; j < c; ++j) {
      u.feature[j] = pooled.at2(label, j);
      sq += u.feature[j] * u.feature[j];
    }
    const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
    for (auto& v : u.feature) v *= inv;
    updates.push_back(std::move(u));
  }
  return updates;
}

}  // namespace cg
