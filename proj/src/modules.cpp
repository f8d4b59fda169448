#include <cmath>

#include "cg/amd.hpp"
#include "cg/fac.hpp"

namespace cg {

AttributeDecomposition::AttributeDecomposition(ParamStore& ps, int k_types,
                                               const ModelConfig& cfg, Rng& rng) {
  k = k_types;
  c = cfg.c;
  c_k = cfg.c_k;
  relation_softmax = cfg.relation_softmax;
  for (int i = 0; i < k; ++i) {
    const std::string suffix = std::to_string(i);
    visual_proj.push_back(make_conv(ps, "amd.vproj." + suffix, c, c_k, 1, 1, rng));
    language_proj.push_back(make_linear(ps, "amd.lproj." + suffix, cfg.c_q, c_k, rng));
    fuse_proj.push_back(make_conv(ps, "amd.fuse." + suffix, 2 * c_k, c, 1, 1, rng));
    fuse_norm.push_back(make_norm(ps, "amd.fuse_norm." + suffix, c));
  }
}

std::vector<Var> AttributeDecomposition::language_filters(const Var& language) const {
  std::vector<Var> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(tanh_act(language_proj[i](language)));
  return out;
}

std::vector<Var> AttributeDecomposition::visual_split(const Var& level) const {
  std::vector<Var> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(visual_proj[i](level));
  return out;
}

AttributeDecomposition::Fused AttributeDecomposition::fuse_level(
    const Var& level, const std::vector<Var>& filters) const {
  const int h = level->value.shape[1], w = level->value.shape[2];
  auto splits = visual_split(level);

  std::vector<Var> scores(k);
  for (int i = 0; i < k; ++i) scores[i] = channel_dot(splits[i], filters[i]);

  Fused out;
  out.relation.resize(k);
  if (relation_softmax == "across_types") {
    // normalize over the K type scores at each location
    Var flat = reshape(concat0(scores), {k, h * w});
    Var sm = transpose2d(softmax_rows(transpose2d(flat)));  // (K,HW)
    for (int i = 0; i < k; ++i)
      out.relation[i] = reshape(slice0(sm, i, i + 1), {1, h, w});
  } else {
    for (int i = 0; i < k; ++i)
      out.relation[i] = reshape(softmax_rows(reshape(scores[i], {1, h * w})), {1, h, w});
  }

  out.fused.resize(k);
  for (int i = 0; i < k; ++i) {
    // the normalized map averages ~1/(H*W); rescale to mean one so the
    // relation-weighted branch starts at the same magnitude as the residual
    Var weighted = spatial_mul(splits[i], affine(out.relation[i], h * w, 0.0));
    out.fused[i] = fuse_norm[i](fuse_proj[i](concat0({weighted, splits[i]})));
  }
  return out;
}

void MemoryBank::init(const AttributeSchema& schema, int c, Rng& rng) {
  types.clear();
  for (int k = 0; k < schema.k(); ++k) {
    TypeBank tb;
    const int n = schema.num_classes(k);
    tb.slots = Tensor({n, c});
    for (int i = 0; i < n; ++i) {
      double sq = 0;
      for (int j = 0; j < c; ++j) {
        tb.slots.at2(i, j) = rng.normal();
        sq += tb.slots.at2(i, j) * tb.slots.at2(i, j);
      }
      const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
      for (int j = 0; j < c; ++j) tb.slots.at2(i, j) *= inv;
    }
    tb.populated.assign(n, 0);
    types.push_back(std::move(tb));
  }
}

Tensor ema_update(const Tensor& slot, const Tensor& feat, double momentum) {
  check(slot.same_shape(feat), "ema_update: shape mismatch");
  Tensor out = slot;
  double sq = 0;
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = momentum * slot[i] + (1.0 - momentum) * feat[i];
    sq += out[i] * out[i];
  }
  const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
  for (auto& v : out.data) v *= inv;
  return out;
}

void MemoryBank::update(int type, int cls, const std::vector<double>& feat) {
  auto& tb = types[type];
  const int c = tb.slots.shape[1];
  check(static_cast<int>(feat.size()) == c, "bank update: feature size mismatch");
  if (!tb.populated[cls]) {
    for (int j = 0; j < c; ++j) tb.slots.at2(cls, j) = feat[j];
    tb.populated[cls] = 1;
    return;
  }
  Tensor slot({c});
  for (int j = 0; j < c; ++j) slot[j] = tb.slots.at2(cls, j);
  Tensor f({c});
  for (int j = 0; j < c; ++j) f[j] = feat[j];
  Tensor next = ema_update(slot, f, momentum);
  for (int j = 0; j < c; ++j) tb.slots.at2(cls, j) = next[j];
}

FineGrainedAttention::FineGrainedAttention(ParamStore& ps, const AttributeSchema& schema,
                                           const ModelConfig& cfg, Rng& rng) {
  k = schema.k();
  c = cfg.c;
  for (int i = 0; i < k; ++i) {
    const int n = schema.num_classes(i);
    n_classes.push_back(n);
    const std::string suffix = std::to_string(i);
    attn_proj.push_back(make_conv(ps, "fac.attn." + suffix, c, n, 1, 1, rng));
    score_w.push_back(ps.add("fac.score." + suffix + ".w", xavier_init({n, c}, c, 1, rng)));
    score_b.push_back(ps.add("fac.score." + suffix + ".b", Tensor({n})));
  }
}

FineGrainedAttention::TypeOut FineGrainedAttention::forward_type(
    int type, const Var& fused_map) const {
  const int h = fused_map->value.shape[1], w = fused_map->value.shape[2];
  const int n = n_classes[type];

  Var logits_map = attn_proj[type](fused_map);                 // (N,H,W)
  Var attention = softmax_rows(reshape(logits_map, {n, h * w}));
  Var flat = reshape(fused_map, {c, h * w});
  Var pooled = matmul(attention, flat, false, true);           // (N,C)

  TypeOut out;
  out.attention = attention;
  out.pooled = pooled;
  out.logits = add(rowwise_dot(score_w[type], pooled), score_b[type]);
  out.probs = reshape(softmax_rows(reshape(out.logits, {1, n})), {n});
  return out;
}

ContrastVariant contrast_variant_from_string(const std::string& name) {
  if (name == "aco") return ContrastVariant::kBankSoftmax;
  if (name == "triplet") return ContrastVariant::kTriplet;
  if (name == "moco_all") return ContrastVariant::kAllBankNegatives;
  if (name == "aco_no_bank") return ContrastVariant::kNoBank;
  throw Error("unknown contrastive variant: " + name);
}

Var contrastive_loss(const Var& pooled, int label, const MemoryBank& bank, int type,
                     ContrastVariant variant, double triplet_margin, Rng& rng) {
  const int n = pooled->value.shape[0];
  if (n <= 1) return nullptr;  // no negatives to push away
  check(label >= 0 && label < n, "contrastive_loss: label out of range");
  const auto& tb = bank.types[type];
  const double tau = bank.temperature;

  const bool needs_bank = variant != ContrastVariant::kNoBank;
  if (needs_bank && !tb.populated[label]) return nullptr;  // warm-up

  Var anchor = l2_normalize(row(pooled, label));

  auto bank_slot = [&](int cls) {
    const int c = tb.slots.shape[1];
    Tensor t({c});
    for (int j = 0; j < c; ++j) t[j] = tb.slots.at2(cls, j);
    return constant(std::move(t));
  };

  Var positive;
  if (variant == ContrastVariant::kNoBank)
    positive = dot(anchor, anchor);
  else
    positive = dot(anchor, bank_slot(label));

  if (variant == ContrastVariant::kTriplet) {
    std::vector<int> negatives;
    for (int i = 0; i < n; ++i)
      if (i != label) negatives.push_back(i);
    const int pick_idx = negatives[rng.uniform_int(0, static_cast<int>(negatives.size()) - 1)];
    Var neg = dot(anchor, l2_normalize(row(pooled, pick_idx)));
    return relu(add(affine(positive, -1.0, triplet_margin), neg));
  }

  std::vector<Var> sims{affine(positive, 1.0 / tau, 0.0)};
  for (int i = 0; i < n; ++i) {
    if (i == label) continue;
    Var neg;
    if (variant == ContrastVariant::kAllBankNegatives)
      neg = dot(anchor, bank_slot(i));
    else
      neg = dot(anchor, l2_normalize(row(pooled, i)));
    sims.push_back(affine(neg, 1.0 / tau, 0.0));
  }
  Var all = concat0(sims);
  return sub(logsumexp(all), pick(all, 0));
}

Var classification_loss(const Var& logits, int label, double weight) {
  check(label >= 0 && label < logits->value.shape[0],
        "classification_loss: label out of range");
  Var ce = sub(logsumexp(logits), pick(logits, label));
  return affine(ce, weight, 0.0);
}

Var soft_attribute_feature(const Var& probs, const Var& pooled) {
  const int n = pooled->value.shape[0], c = pooled->value.shape[1];
  return reshape(matmul(reshape(probs, {1, n}), pooled), {c});
}

Var apply_soft_gate(const Var& fused_map, const Var& blended_feature) {
  return add(channel_mul(fused_map, sigmoid(blended_feature)), fused_map);
}

}  // namespace cg
