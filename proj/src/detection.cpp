#include "cg/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cg {

DenseTargets assign_targets(const BoundingBox& target,
                            const std::vector<LevelGeometry>& levels,
                            const ModelConfig& cfg) {
  if (!(target.w > 0) || !(target.h > 0))
    throw Error("assign_targets: degenerate target box (w=" + std::to_string(target.w) +
                ", h=" + std::to_string(target.h) + ")");

  DenseTargets out;
  out.levels.resize(levels.size());

  const double x1 = target.x1(), y1 = target.y1(), x2 = target.x2(), y2 = target.y2();
  for (size_t li = 0; li < levels.size(); ++li) {
    const auto& lg = levels[li];
    auto& lvl = out.levels[li];
    lvl.positive.assign(static_cast<size_t>(lg.h) * lg.w, 0);
    lvl.reg.stride = lg.stride;
    lvl.reg.gt = {x1, y1, x2, y2};

    const double range_lo =
        li == 0 ? 0.0 : cfg.level_range_factor * levels[li - 1].stride;
    const double range_hi = li + 1 == levels.size()
                                ? std::numeric_limits<double>::infinity()
                                : cfg.level_range_factor * lg.stride;

    for (int y = 0; y < lg.h; ++y) {
      for (int x = 0; x < lg.w; ++x) {
        const double cx = location_coord(x, lg.stride);
        const double cy = location_coord(y, lg.stride);
        const double l = cx - x1, t = cy - y1, r = x2 - cx, b = y2 - cy;
        if (l <= 0 || t <= 0 || r <= 0 || b <= 0) continue;
        const double maxd = std::max({l, t, r, b});
        if (maxd <= range_lo || maxd > range_hi) continue;
        if (cfg.center_sampling) {
          const double rad = cfg.center_radius * lg.stride;
          if (std::abs(cx - target.cx()) > rad || std::abs(cy - target.cy()) > rad)
            continue;
        }
        lvl.positive[static_cast<size_t>(y) * lg.w + x] = 1;
        lvl.reg.positions.push_back(y * lg.w + x);
        lvl.reg.center_x.push_back(cx);
        lvl.reg.center_y.push_back(cy);
        ++out.total_positives;
      }
    }
  }

  if (out.total_positives == 0) {
    // tiny box: force the finest-level location nearest the box center
    const auto& lg = levels[0];
    auto& lvl = out.levels[0];
    const int x = std::clamp(
        static_cast<int>(std::lround((target.cx() - lg.stride / 2.0) / lg.stride)), 0,
        lg.w - 1);
    const int y = std::clamp(
        static_cast<int>(std::lround((target.cy() - lg.stride / 2.0) / lg.stride)), 0,
        lg.h - 1);
    const double cx = location_coord(x, lg.stride);
    const double cy = location_coord(y, lg.stride);
    lvl.positive[static_cast<size_t>(y) * lg.w + x] = 1;
    lvl.reg.positions.push_back(y * lg.w + x);
    lvl.reg.center_x.push_back(cx);
    lvl.reg.center_y.push_back(cy);
    // clamp distances so the encoded targets stay strictly positive
    const double eps = 0.25;
    lvl.reg.gt = {std::min(x1, cx - eps), std::min(y1, cy - eps),
                  std::max(x2, cx + eps), std::max(y2, cy + eps)};
    out.total_positives = 1;
  }
  return out;
}

DetectionHead::DetectionHead(ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  for (int i = 0; i < cfg.head_tower_convs; ++i) {
    cls_tower.push_back(
        make_conv(ps, "head.cls_tower" + std::to_string(i), cfg.c, cfg.c, 3, 1, rng));
    cls_norm.push_back(make_norm(ps, "head.cls_norm" + std::to_string(i), cfg.c));
    reg_tower.push_back(
        make_conv(ps, "head.reg_tower" + std::to_string(i), cfg.c, cfg.c, 3, 1, rng));
    reg_norm.push_back(make_norm(ps, "head.reg_norm" + std::to_string(i), cfg.c));
  }
  cls_out = make_conv(ps, "head.cls_out", cfg.c, 1, 3, 1, rng);
  reg_out = make_conv(ps, "head.reg_out", cfg.c, 4, 3, 1, rng);
  // rare-positive prior keeps early confidences low
  const double prior = 0.01;
  cls_out.b->value[0] = -std::log((1.0 - prior) / prior);
}

DetectionHead::LevelOut DetectionHead::forward_level(const Var& feat, int stride) const {
  Var c = feat, r = feat;
  for (size_t i = 0; i < cls_tower.size(); ++i) c = relu(cls_norm[i](cls_tower[i](c)));
  for (size_t i = 0; i < reg_tower.size(); ++i) r = relu(reg_norm[i](reg_tower[i](r)));
  LevelOut out;
  out.cls_logits = cls_out(c);
  out.reg_raw = reg_out(r);
  out.stride = stride;
  return out;
}

DetectionOutput extract_output(const std::vector<DetectionHead::LevelOut>& outs,
                               int image_width, int image_height) {
  DetectionOutput out;
  out.image_width = image_width;
  out.image_height = image_height;
  for (const auto& lo : outs) {
    DetectionOutput::Level lvl;
    lvl.stride = lo.stride;
    const int h = lo.cls_logits->value.shape[1], w = lo.cls_logits->value.shape[2];
    lvl.confidence = Tensor({h, w});
    for (int i = 0; i < h * w; ++i)
      lvl.confidence[i] = 1.0 / (1.0 + std::exp(-lo.cls_logits->value[i]));
    lvl.distances = Tensor({4, h, w});
    for (int i = 0; i < 4 * h * w; ++i)
      lvl.distances[i] = std::exp(lo.reg_raw->value[i]) * lo.stride;
    out.levels.push_back(std::move(lvl));
  }
  return out;
}

namespace {

BoundingBox box_at(const DetectionOutput& out, size_t li, int pos) {
  const auto& lvl = out.levels[li];
  const int w = lvl.confidence.shape[1];
  const int y = pos / w, x = pos % w;
  const double cx = location_coord(x, lvl.stride);
  const double cy = location_coord(y, lvl.stride);
  const int64_t plane = static_cast<int64_t>(lvl.confidence.shape[0]) * w;
  const double dl = lvl.distances[0 * plane + pos];
  const double dt = lvl.distances[1 * plane + pos];
  const double dr = lvl.distances[2 * plane + pos];
  const double db = lvl.distances[3 * plane + pos];
  return BoundingBox(cx - dl, cy - dt, dl + dr, dt + db)
      .clipped(out.image_width, out.image_height);
}

}  // namespace

std::pair<BoundingBox, double> decode_top(const DetectionOutput& out) {
  check(!out.levels.empty(), "decode: no levels");
  size_t best_level = 0;
  int best_pos = 0;
  double best = -1.0;
  for (size_t li = 0; li < out.levels.size(); ++li) {
    const auto& conf = out.levels[li].confidence;
    for (int64_t p = 0; p < conf.size(); ++p)
      if (conf[p] > best) {  // strict: earlier (level, position) wins ties
        best = conf[p];
        best_level = li;
        best_pos = static_cast<int>(p);
      }
  }
  return {box_at(out, best_level, best_pos), best};
}

std::vector<std::pair<BoundingBox, double>> decode_topk(const DetectionOutput& out,
                                                        int k) {
  std::vector<std::tuple<double, size_t, int>> all;  // (-conf used via stable sort)
  for (size_t li = 0; li < out.levels.size(); ++li) {
    const auto& conf = out.levels[li].confidence;
    for (int64_t p = 0; p < conf.size(); ++p)
      all.push_back({conf[p], li, static_cast<int>(p)});
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return std::get<0>(a) > std::get<0>(b);
  });
  std::vector<std::pair<BoundingBox, double>> top;
  for (int i = 0; i < k && i < static_cast<int>(all.size()); ++i)
    top.push_back({box_at(out, std::get<1>(all[i]), std::get<2>(all[i])),
                   std::get<0>(all[i])});
  return top;
}

}  // namespace cg
