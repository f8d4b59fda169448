#include "cg/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cg/train.hpp"

namespace cg {

namespace fs = std::filesystem;

namespace {

// nearest-neighbour upsample of an (h,w) map to image resolution, then blend
ImageU8 overlay(const ImageU8& base, const std::vector<double>& map, int mh, int mw) {
  double peak = 0;
  for (double v : map) peak = std::max(peak, v);
  if (peak <= 0) peak = 1;

  ImageU8 out(base.width, base.height);
  for (int y = 0; y < base.height; ++y) {
    const int my = std::min(mh - 1, y * mh / base.height);
    for (int x = 0; x < base.width; ++x) {
      const int mx = std::min(mw - 1, x * mw / base.width);
      const double v = map[static_cast<size_t>(my) * mw + mx] / peak;
      const Rgb heat = heat_color(v);
      const uint8_t* src = base.at(x, y);
      uint8_t* dst = out.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double blended = 0.45 * (src[c] / 255.0) + 0.55 * heat[c];
        dst[c] = static_cast<uint8_t>(std::lround(std::clamp(blended, 0.0, 1.0) * 255));
      }
    }
  }
  return out;
}

std::string safe_name(std::string s) {
  for (auto& c : s)
    if (c == '/' || c == ' ') c = '_';
  return s;
}

}  // namespace

int dump_attention(const GroundingModel& model, const Dataset& data,
                   const GroundingSample& sample, const Vocabulary& vocab,
                   const std::string& out_dir) {
  check(model.has_fac(), "attention dump requires the full architecture");
  fs::create_directories(out_dir);

  NoGrad guard;
  const Lexicon lex = lexicon_from_schema(model.schema);
  const auto tokens = tokens_for_mode(sample, model.cfg.expr_mode, lex, vocab);
  const ImageU8& img = data.image(sample.image_id);
  auto fwd = model.forward(img.to_tensor(), tokens);

  int files = 0;
  const auto& schema = model.schema;

  // per-class attention maps, finest level
  const int h0 = fwd.levels[0].h, w0 = fwd.levels[0].w;
  for (int k = 0; k < schema.k(); ++k) {
    const auto& att = fwd.types[k].attention->value;  // (N, h0*w0)
    for (int n = 0; n < schema.num_classes(k); ++n) {
      std::vector<double> map(att.data.begin() + static_cast<int64_t>(n) * h0 * w0,
                              att.data.begin() + static_cast<int64_t>(n + 1) * h0 * w0);
      const std::string file = "attn_" + safe_name(schema.types[k].name) + "_" +
                               safe_name(schema.types[k].classes[n]) + ".ppm";
      write_ppm(overlay(img, map, h0, w0), (fs::path(out_dir) / file).string());
      ++files;
    }
  }

  // relation maps averaged over levels (upsampled to the finest grid)
  for (int k = 0; k < static_cast<int>(fwd.levels[0].relation.size()); ++k) {
    std::vector<double> acc(static_cast<size_t>(h0) * w0, 0.0);
    for (const auto& lvl : fwd.levels) {
      const auto& rel = lvl.relation[k]->value;  // (1,h,w)
      for (int y = 0; y < h0; ++y)
        for (int x = 0; x < w0; ++x) {
          const int sy = std::min(lvl.h - 1, y * lvl.h / h0);
          const int sx = std::min(lvl.w - 1, x * lvl.w / w0);
          acc[static_cast<size_t>(y) * w0 + x] +=
              rel[static_cast<int64_t>(sy) * lvl.w + sx] / fwd.levels.size();
        }
    }
    const std::string type_name =
        model.fusion_types() == schema.k() ? schema.types[k].name : "fused";
    write_ppm(overlay(img, acc, h0, w0),
              (fs::path(out_dir) / ("rel_" + safe_name(type_name) + ".ppm")).string());
    ++files;
  }
  return files;
}

}  // namespace cg
