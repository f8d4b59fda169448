#include "cg/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace cg {

Tensor ImageU8::to_tensor() const {
  Tensor t({3, height, width});
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const uint8_t* p = at(x, y);
      for (int c = 0; c < 3; ++c) t.at3(c, y, x) = p[c] / 255.0;
    }
  return t;
}

ImageU8 ImageU8::from_tensor(const Tensor& t) {
  check(t.ndim() == 3 && t.shape[0] == 3, "from_tensor: expects (3,H,W)");
  ImageU8 img(t.shape[2], t.shape[1]);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      uint8_t* p = img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(t.at3(c, y, x), 0.0, 1.0);
        p[c] = static_cast<uint8_t>(std::lround(v * 255.0));
      }
    }
  return img;
}

void write_ppm(const ImageU8& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), "cannot open for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  check(f.good(), "write failed: " + path);
}

ImageU8 read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open image file: " + path);
  std::string magic;
  f >> magic;
  check(magic == "P6", "unsupported image format in " + path);
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  check(w > 0 && h > 0 && maxval == 255, "bad PPM header in " + path);
  f.get();  // single whitespace after header
  ImageU8 img(w, h);
  f.read(reinterpret_cast<char*>(img.pixels.data()),
         static_cast<std::streamsize>(img.pixels.size()));
  check(f.gcount() == static_cast<std::streamsize>(img.pixels.size()),
        "truncated image file: " + path);
  return img;
}

Canvas::Canvas(int width, int height, Rgb background)
    : w_(width), h_(height), data_(static_cast<size_t>(width) * height * 3) {
  for (int y = 0; y < h_; ++y)
    for (int x = 0; x < w_; ++x)
      for (int c = 0; c < 3; ++c)
        data_[(static_cast<size_t>(y) * w_ + x) * 3 + c] = background[c];
}

void Canvas::put(int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  double* p = data_.data() + (static_cast<size_t>(y) * w_ + x) * 3;
  p[0] = c[0];
  p[1] = c[1];
  p[2] = c[2];
  if (tracking_) {
    min_x_ = std::min(min_x_, x);
    min_y_ = std::min(min_y_, y);
    max_x_ = std::max(max_x_, x);
    max_y_ = std::max(max_y_, y);
  }
}

void Canvas::fill_rect(double x0, double y0, double x1, double y1, Rgb color) {
  const int ix0 = static_cast<int>(std::floor(x0));
  const int iy0 = static_cast<int>(std::floor(y0));
  const int ix1 = static_cast<int>(std::ceil(x1));
  const int iy1 = static_cast<int>(std::ceil(y1));
  for (int y = iy0; y < iy1; ++y)
    for (int x = ix0; x < ix1; ++x) put(x, y, color);
}

void Canvas::fill_ellipse(double cx, double cy, double rx, double ry, Rgb color) {
  const int x0 = static_cast<int>(std::floor(cx - rx));
  const int x1 = static_cast<int>(std::ceil(cx + rx));
  const int y0 = static_cast<int>(std::floor(cy - ry));
  const int y1 = static_cast<int>(std::ceil(cy + ry));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) put(x, y, color);
    }
}

void Canvas::fill_trapezoid(double cx, double y0, double half_top, double half_bottom,
                            double y1, Rgb color) {
  const int iy0 = static_cast<int>(std::floor(y0));
  const int iy1 = static_cast<int>(std::ceil(y1));
  for (int y = iy0; y < iy1; ++y) {
    const double t = (y + 0.5 - y0) / std::max(1e-9, y1 - y0);
    const double half = half_top + std::clamp(t, 0.0, 1.0) * (half_bottom - half_top);
    for (int x = static_cast<int>(std::floor(cx - half));
         x < static_cast<int>(std::ceil(cx + half)); ++x)
      put(x, y, color);
  }
}

void Canvas::fill_half_disc_up(double cx, double cy, double r, Rgb color) {
  for (int y = static_cast<int>(std::floor(cy - r)); y <= static_cast<int>(cy); ++y)
    for (int x = static_cast<int>(std::floor(cx - r));
         x <= static_cast<int>(std::ceil(cx + r)); ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dy <= 0 && dx * dx + dy * dy <= r * r) put(x, y, color);
    }
}

void Canvas::stroke(double x0, double y0, double x1, double y1, double thickness,
                    Rgb color) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(2, static_cast<int>(std::ceil(len * 2)));
  const double r = thickness / 2;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double px = x0 + t * (x1 - x0);
    const double py = y0 + t * (y1 - y0);
    for (int y = static_cast<int>(std::floor(py - r)); y <= static_cast<int>(std::ceil(py + r)); ++y)
      for (int x = static_cast<int>(std::floor(px - r)); x <= static_cast<int>(std::ceil(px + r)); ++x) {
        const double dx = x + 0.5 - px, dy = y + 0.5 - py;
        if (dx * dx + dy * dy <= r * r) put(x, y, color);
      }
  }
}

void Canvas::begin_tracking() {
  tracking_ = true;
  min_x_ = w_;
  min_y_ = h_;
  max_x_ = -1;
  max_y_ = -1;
}

BoundingBox Canvas::end_tracking() const {
  if (max_x_ < min_x_) return {};
  return BoundingBox(min_x_, min_y_, max_x_ - min_x_ + 1, max_y_ - min_y_ + 1);
}

ImageU8 Canvas::to_image() const {
  ImageU8 img(w_, h_);
  for (int y = 0; y < h_; ++y)
    for (int x = 0; x < w_; ++x) {
      uint8_t* p = img.at(x, y);
      const double* s = data_.data() + (static_cast<size_t>(y) * w_ + x) * 3;
      for (int c = 0; c < 3; ++c)
        p[c] = static_cast<uint8_t>(std::lround(std::clamp(s[c], 0.0, 1.0) * 255.0));
    }
  return img;
}

Rgb heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  // blue -> cyan -> yellow -> red
  if (v < 0.25) return {0.0, v * 4, 1.0};
  if (v < 0.5) return {0.0, 1.0, 1.0 - (v - 0.25) * 4};
  if (v < 0.75) return {(v - 0.5) * 4, 1.0, 0.0};
  return {1.0, 1.0 - (v - 0.75) * 4, 0.0};
}

}  // namespace cg
