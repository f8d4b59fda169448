#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cg/geometry.hpp"
#include "cg/tensor.hpp"

namespace cg {

using Rgb = std::array<double, 3>;  // components in [0,1]

// 8-bit RGB image, row-major, used for storage and file I/O (binary PPM).
struct ImageU8 {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;  // height*width*3

  ImageU8() = default;
  ImageU8(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t* at(int x, int y) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
  }

  // (3,H,W) tensor with values in [0,1]
  Tensor to_tensor() const;
  static ImageU8 from_tensor(const Tensor& t);
};

void write_ppm(const ImageU8& img, const std::string& path);
ImageU8 read_ppm(const std::string& path);

// Double-precision paint surface. Draw calls track the bounding box of the
// pixels they touched, which becomes the glyph's tight box.
class Canvas {
 public:
  Canvas(int width, int height, Rgb background);

  int width() const { return w_; }
  int height() const { return h_; }

  void fill_rect(double x0, double y0, double x1, double y1, Rgb color);
  void fill_ellipse(double cx, double cy, double rx, double ry, Rgb color);
  // triangle with vertical symmetry axis: apex (cx, y0), base from x0..x1 at y1
  void fill_trapezoid(double cx, double y0, double half_top, double half_bottom,
                      double y1, Rgb color);
  void fill_half_disc_up(double cx, double cy, double r, Rgb color);

  // thick line segment, for limbs
  void stroke(double x0, double y0, double x1, double y1, double thickness, Rgb color);

  void begin_tracking();
  // tight integer-pixel box of everything painted since begin_tracking(),
  // in xywh; invalid box (w=h=0) when nothing was painted
  BoundingBox end_tracking() const;

  ImageU8 to_image() const;
  const std::vector<double>& raw() const { return data_; }

 private:
  void put(int x, int y, const Rgb& c);

  int w_, h_;
  std::vector<double> data_;  // h*w*3
  bool tracking_ = false;
  int min_x_ = 0, min_y_ = 0, max_x_ = -1, max_y_ = -1;
};

// Maps [0,1] to a blue->red heat color, used by the attention dumps.
Rgb heat_color(double v);

}  // namespace cg
