#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "relocc/geometry.hpp"
#include "relocc/tensor.hpp"

namespace relocc {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h, std::array<uint8_t, 3> fill = {0, 0, 0});

  uint8_t* at(int x, int y) { return rgb.data() + 3 * (size_t(y) * width + x); }
  const uint8_t* at(int x, int y) const {
    return rgb.data() + 3 * (size_t(y) * width + x);
  }

  void fill_rect(int x0, int y0, int x1, int y1, std::array<uint8_t, 3> color);
  void draw_rect_outline(const Box& b, std::array<uint8_t, 3> color);  // normalized box
};

void save_png(const Image& img, const std::string& path);
Image load_png(const std::string& path);

// (3, H*W) matrix in [-1, 1]; channels are rows.
Mat image_to_tensor(const Image& img);

// Bilinear upsample of a (h, w) map stored row-major in a Mat of shape (h, w).
Mat upsample_bilinear(const Mat& src, int out_h, int out_w);

// Center-aligned bilinear resample in both directions.
Image resize_image(const Image& src, int out_w, int out_h);

// Maps v in [0,1] to a blue->red heat color.
std::array<uint8_t, 3> heat_color(double v);

// Alpha-blends a [0,1] heat map (same size as img) over the image.
void overlay_heatmap(Image& img, const Mat& heat, double alpha = 0.55);

}  // namespace relocc
