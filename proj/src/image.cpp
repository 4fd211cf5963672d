#include "relocc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace relocc {

Image::Image(int w, int h, std::array<uint8_t, 3> fill)
    : width(w), height(h), rgb(size_t(w) * h * 3) {
  for (size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = fill[0];
    rgb[i + 1] = fill[1];
    rgb[i + 2] = fill[2];
  }
}

void Image::fill_rect(int x0, int y0, int x1, int y1, std::array<uint8_t, 3> color) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(width, x1);
  y1 = std::min(height, y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      uint8_t* p = at(x, y);
      p[0] = color[0];
      p[1] = color[1];
      p[2] = color[2];
    }
}

void Image::draw_rect_outline(const Box& b, std::array<uint8_t, 3> color) {
  int x0 = std::clamp(int(std::lround(b.x_min * width)), 0, width - 1);
  int x1 = std::clamp(int(std::lround(b.x_max * width)) - 1, 0, width - 1);
  int y0 = std::clamp(int(std::lround(b.y_min * height)), 0, height - 1);
  int y1 = std::clamp(int(std::lround(b.y_max * height)) - 1, 0, height - 1);
  for (int x = x0; x <= x1; ++x) {
    std::copy(color.begin(), color.end(), at(x, y0));
    std::copy(color.begin(), color.end(), at(x, y1));
  }
  for (int y = y0; y <= y1; ++y) {
    std::copy(color.begin(), color.end(), at(x0, y));
    std::copy(color.begin(), color.end(), at(x1, y));
  }
}

void save_png(const Image& img, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Image load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  Image img(int(png_get_image_width(png, info)), int(png_get_image_height(png, info)));
  if (png_get_rowbytes(png, info) != size_t(img.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("unexpected png row size: " + path);
  }
  for (int y = 0; y < img.height; ++y) png_read_row(png, img.at(0, y), nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

Mat image_to_tensor(const Image& img) {
  Mat m(3, img.width * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const uint8_t* p = img.at(x, y);
      const int col = y * img.width + x;
      for (int c = 0; c < 3; ++c) m(c, col) = p[c] / 127.5 - 1.0;
    }
  return m;
}

Mat upsample_bilinear(const Mat& src, int out_h, int out_w) {
  const int h = int(src.rows()), w = int(src.cols());
  Mat out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const double sy = (y + 0.5) * h / out_h - 0.5;
    const int y0 = std::clamp(int(std::floor(sy)), 0, h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = std::clamp(sy - y0, 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double sx = (x + 0.5) * w / out_w - 0.5;
      const int x0 = std::clamp(int(std::floor(sx)), 0, w - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      out(y, x) = (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x1)) +
                  fy * ((1 - fx) * src(y1, x0) + fx * src(y1, x1));
    }
  }
  return out;
}

Image resize_image(const Image& src, int out_w, int out_h) {
  Image out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const double sy = (y + 0.5) * src.height / out_h - 0.5;
    const int y0 = std::clamp(int(std::floor(sy)), 0, src.height - 1);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = std::clamp(sy - y0, 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double sx = (x + 0.5) * src.width / out_w - 0.5;
      const int x0 = std::clamp(int(std::floor(sx)), 0, src.width - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double v =
            (1 - fy) * ((1 - fx) * src.at(x0, y0)[c] + fx * src.at(x1, y0)[c]) +
            fy * ((1 - fx) * src.at(x0, y1)[c] + fx * src.at(x1, y1)[c]);
        out.at(x, y)[c] = uint8_t(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

std::array<uint8_t, 3> heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  // blue (0) -> cyan -> yellow -> red (1)
  double r = std::clamp(2.0 * v - 0.5, 0.0, 1.0);
  double g = std::clamp(v < 0.5 ? 2.0 * v : 2.0 - 2.0 * v + 0.5, 0.0, 1.0);
  double b = std::clamp(1.0 - 2.0 * v, 0.0, 1.0);
  return {uint8_t(std::lround(r * 255)), uint8_t(std::lround(g * 255)),
          uint8_t(std::lround(b * 255))};
}

void overlay_heatmap(Image& img, const Mat& heat, double alpha) {
  if (heat.rows() != img.height || heat.cols() != img.width)
    throw std::invalid_argument("heatmap size mismatch");
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      auto hc = heat_color(heat(y, x));
      uint8_t* p = img.at(x, y);
      for (int c = 0; c < 3; ++c)
        p[c] = uint8_t(std::lround((1 - alpha) * p[c] + alpha * hc[c]));
    }
}

}  // namespace relocc
