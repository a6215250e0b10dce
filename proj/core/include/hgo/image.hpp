#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgo/losses.hpp"

namespace hgo {

// 8-bit interleaved RGB, row-major
struct Image {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int x, int y, int ch) {
    return pixels[static_cast<std::size_t>((y * w + x) * 3 + ch)];
  }
  std::uint8_t at(int x, int y, int ch) const {
    return pixels[static_cast<std::size_t>((y * w + x) * 3 + ch)];
  }
};

Image make_image(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

Image read_ppm(const std::string& path);
void write_ppm(const Image& img, const std::string& path);
Image read_bmp(const std::string& path);  // 24-bit uncompressed only

// dispatches on magic bytes: P6 or BM
Image read_image(const std::string& path);

struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;
  int in_w = 0, in_h = 0;
  int out_size = 0;

  Box to_canvas(const Box& b) const;
  Box to_original(const Box& b) const;  // exact inverse; clamps to image bounds
};

struct Letterboxed {
  Image image;
  LetterboxTransform tf;
};

// aspect-preserving bilinear resize, centered gray-114 padding
Letterboxed letterbox(const Image& src, int target_size);

// annotation helpers
void draw_box(Image& img, const Box& b, std::uint8_t r, std::uint8_t g, std::uint8_t bl);
// 3x5 micro font: digits, ':', '.', scaled 2x
void draw_label(Image& img, int x, int y, const std::string& text, std::uint8_t r,
                std::uint8_t g, std::uint8_t bl);

}  // namespace hgo
