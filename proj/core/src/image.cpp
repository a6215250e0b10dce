#include "hgo/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hgo {

Image make_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  HGO_CHECK(w > 0 && h > 0, "image dims " << w << "x" << h << " must be positive");
  Image img;
  img.w = w;
  img.h = h;
  img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

namespace {

// PPM token reader that skips whitespace and # comments
int ppm_int(std::istream& f, const std::string& path) {
  int c = f.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = f.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = f.get();
  }
  HGO_CHECK(c != EOF && std::isdigit(c), "'" << path << "': malformed PPM header");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    HGO_CHECK(v <= 1 << 24, "'" << path << "': implausible PPM header value");
    c = f.get();
  }
  if (c != EOF) f.unget();
  return v;
}

std::uint32_t rd_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t rd_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  HGO_CHECK(f, "cannot open '" << path << "'");
  char m0 = 0, m1 = 0;
  f.get(m0);
  f.get(m1);
  HGO_CHECK(m0 == 'P' && m1 == '6', "'" << path << "': not a P6 PPM");
  const int w = ppm_int(f, path);
  const int h = ppm_int(f, path);
  const int maxval = ppm_int(f, path);
  HGO_CHECK(w > 0 && h > 0, "'" << path << "': zero-dimension image");
  HGO_CHECK(maxval == 255, "'" << path << "': only maxval 255 supported, got " << maxval);
  f.get();  // single whitespace after maxval
  Image img;
  img.w = w;
  img.h = h;
  img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(img.pixels.data()),
         static_cast<std::streamsize>(img.pixels.size()));
  HGO_CHECK(static_cast<std::size_t>(f.gcount()) == img.pixels.size(),
            "'" << path << "': truncated pixel data");
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  HGO_CHECK(img.w > 0 && img.h > 0, "cannot write zero-dimension image");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  HGO_CHECK(f, "cannot open '" << path << "' for writing");
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  HGO_CHECK(f.good(), "write failed for '" << path << "'");
}

Image read_bmp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  HGO_CHECK(f, "cannot open '" << path << "'");
  std::uint8_t hdr[54];
  f.read(reinterpret_cast<char*>(hdr), 54);
  HGO_CHECK(f.gcount() == 54 && hdr[0] == 'B' && hdr[1] == 'M',
            "'" << path << "': not a BMP file");
  const std::uint32_t data_off = rd_u32(hdr + 10);
  const std::uint32_t info_size = rd_u32(hdr + 14);
  HGO_CHECK(info_size >= 40, "'" << path << "': unsupported BMP header size " << info_size);
  const std::int32_t w = static_cast<std::int32_t>(rd_u32(hdr + 18));
  const std::int32_t h_raw = static_cast<std::int32_t>(rd_u32(hdr + 22));
  const std::uint16_t bpp = rd_u16(hdr + 28);
  const std::uint32_t compression = rd_u32(hdr + 30);
  HGO_CHECK(bpp == 24, "'" << path << "': only 24-bit BMP supported, got " << bpp << " bpp");
  HGO_CHECK(compression == 0, "'" << path << "': compressed BMP not supported");
  HGO_CHECK(w > 0 && h_raw != 0, "'" << path << "': zero-dimension image");
  const bool top_down = h_raw < 0;
  const int h = top_down ? -h_raw : h_raw;

  f.seekg(data_off, std::ios::beg);
  HGO_CHECK(f.good(), "'" << path << "': bad pixel data offset " << data_off);
  const int row_bytes = (w * 3 + 3) / 4 * 4;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(row_bytes));
  Image img;
  img.w = w;
  img.h = h;
  img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), row_bytes);
    HGO_CHECK(f.gcount() == row_bytes, "'" << path << "': truncated pixel data at row " << y);
    const int dst_y = top_down ? y : h - 1 - y;
    for (int x = 0; x < w; ++x) {
      img.at(x, dst_y, 0) = row[static_cast<std::size_t>(x * 3 + 2)];
      img.at(x, dst_y, 1) = row[static_cast<std::size_t>(x * 3 + 1)];
      img.at(x, dst_y, 2) = row[static_cast<std::size_t>(x * 3)];
    }
  }
  return img;
}

Image read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  HGO_CHECK(f, "cannot open '" << path << "'");
  char m[2] = {0, 0};
  f.read(m, 2);
  f.close();
  if (m[0] == 'P' && m[1] == '6') return read_ppm(path);
  if (m[0] == 'B' && m[1] == 'M') return read_bmp(path);
  throw Error("'" + path + "': unrecognized image format (want PPM P6 or BMP)");
}

Box LetterboxTransform::to_canvas(const Box& b) const {
  auto fwd = [&](float v, double pad) { return static_cast<float>(v * scale + pad); };
  return {fwd(b.x1, pad_x), fwd(b.y1, pad_y), fwd(b.x2, pad_x), fwd(b.y2, pad_y)};
}

Box LetterboxTransform::to_original(const Box& b) const {
  auto inv = [&](float v, double pad, int hi) {
    return static_cast<float>(std::clamp((v - pad) / scale, 0.0, static_cast<double>(hi)));
  };
  return {inv(b.x1, pad_x, in_w), inv(b.y1, pad_y, in_h), inv(b.x2, pad_x, in_w),
          inv(b.y2, pad_y, in_h)};
}

Letterboxed letterbox(const Image& src, int target_size) {
  HGO_CHECK(src.w > 0 && src.h > 0, "letterbox: zero-dimension image");
  HGO_CHECK(target_size > 0, "letterbox: target size must be positive");
  const double scale =
      std::min(static_cast<double>(target_size) / src.w, static_cast<double>(target_size) / src.h);
  const int new_w = std::max(1, static_cast<int>(std::lround(src.w * scale)));
  const int new_h = std::max(1, static_cast<int>(std::lround(src.h * scale)));
  const int pad_x = (target_size - new_w) / 2;
  const int pad_y = (target_size - new_h) / 2;

  Letterboxed out;
  out.image = make_image(target_size, target_size, 114, 114, 114);
  out.tf = {scale, static_cast<double>(pad_x), static_cast<double>(pad_y),
            src.w,  src.h,                     target_size};

  // bilinear, half-pixel centers
  for (int y = 0; y < new_h; ++y) {
    const double sy = (y + 0.5) * src.h / new_h - 0.5;
    const double syc = std::clamp(sy, 0.0, static_cast<double>(src.h - 1));
    const int y0 = static_cast<int>(syc);
    const int y1 = std::min(y0 + 1, src.h - 1);
    const double fy = syc - y0;
    for (int x = 0; x < new_w; ++x) {
      const double sx = (x + 0.5) * src.w / new_w - 0.5;
      const double sxc = std::clamp(sx, 0.0, static_cast<double>(src.w - 1));
      const int x0 = static_cast<int>(sxc);
      const int x1 = std::min(x0 + 1, src.w - 1);
      const double fx = sxc - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = src.at(x0, y0, ch) * (1 - fx) + src.at(x1, y0, ch) * fx;
        const double bot = src.at(x0, y1, ch) * (1 - fx) + src.at(x1, y1, ch) * fx;
        const double v = top * (1 - fy) + bot * fy;
        out.image.at(x + pad_x, y + pad_y, ch) =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

void draw_box(Image& img, const Box& b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
  const int x1 = std::clamp(static_cast<int>(std::lround(b.x1)), 0, img.w - 1);
  const int y1 = std::clamp(static_cast<int>(std::lround(b.y1)), 0, img.h - 1);
  const int x2 = std::clamp(static_cast<int>(std::lround(b.x2)), 0, img.w - 1);
  const int y2 = std::clamp(static_cast<int>(std::lround(b.y2)), 0, img.h - 1);
  auto put = [&](int x, int y) {
    img.at(x, y, 0) = r;
    img.at(x, y, 1) = g;
    img.at(x, y, 2) = bl;
  };
  for (int x = x1; x <= x2; ++x) {
    put(x, y1);
    put(x, y2);
  }
  for (int y = y1; y <= y2; ++y) {
    put(x1, y);
    put(x2, y);
  }
}

namespace {

// 3x5 glyphs, row-major bits (msb = left column)
struct Glyph {
  char c;
  std::uint8_t rows[5];
};
constexpr Glyph kFont[] = {
    {'0', {0b111, 0b101, 0b101, 0b101, 0b111}}, {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
    {'2', {0b111, 0b001, 0b111, 0b100, 0b111}}, {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
    {'4', {0b101, 0b101, 0b111, 0b001, 0b001}}, {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
    {'6', {0b111, 0b100, 0b111, 0b101, 0b111}}, {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
    {'8', {0b111, 0b101, 0b111, 0b101, 0b111}}, {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
    {':', {0b000, 0b010, 0b000, 0b010, 0b000}}, {'.', {0b000, 0b000, 0b000, 0b000, 0b010}},
};

const std::uint8_t* glyph_rows(char c) {
  for (const auto& g : kFont)
    if (g.c == c) return g.rows;
  return nullptr;
}

}  // namespace

void draw_label(Image& img, int x, int y, const std::string& text, std::uint8_t r,
                std::uint8_t g, std::uint8_t bl) {
  constexpr int kScale = 2;
  int cx = x;
  for (char c : text) {
    const std::uint8_t* rows = glyph_rows(c);
    if (rows) {
      for (int gy = 0; gy < 5; ++gy)
        for (int gx = 0; gx < 3; ++gx) {
          if (!(rows[gy] & (0b100 >> gx))) continue;
          for (int sy = 0; sy < kScale; ++sy)
            for (int sx = 0; sx < kScale; ++sx) {
              const int px = cx + gx * kScale + sx;
              const int py = y + gy * kScale + sy;
              if (px >= 0 && px < img.w && py >= 0 && py < img.h) {
                img.at(px, py, 0) = r;
                img.at(px, py, 1) = g;
                img.at(px, py, 2) = bl;
              }
            }
        }
    }
    cx += 4 * kScale;  // 3px glyph + 1px gap
  }
}

}  // namespace hgo
