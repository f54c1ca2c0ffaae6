// Copyright 2026 The mvparse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvparse/image_io.h"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace mvparse {

namespace {

struct FileCloser {
  void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw Error(std::string("png: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

struct RawImage {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<uint8_t> bytes;  // row-major, big-endian samples for 16-bit
};

void write_raw(const std::string& path, const RawImage& img, int color_type) {
  if (img.width <= 0 || img.height <= 0) throw Error("cannot write empty image " + path);
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: out of memory");
  }
  try {
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, img.bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    const size_t stride = static_cast<size_t>(img.width) * img.channels * (img.bit_depth / 8);
    for (int y = 0; y < img.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(img.bytes.data() + y * stride));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw Error("failed writing " + path);
}

RawImage read_raw(const std::string& path, int want_channels, int want_depth) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw Error(path + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("png: out of memory");
  }
  RawImage img;
  try {
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int ct = png_get_color_type(png, info);
    const int bd = png_get_bit_depth(png, info);
    if (ct == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (ct == PNG_COLOR_TYPE_GRAY && bd < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (ct & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (want_depth == 8 && bd == 16) png_set_strip_16(png);
    if (want_channels == 3 && (ct == PNG_COLOR_TYPE_GRAY || ct == PNG_COLOR_TYPE_GRAY_ALPHA)) png_set_gray_to_rgb(png);
    if (want_channels == 1 && (ct & PNG_COLOR_MASK_COLOR)) throw Error(path + ": expected a grayscale PNG");
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = png_get_channels(png, info);
    img.bit_depth = png_get_bit_depth(png, info);
    if (img.channels != want_channels || img.bit_depth != want_depth) {
      throw Error(path + ": unexpected PNG layout (" + std::to_string(img.channels) + " channels, " +
                  std::to_string(img.bit_depth) + " bit)");
    }
    const size_t stride = png_get_rowbytes(png, info);
    img.bytes.resize(stride * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.bytes.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

void write_rgb_png(const std::string& path, const RgbImage& image) {
  RawImage raw{image.width, image.height, 3, 8, {}};
  raw.bytes.reserve(image.size() * 3);
  for (const Rgb& c : image.data) {
    raw.bytes.push_back(c.r);
    raw.bytes.push_back(c.g);
    raw.bytes.push_back(c.b);
  }
  write_raw(path, raw, PNG_COLOR_TYPE_RGB);
}

RgbImage read_rgb_png(const std::string& path) {
  const RawImage raw = read_raw(path, 3, 8);
  RgbImage out(raw.width, raw.height);
  for (size_t i = 0; i < out.size(); ++i) out[i] = Rgb{raw.bytes[3 * i], raw.bytes[3 * i + 1], raw.bytes[3 * i + 2]};
  return out;
}

void write_gray8_png(const std::string& path, const Grid<uint8_t>& image) {
  write_raw(path, RawImage{image.width, image.height, 1, 8, image.data}, PNG_COLOR_TYPE_GRAY);
}

Grid<uint8_t> read_gray8_png(const std::string& path) {
  RawImage raw = read_raw(path, 1, 8);
  Grid<uint8_t> out(raw.width, raw.height);
  out.data = std::move(raw.bytes);
  return out;
}

void write_gray16_png(const std::string& path, const Grid<uint16_t>& image) {
  RawImage raw{image.width, image.height, 1, 16, {}};
  raw.bytes.reserve(image.size() * 2);
  for (uint16_t v : image.data) {
    raw.bytes.push_back(static_cast<uint8_t>(v >> 8));
    raw.bytes.push_back(static_cast<uint8_t>(v & 0xFF));
  }
  write_raw(path, raw, PNG_COLOR_TYPE_GRAY);
}

Grid<uint16_t> read_gray16_png(const std::string& path) {
  const RawImage raw = read_raw(path, 1, 16);
  Grid<uint16_t> out(raw.width, raw.height);
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<uint16_t>(raw.bytes[2 * i] << 8 | raw.bytes[2 * i + 1]);
  return out;
}

void write_depth_png(const std::string& path, const DepthMap& depth) {
  Grid<uint16_t> mm(depth.width, depth.height, 0);
  for (size_t i = 0; i < depth.size(); ++i) {
    const double d = depth[i];
    if (!(d > 0.0) || !std::isfinite(d)) continue;
    const double v = std::floor(d * 1000.0 + 0.5);
    if (v > 65535.0) throw Error(path + ": depth exceeds 16-bit millimeter range");
    mm[i] = static_cast<uint16_t>(std::max(1.0, v));
  }
  write_gray16_png(path, mm);
}

DepthMap read_depth_png(const std::string& path) {
  const Grid<uint16_t> mm = read_gray16_png(path);
  DepthMap out(mm.width, mm.height, 0.0);
  for (size_t i = 0; i < mm.size(); ++i) out[i] = mm[i] / 1000.0;
  return out;
}

void write_mask_png(const std::string& path, const Mask& mask) {
  Grid<uint8_t> g(mask.width, mask.height, 0);
  for (size_t i = 0; i < mask.size(); ++i) g[i] = mask[i] ? 255 : 0;
  write_gray8_png(path, g);
}

Mask read_mask_png(const std::string& path) {
  Grid<uint8_t> g = read_gray8_png(path);
  for (auto& v : g.data) v = v >= 128 ? 1 : 0;
  return g;
}

}  // namespace mvparse
