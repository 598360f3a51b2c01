/*
 * Copyright 2026 The scdepth Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "scdepth/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scdepth/rng.hpp"

namespace scd {

namespace {

bool host_is_little_endian() {
  uint16_t probe = 1;
  uint8_t b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

void write_pfm_payload(const std::string& path, const char* magic, int width,
                       int height, int channels, const std::vector<float>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << magic << "\n" << width << " " << height << "\n" << "-1.0" << "\n";
  // Rows bottom-to-top, little-endian floats (scale header is negative).
  if (!host_is_little_endian())
    throw IoError("pfm writer requires a little-endian host");
  size_t row_elems = size_t(width) * channels;
  for (int v = height - 1; v >= 0; --v) {
    out.write(reinterpret_cast<const char*>(rows.data() + size_t(v) * row_elems),
              std::streamsize(row_elems * sizeof(float)));
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace

void write_pfm(const std::string& path, const DepthMap& depth) {
  if (depth.width <= 0 || depth.height <= 0)
    throw InputError("write_pfm: empty depth map");
  std::vector<float> data(size_t(depth.width) * depth.height);
  for (size_t i = 0; i < data.size(); ++i)
    data[i] = depth.valid[i] ? float(depth.values[i]) : 0.0f;
  write_pfm_payload(path, "Pf", depth.width, depth.height, 1, data);
}

void write_pfm_image(const std::string& path, const ImageBuffer& img) {
  if (img.width <= 0 || img.height <= 0)
    throw InputError("write_pfm_image: empty image");
  std::vector<float> data(img.values.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = float(img.values[i]);
  write_pfm_payload(path, "PF", img.width, img.height, 3, data);
}

DepthMap read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw IoError("not a single-channel pfm: " + path);
  int width = 0, height = 0;
  double scale = 0.0;
  in >> width >> height >> scale;
  if (width <= 0 || height <= 0) throw IoError("bad pfm dimensions: " + path);
  in.get();  // single whitespace after the header
  std::vector<float> data(size_t(width) * height);
  in.read(reinterpret_cast<char*>(data.data()),
          std::streamsize(data.size() * sizeof(float)));
  if (!in) throw IoError("truncated pfm: " + path);
  bool file_le = scale < 0.0;
  if (file_le != host_is_little_endian()) {
    for (float& f : data) {
      uint32_t u;
      std::memcpy(&u, &f, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&f, &u, 4);
    }
  }
  DepthMap depth(width, height);
  for (int v = 0; v < height; ++v) {
    const float* row = data.data() + size_t(height - 1 - v) * width;
    for (int u = 0; u < width; ++u) {
      double d = row[u];
      size_t i = depth.idx(u, v);
      if (d > 0.0 && std::isfinite(d)) {
        depth.values[i] = d;
        depth.valid[i] = 1;
      }
    }
  }
  return depth;
}

namespace {

struct PngWriter {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngWriter(const std::string& path) {
    fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open for writing: " + path);
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      if (fp) std::fclose(fp);
      throw IoError("libpng initialization failed");
    }
    png_init_io(png, fp);
  }
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, &info);
    if (fp) std::fclose(fp);
  }
};

struct PngReader {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngReader(const std::string& path) {
    fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open: " + path);
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      if (fp) std::fclose(fp);
      throw IoError("libpng initialization failed");
    }
    png_init_io(png, fp);
  }
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    if (fp) std::fclose(fp);
  }
};

uint8_t to_byte(double x) {
  double v = std::lround(std::clamp(x, 0.0, 1.0) * 255.0);
  return uint8_t(v);
}

}  // namespace

void write_png_rgb(const std::string& path, const ImageBuffer& img) {
  PngWriter w(path);
  if (setjmp(png_jmpbuf(w.png))) throw IoError("png write failed: " + path);
  png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  std::vector<uint8_t> row(size_t(img.width) * 3);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u)
      for (int c = 0; c < 3; ++c) row[size_t(u) * 3 + c] = to_byte(img.at(u, v, c));
    png_write_row(w.png, row.data());
  }
  png_write_end(w.png, nullptr);
}

void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& gray) {
  if (gray.size() != size_t(width) * height)
    throw InputError("write_png_gray: size mismatch");
  PngWriter w(path);
  if (setjmp(png_jmpbuf(w.png))) throw IoError("png write failed: " + path);
  png_set_IHDR(w.png, w.info, width, height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  for (int v = 0; v < height; ++v)
    png_write_row(w.png, const_cast<uint8_t*>(gray.data() + size_t(v) * width));
  png_write_end(w.png, nullptr);
}

void write_png_indexed(const std::string& path, int width, int height,
                       const std::vector<uint8_t>& indices) {
  if (indices.size() != size_t(width) * height)
    throw InputError("write_png_indexed: size mismatch");
  PngWriter w(path);
  if (setjmp(png_jmpbuf(w.png))) throw IoError("png write failed: " + path);
  png_set_IHDR(w.png, w.info, width, height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // Deterministic palette: index 0 black, others from a fixed hash so adjacent
  // ids get visually distinct colors.
  png_color palette[256];
  palette[0] = {0, 0, 0};
  for (int i = 1; i < 256; ++i) {
    uint64_t h = hash_combine(0x9e3779b97f4a7c15ull, uint64_t(i));
    palette[i].red = png_byte(64 + (h & 0xbf));
    palette[i].green = png_byte(64 + ((h >> 8) & 0xbf));
    palette[i].blue = png_byte(64 + ((h >> 16) & 0xbf));
  }
  png_set_PLTE(w.png, w.info, palette, 256);
  png_write_info(w.png, w.info);
  for (int v = 0; v < height; ++v)
    png_write_row(w.png, const_cast<uint8_t*>(indices.data() + size_t(v) * width));
  png_write_end(w.png, nullptr);
}

ImageBuffer read_png_rgb(const std::string& path) {
  PngReader r(path);
  if (setjmp(png_jmpbuf(r.png))) throw IoError("png read failed: " + path);
  png_read_info(r.png, r.info);
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(r.png, r.info, &width, &height, &bit_depth, &color_type, nullptr,
               nullptr, nullptr);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);
  ImageBuffer img{int(width), int(height)};
  std::vector<uint8_t> row(size_t(width) * 3);
  for (png_uint_32 v = 0; v < height; ++v) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 u = 0; u < width; ++u)
      for (int c = 0; c < 3; ++c)
        img.set(int(u), int(v), c, row[size_t(u) * 3 + c] / 255.0);
  }
  return img;
}

std::vector<uint8_t> read_png_indexed(const std::string& path, int* width,
                                      int* height) {
  PngReader r(path);
  if (setjmp(png_jmpbuf(r.png))) throw IoError("png read failed: " + path);
  png_read_info(r.png, r.info);
  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr,
               nullptr);
  if (color_type != PNG_COLOR_TYPE_PALETTE && color_type != PNG_COLOR_TYPE_GRAY)
    throw IoError("expected an indexed or grayscale png: " + path);
  if (bit_depth < 8) png_set_packing(r.png);
  if (bit_depth == 16) png_set_strip_16(r.png);
  png_read_update_info(r.png, r.info);
  std::vector<uint8_t> out(size_t(w) * h);
  for (png_uint_32 v = 0; v < h; ++v)
    png_read_row(r.png, out.data() + size_t(v) * w, nullptr);
  *width = int(w);
  *height = int(h);
  return out;
}

std::vector<uint8_t> depth_to_gray(const DepthMap& depth) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (size_t i = 0; i < depth.pixel_count(); ++i) {
    if (!depth.valid[i]) continue;
    double d = depth.values[i];
    if (!any) {
      lo = hi = d;
      any = true;
    } else {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  std::vector<uint8_t> gray(depth.pixel_count(), 0);
  double span = hi > lo ? hi - lo : 1.0;
  for (size_t i = 0; i < depth.pixel_count(); ++i)
    if (depth.valid[i])
      gray[i] = to_byte((depth.values[i] - lo) / span);
  return gray;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("short write: " + path);
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory: " + path + ": " + ec.message());
}

std::string file_content_hash(const std::string& path) {
  return hash_hex(fnv1a(read_text_file(path)));
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return buf;
}

}  // namespace scd
