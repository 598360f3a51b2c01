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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scdepth/io.hpp"
#include "scdepth/rng.hpp"
#include "scdepth/types.hpp"

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "scdepth_io_test";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("pfm roundtrip preserves values at float precision and validity exactly") {
  scd::Rng rng(12345);
  scd::DepthMap d(17, 9);
  for (int v = 0; v < d.height; ++v)
    for (int u = 0; u < d.width; ++u) {
      size_t i = d.idx(u, v);
      if (rng.uniform() < 0.2) continue;  // leave invalid
      d.values[i] = rng.uniform(0.05, 50.0);
      d.valid[i] = 1;
    }
  const std::string path = temp_path("roundtrip.pfm");
  scd::write_pfm(path, d);
  scd::DepthMap back = scd::read_pfm(path);
  REQUIRE(back.width == d.width);
  REQUIRE(back.height == d.height);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    CHECK(back.valid[i] == d.valid[i]);
    if (d.valid[i]) {
      // Stored as 32-bit float: equality after the same cast.
      CHECK(back.values[i] == double(float(d.values[i])));
    } else {
      CHECK(back.values[i] == 0.0);
    }
  }
}

TEST_CASE("pfm raw layout: header, negative scale, bottom-to-top rows") {
  scd::DepthMap d(2, 2);
  d.values = {1.0, 2.0, 3.0, 4.0};  // row v=0: (1,2); row v=1: (3,4)
  d.valid = {1, 1, 1, 1};
  const std::string path = temp_path("layout.pfm");
  scd::write_pfm(path, d);

  std::ifstream in(path, std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string header = "Pf\n2 2\n-1.0\n";
  REQUIRE(raw.size() == header.size() + 4 * sizeof(float));
  CHECK(raw.compare(0, header.size(), header) == 0);

  float px[4];
  std::memcpy(px, raw.data() + header.size(), sizeof(px));
  // Bottom row (v=1) is stored first.
  CHECK(px[0] == 3.0f);
  CHECK(px[1] == 4.0f);
  CHECK(px[2] == 1.0f);
  CHECK(px[3] == 2.0f);
}

TEST_CASE("pfm read flags nonpositive pixels invalid") {
  scd::DepthMap d(3, 1);
  d.values = {2.5, 0.0, 7.0};
  d.valid = {1, 0, 1};
  const std::string path = temp_path("invalid.pfm");
  scd::write_pfm(path, d);
  scd::DepthMap back = scd::read_pfm(path);
  CHECK(back.valid[0] == 1);
  CHECK(back.valid[1] == 0);
  CHECK(back.valid[2] == 1);
}

TEST_CASE("pfm read rejects missing and malformed files") {
  CHECK_THROWS_AS(scd::read_pfm(temp_path("does_not_exist.pfm")), scd::IoError);
  const std::string path = temp_path("bad_magic.pfm");
  scd::write_text_file(path, "P6\n2 2\n255\n");
  CHECK_THROWS_AS(scd::read_pfm(path), scd::IoError);
}

TEST_CASE("png rgb roundtrip is exact up to 8-bit quantization") {
  scd::Rng rng(7);
  scd::ImageBuffer img(13, 6);
  for (double& x : img.values) x = rng.uniform();
  const std::string path = temp_path("rgb.png");
  scd::write_png_rgb(path, img);
  scd::ImageBuffer back = scd::read_png_rgb(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (size_t i = 0; i < img.values.size(); ++i)
    CHECK(std::abs(back.values[i] - img.values[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("png rgb write clamps out-of-range values") {
  scd::ImageBuffer img(2, 1);
  img.set(0, 0, 0, -0.5);
  img.set(0, 0, 1, 1.5);
  img.set(0, 0, 2, 0.5);
  const std::string path = temp_path("clamp.png");
  scd::write_png_rgb(path, img);
  scd::ImageBuffer back = scd::read_png_rgb(path);
  CHECK(back.at(0, 0, 0) == 0.0);
  CHECK(back.at(0, 0, 1) == 1.0);
  CHECK(std::abs(back.at(0, 0, 2) - 0.5) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("indexed png roundtrip preserves label ids exactly") {
  std::vector<uint8_t> ids = {0, 1, 2, 3, 7, 1, 0, 255, 9, 9, 4, 0};
  const std::string path = temp_path("labels.png");
  scd::write_png_indexed(path, 4, 3, ids);
  int w = 0, h = 0;
  std::vector<uint8_t> back = scd::read_png_indexed(path, &w, &h);
  REQUIRE(w == 4);
  REQUIRE(h == 3);
  CHECK(back == ids);
}

TEST_CASE("gray png roundtrip") {
  std::vector<uint8_t> gray = {0, 64, 128, 192, 255, 10};
  const std::string path = temp_path("gray.png");
  scd::write_png_gray(path, 3, 2, gray);
  int w = 0, h = 0;
  std::vector<uint8_t> back = scd::read_png_indexed(path, &w, &h);
  REQUIRE(w == 3);
  REQUIRE(h == 2);
  CHECK(back == gray);
}

TEST_CASE("depth_to_gray maps the valid range onto 0..255") {
  scd::DepthMap d(4, 1);
  d.values = {2.0, 4.0, 3.0, 100.0};
  d.valid = {1, 1, 1, 0};  // the invalid pixel must not affect scaling
  std::vector<uint8_t> g = scd::depth_to_gray(d);
  REQUIRE(g.size() == 4);
  CHECK(g[0] == 0);
  CHECK(g[1] == 255);
  CHECK(int(g[2]) == doctest::Approx(128).epsilon(0.02));
}

TEST_CASE("fnv1a matches the published 64-bit test vectors") {
  CHECK(scd::fnv1a(std::string("")) == 0xcbf29ce484222325ull);
  CHECK(scd::fnv1a(std::string("a")) == 0xaf63dc4c8601ec8cull);
  CHECK(scd::fnv1a(std::string("foobar")) == 0x85944171f73967e8ull);
}

TEST_CASE("hash_hex is fixed-width lowercase hex") {
  CHECK(scd::hash_hex(0) == "0000000000000000");
  CHECK(scd::hash_hex(0xdeadbeefull) == "00000000deadbeef");
  CHECK(scd::hash_hex(0xcbf29ce484222325ull) == "cbf29ce484222325");
}

TEST_CASE("text file helpers and content hash") {
  const std::string path = temp_path("note.txt");
  scd::write_text_file(path, "two frames\n");
  CHECK(scd::file_exists(path));
  CHECK(scd::read_text_file(path) == "two frames\n");
  CHECK(scd::file_content_hash(path) == scd::hash_hex(scd::fnv1a(std::string("two frames\n"))));
  CHECK_FALSE(scd::file_exists(temp_path("missing.txt")));
  CHECK_THROWS_AS(scd::read_text_file(temp_path("missing.txt")), scd::IoError);
}

TEST_CASE("ensure_directory creates nested directories idempotently") {
  const std::string dir = temp_path("a/b/c");
  scd::ensure_directory(dir);
  scd::ensure_directory(dir);
  CHECK(std::filesystem::is_directory(dir));
}

TEST_CASE("rng mappings are deterministic and in range") {
  scd::Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) {
    double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  scd::Rng c(5);
  for (int i = 0; i < 200; ++i) {
    int64_t v = c.uniform_int(-3, 11);
    CHECK(v >= -3);
    CHECK(v <= 11);
  }
  scd::Rng d(17);
  for (int i = 0; i < 200; ++i) {
    double v = d.log_uniform(0.2, 5.0);
    CHECK(v >= 0.2 - 1e-12);
    CHECK(v <= 5.0 + 1e-12);
  }
}
