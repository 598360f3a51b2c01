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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scdepth/types.hpp"

namespace scd {

// PFM depth maps: single-channel "Pf", little-endian (scale header -1.0),
// rows stored bottom-to-top. Invalid pixels are stored as 0.
void write_pfm(const std::string& path, const DepthMap& depth);
DepthMap read_pfm(const std::string& path);

// Raw float image PFM ("PF" color / "Pf" gray) used for debug dumps.
void write_pfm_image(const std::string& path, const ImageBuffer& img);

// 8-bit PNGs. Images are gamma-less: values in [0,1] scaled by 255 and rounded.
void write_png_rgb(const std::string& path, const ImageBuffer& img);
void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& gray);
// Indexed palette PNG for label maps (index 0 = background).
void write_png_indexed(const std::string& path, int width, int height,
                       const std::vector<uint8_t>& indices);
ImageBuffer read_png_rgb(const std::string& path);
std::vector<uint8_t> read_png_indexed(const std::string& path, int* width, int* height);

// Normalized grayscale visualization of a depth map (min-max over valid pixels).
std::vector<uint8_t> depth_to_gray(const DepthMap& depth);

// Small file helpers.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

// FNV-1a over a file's raw bytes, hex-encoded; used for artifact provenance.
std::string file_content_hash(const std::string& path);
std::string hash_hex(uint64_t h);

}  // namespace scd
