// Copyright 2026 The rccpath Authors. All Rights Reserved.
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

// Flat raster file formats and pyramid persistence.
//
// On-disk pyramid layout:
//   <dir>/manifest.json        slide metadata and level dimensions
//   <dir>/L{index}/{row}_{col}.rgb
// Each tile file is raw interleaved RGB8, row-major, exactly
// tile_size * tile_size * 3 bytes; edge tiles carry their zero padding.

#ifndef RCCPATH_IMAGE_IO_H_
#define RCCPATH_IMAGE_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rccpath/image.h"
#include "rccpath/slide_store.h"

namespace rccpath {

RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// Dispatches on the file's magic bytes (P6 or PNG signature).
RgbImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

void save_pyramid(const SlidePyramid& pyramid, const std::filesystem::path& dir);
SlidePyramid load_pyramid(const std::filesystem::path& dir);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);

}  // namespace rccpath

#endif  // RCCPATH_IMAGE_IO_H_
