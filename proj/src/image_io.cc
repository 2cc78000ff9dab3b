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

#include "rccpath/image_io.h"

#include <openssl/evp.h>
#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "json.hpp"
#include "rccpath/error.h"

namespace rccpath {
namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kNotFound, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  require(in.good() || size == 0, ErrorCode::kIoError, "short read from " + path.string());
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::kIoError, "short write to " + path.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

namespace {

// Reads the next whitespace-delimited PPM header token, skipping comments.
std::string next_ppm_token(const std::vector<std::uint8_t>& data, std::size_t& pos) {
  while (pos < data.size()) {
    if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(data[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < data.size() && !std::isspace(data[pos]) && data[pos] != '#') {
    token.push_back(static_cast<char>(data[pos++]));
  }
  return token;
}

int parse_header_int(const std::string& token, const fs::path& path) {
  require(!token.empty() && token.find_first_not_of("0123456789") == std::string::npos,
          ErrorCode::kInvalidInput, "malformed PPM header in " + path.string());
  return std::stoi(token);
}

}  // namespace

RgbImage read_ppm(const fs::path& path) {
  const auto data = read_file_bytes(path);
  std::size_t pos = 0;
  require(next_ppm_token(data, pos) == "P6", ErrorCode::kInvalidInput,
          path.string() + " is not a binary PPM (P6)");
  const int width = parse_header_int(next_ppm_token(data, pos), path);
  const int height = parse_header_int(next_ppm_token(data, pos), path);
  const int maxval = parse_header_int(next_ppm_token(data, pos), path);
  require(maxval == 255, ErrorCode::kInvalidInput, "only 8-bit PPM is supported");
  ++pos;  // single whitespace byte before the raster
  RgbImage image(width, height);
  require(data.size() >= pos + image.pixels.size(), ErrorCode::kInvalidInput,
          "truncated PPM raster in " + path.string());
  std::memcpy(image.pixels.data(), data.data() + pos, image.pixels.size());
  return image;
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  write_file_bytes(path, bytes);
}

RgbImage read_png(const fs::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(ErrorCode::kInvalidInput, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage image(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    fail(ErrorCode::kInvalidInput, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  return image;
}

void write_png(const fs::path& path, const RgbImage& image) {
  require(!image.empty(), ErrorCode::kInvalidInput, "cannot write an empty PNG");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kIoError, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

RgbImage read_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kNotFound, "cannot open " + path.string());
  unsigned char magic[8] = {};
  in.read(reinterpret_cast<char*>(magic), sizeof(magic));
  static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (in.gcount() == 8 && std::memcmp(magic, kPngMagic, 8) == 0) return read_png(path);
  if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
  fail(ErrorCode::kInvalidInput, path.string() + " is neither PNG nor binary PPM");
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kIoError, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_pyramid(const SlidePyramid& pyramid, const fs::path& dir) {
  fs::create_directories(dir);
  const SlideInfo& info = pyramid.info();
  json manifest;
  manifest["slide_id"] = info.slide_id;
  manifest["case_id"] = info.case_id;
  manifest["mpp_base"] = info.mpp_base;
  manifest["magnification_base"] = info.magnification_base;
  manifest["tile_size"] = info.tile_size;
  json levels = json::array();
  for (const Level& level : pyramid.levels()) {
    levels.push_back({{"index", level.index}, {"width", level.width}, {"height", level.height}});
    const fs::path level_dir = dir / ("L" + std::to_string(level.index));
    fs::create_directories(level_dir);
    for (int row = 0; row < level.tile_rows; ++row) {
      for (int col = 0; col < level.tile_cols; ++col) {
        write_file_bytes(level_dir / (std::to_string(row) + "_" + std::to_string(col) + ".rgb"),
                         level.tile(row, col));
      }
    }
  }
  manifest["levels"] = std::move(levels);
  if (!info.ground_truth.empty()) {
    json gt = json::object();
    if (info.ground_truth.subtype) gt["subtype"] = *info.ground_truth.subtype;
    if (info.ground_truth.isup_grade) gt["isup_grade"] = *info.ground_truth.isup_grade;
    manifest["ground_truth"] = std::move(gt);
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

SlidePyramid load_pyramid(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  require(fs::exists(manifest_path), ErrorCode::kNotFound,
          "no pyramid manifest at " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, "bad pyramid manifest " + manifest_path.string() + ": " + e.what());
  }

  SlideInfo info;
  std::vector<Level> levels;
  try {
    info.slide_id = manifest.at("slide_id").get<std::string>();
    info.case_id = manifest.at("case_id").get<std::string>();
    info.mpp_base = manifest.at("mpp_base").get<double>();
    info.magnification_base = manifest.at("magnification_base").get<double>();
    info.tile_size = manifest.at("tile_size").get<int>();
    if (manifest.contains("ground_truth")) {
      const json& gt = manifest["ground_truth"];
      if (gt.contains("subtype")) info.ground_truth.subtype = gt["subtype"].get<std::string>();
      if (gt.contains("isup_grade")) info.ground_truth.isup_grade = gt["isup_grade"].get<int>();
    }
    require(info.tile_size > 0, ErrorCode::kInvalidInput, "tile_size must be positive");
    const std::size_t tile_bytes = static_cast<std::size_t>(info.tile_size) * info.tile_size * 3;
    for (const json& entry : manifest.at("levels")) {
      Level level;
      level.index = entry.at("index").get<int>();
      level.width = entry.at("width").get<int>();
      level.height = entry.at("height").get<int>();
      level.tile_size = info.tile_size;
      level.tile_cols = (level.width + info.tile_size - 1) / info.tile_size;
      level.tile_rows = (level.height + info.tile_size - 1) / info.tile_size;
      const fs::path level_dir = dir / ("L" + std::to_string(level.index));
      for (int row = 0; row < level.tile_rows; ++row) {
        for (int col = 0; col < level.tile_cols; ++col) {
          auto bytes = read_file_bytes(level_dir / (std::to_string(row) + "_" + std::to_string(col) + ".rgb"));
          require(bytes.size() == tile_bytes, ErrorCode::kInvalidInput,
                  "tile " + std::to_string(row) + "_" + std::to_string(col) + " of level " +
                      std::to_string(level.index) + " has wrong size");
          level.tiles.push_back(std::move(bytes));
        }
      }
      levels.push_back(std::move(level));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, "bad pyramid manifest " + manifest_path.string() + ": " + e.what());
  }
  return SlidePyramid(std::move(info), std::move(levels));
}

}  // namespace rccpath
