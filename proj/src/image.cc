// Copyright 2026 The patchdef Authors.
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

#include "patchdef/image.h"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "patchdef/fileutil.h"

namespace patchdef {

namespace fs = std::filesystem;

namespace {

void CheckDims(int height, int width, int channels) {
  if (height < 1 || width < 1) {
    throw DimensionError("image dimensions must be positive, got " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw DimensionError("channel count must be 1 or 3, got " +
                         std::to_string(channels));
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Owns the libpng read/write structs for the duration of one call.
struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

struct RawRaster {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

// Decodes a PNG into 8- or 16-bit gray/RGB samples; alpha is dropped.
RawRaster ReadPng(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open image: " + path.string());

  std::array<unsigned char, 8> sig{};
  std::size_t got = std::fread(sig.data(), 1, sig.size(), file.get());
  if (got >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) {
    throw IoError("lossy JPEG input is not supported: " + path.string());
  }
  if (got != sig.size() || png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    throw IoError("unsupported image format (expected PNG): " + path.string());
  }

  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("libpng initialisation failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("libpng initialisation failed");

  RawRaster raster;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(r.png))) {
    throw IoError("corrupt PNG: " + path.string());
  }
  png_init_io(r.png, file.get());
  png_set_sig_bytes(r.png, static_cast<int>(sig.size()));
  png_read_info(r.png, r.info);

  png_uint_32 width = png_get_image_width(r.png, r.info);
  png_uint_32 height = png_get_image_height(r.png, r.info);
  int color_type = png_get_color_type(r.png, r.info);
  int bit_depth = png_get_bit_depth(r.png, r.info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(r.png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (bit_depth == 16) png_set_swap(r.png);
  png_read_update_info(r.png, r.info);

  int channels = png_get_channels(r.png, r.info);
  int depth = png_get_bit_depth(r.png, r.info);
  std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);

  raster.height = static_cast<int>(height);
  raster.width = static_cast<int>(width);
  raster.channels = channels;
  raster.bit_depth = depth;
  std::size_t count = static_cast<std::size_t>(height) * width * channels;
  raster.samples.resize(count);
  if (depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      raster.samples[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) raster.samples[i] = buffer[i];
  }
  return raster;
}

void WritePng(const fs::path& path, int height, int width, int channels,
              std::span<const std::uint8_t> samples) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open for writing: " + path.string());

  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) throw IoError("libpng initialisation failed");
  w.info = png_create_info_struct(w.png);
  if (!w.info) throw IoError("libpng initialisation failed");

  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(w.png))) {
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(w.png, file.get());
  png_set_IHDR(w.png, w.info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  auto* base = const_cast<std::uint8_t*>(samples.data());
  for (int y = 0; y < height; ++y) {
    rows[y] = base + static_cast<std::size_t>(y) * width * channels;
  }
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
  if (std::fflush(file.get()) != 0) throw IoError("write failed: " + path.string());
}

std::uint8_t Quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(Clamp01(v) * 255.0));
}

}  // namespace

Image::Image(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  CheckDims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  CheckDims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw DimensionError("image data length does not match dimensions");
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DimensionError("image intensity outside [0, 1]");
    }
  }
}

Image Image::Filled(int height, int width, int channels, double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DimensionError("fill value outside [0, 1]");
  }
  Image img(height, width, channels);
  std::fill(img.data_.begin(), img.data_.end(), value);
  return img;
}

PixelMask::PixelMask(int height, int width, bool value)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw DimensionError("mask dimensions must be positive");
  }
  bits_.assign(static_cast<std::size_t>(height) * width, value ? 1 : 0);
}

void PixelMask::SetRect(int row, int col, int h, int w, bool value) {
  if (row < 0 || col < 0 || h < 0 || w < 0 || row + h > height_ ||
      col + w > width_) {
    throw DimensionError("mask rectangle outside bounds");
  }
  for (int r = row; r < row + h; ++r) {
    auto* first = bits_.data() + static_cast<std::size_t>(r) * width_ + col;
    std::fill(first, first + w, value ? 1 : 0);
  }
}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

PixelMask& PixelMask::operator|=(const PixelMask& other) {
  if (!SameShape(other)) throw DimensionError("mask shape mismatch");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

std::size_t IntersectionCount(const PixelMask& a, const PixelMask& b) {
  if (!a.SameShape(b)) throw DimensionError("mask shape mismatch");
  std::size_t n = 0;
  auto ab = a.bits();
  auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) n += (ab[i] & bb[i]);
  return n;
}

std::size_t UnionCount(const PixelMask& a, const PixelMask& b) {
  if (!a.SameShape(b)) throw DimensionError("mask shape mismatch");
  std::size_t n = 0;
  auto ab = a.bits();
  auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) n += (ab[i] | bb[i]);
  return n;
}

Image LoadImage(const fs::path& path) {
  RawRaster raw = ReadPng(path);
  if (raw.height < 1 || raw.width < 1) {
    throw DimensionError("zero-dimension image: " + path.string());
  }
  const double scale = raw.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> data(raw.samples.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = raw.samples[i] / scale;
  return Image(raw.height, raw.width, raw.channels, std::move(data));
}

void SaveImage(const Image& img, const fs::path& path) {
  if (img.empty()) throw DimensionError("cannot save an empty image");
  std::vector<std::uint8_t> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), Quantize);
  WriteAtomically(path, [&](const fs::path& tmp) {
    WritePng(tmp, img.height(), img.width(), img.channels(), bytes);
  });
}

PixelMask LoadMask(const fs::path& path) {
  if (path.extension() == ".txt") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mask: " + path.string());
    std::vector<std::vector<std::uint8_t>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::vector<std::uint8_t> row;
      int v;
      while (ss >> v) {
        if (v != 0 && v != 1) throw IoError("mask entries must be 0 or 1: " + path.string());
        row.push_back(static_cast<std::uint8_t>(v));
      }
      if (!ss.eof()) throw IoError("malformed mask row: " + path.string());
      if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) {
      throw DimensionError("zero-dimension mask: " + path.string());
    }
    PixelMask mask(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int r = 0; r < mask.height(); ++r) {
      if (static_cast<int>(rows[r].size()) != mask.width()) {
        throw DimensionError("ragged mask rows: " + path.string());
      }
      for (int c = 0; c < mask.width(); ++c) mask.set(r, c, rows[r][c] != 0);
    }
    return mask;
  }

  RawRaster raw = ReadPng(path);
  if (raw.channels != 1) throw IoError("mask PNG must be single-channel: " + path.string());
  const std::uint16_t full = raw.bit_depth == 16 ? 65535 : 255;
  PixelMask mask(raw.height, raw.width);
  for (int r = 0; r < raw.height; ++r) {
    for (int c = 0; c < raw.width; ++c) {
      std::uint16_t v = raw.samples[static_cast<std::size_t>(r) * raw.width + c];
      if (v != 0 && v != full) {
        throw IoError("mask PNG values must be 0 or full scale: " + path.string());
      }
      mask.set(r, c, v == full);
    }
  }
  return mask;
}

void SaveMask(const PixelMask& mask, const fs::path& path) {
  std::vector<std::uint8_t> bytes(mask.bits().size());
  std::transform(mask.bits().begin(), mask.bits().end(), bytes.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  WriteAtomically(path, [&](const fs::path& tmp) {
    WritePng(tmp, mask.height(), mask.width(), 1, bytes);
  });
}

Image ComposeWithMask(const Image& x, const Image& patch, const PixelMask& mask) {
  if (!x.SameShape(patch)) {
    throw DimensionError("host and patch images differ in shape");
  }
  if (!mask.SameShape(x)) {
    throw DimensionError("mask does not match image dimensions");
  }
  Image out = x;
  const int c = x.channels();
  auto dst = out.mutable_data();
  auto src = patch.data();
  auto bits = mask.bits();
  for (std::size_t p = 0; p < bits.size(); ++p) {
    if (!bits[p]) continue;
    for (int k = 0; k < c; ++k) dst[p * c + k] = src[p * c + k];
  }
  return out;
}

}  // namespace patchdef
