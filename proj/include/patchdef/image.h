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

#ifndef PATCHDEF_IMAGE_H_
#define PATCHDEF_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace patchdef {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// H x W x C raster with intensities in [0, 1], stored row-major with the
// channel index varying fastest.
class Image {
 public:
  Image() = default;
  // Zero-filled image. Throws DimensionError on zero extents or channels
  // other than 1 and 3.
  Image(int height, int width, int channels);
  // Takes ownership of `data`; validates length and range.
  Image(int height, int width, int channels, std::vector<double> data);

  static Image Filled(int height, int width, int channels, double value);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const { return data_.empty(); }

  std::size_t index(int row, int col, int channel = 0) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + channel;
  }
  double at(int row, int col, int channel = 0) const {
    return data_[index(row, col, channel)];
  }
  // Caller keeps values in [0, 1]; use Clamp01 when in doubt.
  double& at(int row, int col, int channel = 0) {
    return data_[index(row, col, channel)];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }

  bool SameShape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Binary per-pixel mask. Stored as bytes holding 0 or 1.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int height, int width, bool value = false);

  int height() const { return height_; }
  int width() const { return width_; }

  bool at(int row, int col) const {
    return bits_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  void set(int row, int col, bool value = true) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0;
  }
  // Sets the axis-aligned rectangle [row, row+h) x [col, col+w).
  void SetRect(int row, int col, int h, int w, bool value = true);

  std::size_t count() const;
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool SameShape(const Image& img) const {
    return height_ == img.height() && width_ == img.width();
  }
  bool SameShape(const PixelMask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  PixelMask& operator|=(const PixelMask& other);
  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

std::size_t IntersectionCount(const PixelMask& a, const PixelMask& b);
std::size_t UnionCount(const PixelMask& a, const PixelMask& b);

inline double Clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Lossless raster I/O. PNG is the only image container; 8-bit samples map
// to v/255 and 16-bit samples to v/65535. Alpha is discarded and palette
// images are expanded to RGB. JPEG and other lossy inputs are rejected.
Image LoadImage(const std::filesystem::path& path);
void SaveImage(const Image& img, const std::filesystem::path& path);

// Masks are written as single-channel 8-bit PNGs holding {0, 255}. Loading
// accepts such PNGs or a plain-text matrix (".txt": one row per line,
// whitespace-separated 0/1 entries).
PixelMask LoadMask(const std::filesystem::path& path);
void SaveMask(const PixelMask& mask, const std::filesystem::path& path);

// out = (1 - mask) * x + mask * patch, pixelwise across all channels.
Image ComposeWithMask(const Image& x, const Image& patch, const PixelMask& mask);

}  // namespace patchdef

#endif  // PATCHDEF_IMAGE_H_
