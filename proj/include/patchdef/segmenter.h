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

#ifndef PATCHDEF_SEGMENTER_H_
#define PATCHDEF_SEGMENTER_H_

#include <cstddef>
#include <span>
#include <vector>

#include "patchdef/image.h"

namespace patchdef {

inline constexpr int kDefaultKernel = 40;
inline constexpr int kDefaultStride = 8;

// A kernel x kernel window flattened in (row, col, channel) order.
struct Segment {
  int origin_row = 0;
  int origin_col = 0;
  std::vector<double> vector;
};

// All full windows of an image at origins (i * stride, j * stride), ordered
// row-major by origin. Trailing pixels that no full window reaches are not
// segmented.
class SegmentGrid {
 public:
  SegmentGrid(std::vector<Segment> segments, int kernel, int stride, int height,
              int width, int channels, int rows, int cols);

  std::size_t size() const { return segments_.size(); }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }
  std::span<const Segment> segments() const { return segments_; }

  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int source_height() const { return height_; }
  int source_width() const { return width_; }
  int source_channels() const { return channels_; }
  // Window origins per axis.
  int grid_rows() const { return rows_; }
  int grid_cols() const { return cols_; }
  std::size_t vector_length() const {
    return static_cast<std::size_t>(kernel_) * kernel_ * channels_;
  }

  // Views onto the segment vectors, in grid order.
  std::vector<std::span<const double>> Vectors() const;

 private:
  std::vector<Segment> segments_;
  int kernel_;
  int stride_;
  int height_;
  int width_;
  int channels_;
  int rows_;
  int cols_;
};

// Closed-form window count along one axis: floor((extent - kernel) / stride) + 1.
int WindowsAlong(int extent, int kernel, int stride);

// Throws DimensionError if kernel is outside [1, min(H, W)] or stride < 1.
SegmentGrid SegmentImage(const Image& img, int kernel, int stride);

// Mask of the kernel x kernel region covered by `seg`.
PixelMask Footprint(const Segment& seg, const SegmentGrid& grid);

// Copies a (possibly modified) segment vector back into the image at the
// segment's origin.
void WriteSegment(const Segment& seg, int kernel, Image& img);

}  // namespace patchdef

#endif  // PATCHDEF_SEGMENTER_H_
