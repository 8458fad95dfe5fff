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

#include "patchdef/segmenter.h"

#include <algorithm>
#include <string>

namespace patchdef {

SegmentGrid::SegmentGrid(std::vector<Segment> segments, int kernel, int stride,
                         int height, int width, int channels, int rows, int cols)
    : segments_(std::move(segments)),
      kernel_(kernel),
      stride_(stride),
      height_(height),
      width_(width),
      channels_(channels),
      rows_(rows),
      cols_(cols) {}

std::vector<std::span<const double>> SegmentGrid::Vectors() const {
  std::vector<std::span<const double>> out;
  out.reserve(segments_.size());
  for (const auto& s : segments_) out.emplace_back(s.vector);
  return out;
}

int WindowsAlong(int extent, int kernel, int stride) {
  return (extent - kernel) / stride + 1;
}

SegmentGrid SegmentImage(const Image& img, int kernel, int stride) {
  if (img.empty()) throw DimensionError("cannot segment an empty image");
  if (stride < 1) throw DimensionError("stride must be at least 1");
  if (kernel < 1 || kernel > std::min(img.height(), img.width())) {
    throw DimensionError("kernel " + std::to_string(kernel) +
                         " does not fit a " + std::to_string(img.height()) +
                         "x" + std::to_string(img.width()) + " image");
  }
  const int rows = WindowsAlong(img.height(), kernel, stride);
  const int cols = WindowsAlong(img.width(), kernel, stride);
  const int c = img.channels();
  const std::size_t row_len = static_cast<std::size_t>(kernel) * c;

  std::vector<Segment> segments;
  segments.reserve(static_cast<std::size_t>(rows) * cols);
  auto src = img.data();
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      Segment seg{i * stride, j * stride, {}};
      seg.vector.resize(row_len * kernel);
      for (int r = 0; r < kernel; ++r) {
        auto first = src.begin() + static_cast<std::ptrdiff_t>(
                                       img.index(seg.origin_row + r, seg.origin_col));
        std::copy(first, first + static_cast<std::ptrdiff_t>(row_len),
                  seg.vector.begin() + static_cast<std::ptrdiff_t>(r * row_len));
      }
      segments.push_back(std::move(seg));
    }
  }
  return SegmentGrid(std::move(segments), kernel, stride, img.height(),
                     img.width(), c, rows, cols);
}

PixelMask Footprint(const Segment& seg, const SegmentGrid& grid) {
  const int k = grid.kernel();
  if (seg.origin_row < 0 || seg.origin_col < 0 ||
      seg.origin_row + k > grid.source_height() ||
      seg.origin_col + k > grid.source_width()) {
    throw DimensionError("segment origin outside image");
  }
  PixelMask mask(grid.source_height(), grid.source_width());
  mask.SetRect(seg.origin_row, seg.origin_col, k, k);
  return mask;
}

void WriteSegment(const Segment& seg, int kernel, Image& img) {
  const int c = img.channels();
  const std::size_t row_len = static_cast<std::size_t>(kernel) * c;
  if (seg.vector.size() != row_len * kernel) {
    throw DimensionError("segment vector length does not match kernel");
  }
  if (seg.origin_row < 0 || seg.origin_col < 0 ||
      seg.origin_row + kernel > img.height() ||
      seg.origin_col + kernel > img.width()) {
    throw DimensionError("segment origin outside image");
  }
  auto dst = img.mutable_data();
  for (int r = 0; r < kernel; ++r) {
    auto first = seg.vector.begin() + static_cast<std::ptrdiff_t>(r * row_len);
    std::copy(first, first + static_cast<std::ptrdiff_t>(row_len),
              dst.begin() + static_cast<std::ptrdiff_t>(
                                img.index(seg.origin_row + r, seg.origin_col)));
  }
}

}  // namespace patchdef
