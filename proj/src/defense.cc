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

#include "patchdef/defense.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "patchdef/fileutil.h"

namespace patchdef {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double MillisSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Per-channel fill value of a segment.
std::vector<double> FillValues(const Segment& seg, ReplacementMode mode, int channels) {
  const std::size_t c = static_cast<std::size_t>(channels);
  const std::size_t pixels = seg.vector.size() / c;
  std::vector<double> lo(c, 1.0), hi(c, 0.0), sum(c, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t k = 0; k < c; ++k) {
      const double v = seg.vector[p * c + k];
      lo[k] = std::min(lo[k], v);
      hi[k] = std::max(hi[k], v);
      sum[k] += v;
    }
  }
  std::vector<double> fill(c);
  for (std::size_t k = 0; k < c; ++k) {
    switch (mode) {
      case ReplacementMode::kMin:
        fill[k] = lo[k];
        break;
      case ReplacementMode::kMax:
        fill[k] = hi[k];
        break;
      case ReplacementMode::kMean:
        fill[k] = std::clamp(sum[k] / static_cast<double>(pixels), lo[k], hi[k]);
        break;
    }
  }
  return fill;
}

}  // namespace

Segment ReplaceSegment(const Segment& seg, ReplacementMode mode, int channels) {
  if (channels < 1 || seg.vector.empty() ||
      seg.vector.size() % static_cast<std::size_t>(channels) != 0) {
    throw DimensionError("segment vector does not divide into channels");
  }
  const std::vector<double> fill = FillValues(seg, mode, channels);
  Segment out{seg.origin_row, seg.origin_col, std::vector<double>(seg.vector.size())};
  for (std::size_t i = 0; i < out.vector.size(); ++i) {
    out.vector[i] = fill[i % fill.size()];
  }
  return out;
}

DefenseOutcome DefendSegments(const Image& img, const SegmentGrid& grid,
                              const DefenseConfig& cfg) {
  cfg.Validate();
  if (grid.kernel() != cfg.kernel || grid.stride() != cfg.stride ||
      grid.source_height() != img.height() || grid.source_width() != img.width() ||
      grid.source_channels() != img.channels()) {
    throw DimensionError("segment grid does not belong to this image and config");
  }

  DefenseOutcome out;
  out.segment_count = grid.size();
  out.resolved_min_pts = cfg.min_pts.Resolve(grid.size());

  // Isolating phase.
  auto start = Clock::now();
  const auto vectors = grid.Vectors();
  const DistanceMatrix dist(vectors, cfg.distance);
  out.labels = Dbscan(dist, ClusterParams{cfg.eps, out.resolved_min_pts});
  out.anomalous_segments = ExtractNoise(out.labels);
  out.timing.cluster_ms = MillisSince(start);

  if (out.anomalous_segments.size() == grid.size()) {
    out.all_noise = true;
    std::ostringstream msg;
    msg << "all " << grid.size() << " segments labelled Noise (eps=" << cfg.eps
        << ", minPts=" << out.resolved_min_pts << ")";
    if (static_cast<std::size_t>(out.resolved_min_pts) > grid.size()) {
      msg << "; minPts exceeds the segment count so no core point can exist";
    }
    out.diagnostics.push_back(msg.str());
  }

  // Blocking phase.
  start = Clock::now();
  out.sanitized = img;
  out.anomaly_mask = PixelMask(img.height(), img.width());
  const int k = grid.kernel();
  const int c = img.channels();
  if (cfg.overlap == OverlapStrategy::kSequential) {
    for (std::size_t idx : out.anomalous_segments) {
      const Segment replaced = ReplaceSegment(grid[idx], cfg.replacement, c);
      WriteSegment(replaced, k, out.sanitized);
      out.anomaly_mask.SetRect(replaced.origin_row, replaced.origin_col, k, k);
    }
  } else {
    std::vector<double> acc(img.data().size(), 0.0);
    std::vector<int> cover(img.pixel_count(), 0);
    for (std::size_t idx : out.anomalous_segments) {
      const Segment& seg = grid[idx];
      const std::vector<double> fill = FillValues(seg, cfg.replacement, c);
      for (int r = seg.origin_row; r < seg.origin_row + k; ++r) {
        for (int col = seg.origin_col; col < seg.origin_col + k; ++col) {
          const std::size_t p = static_cast<std::size_t>(r) * img.width() + col;
          ++cover[p];
          for (int ch = 0; ch < c; ++ch) acc[p * c + ch] += fill[ch];
        }
      }
      out.anomaly_mask.SetRect(seg.origin_row, seg.origin_col, k, k);
    }
    auto dst = out.sanitized.mutable_data();
    for (std::size_t p = 0; p < cover.size(); ++p) {
      if (cover[p] == 0) continue;
      for (int ch = 0; ch < c; ++ch) {
        dst[p * c + ch] = Clamp01(acc[p * c + ch] / cover[p]);
      }
    }
  }
  out.timing.block_ms = MillisSince(start);
  return out;
}

DefenseOutcome Defend(const Image& img, const DefenseConfig& cfg) {
  cfg.Validate();
  const auto start = Clock::now();
  const SegmentGrid grid = SegmentImage(img, cfg.kernel, cfg.stride);
  const double seg_ms = MillisSince(start);
  DefenseOutcome out = DefendSegments(img, grid, cfg);
  out.timing.segment_ms = seg_ms;
  return out;
}

void ParallelFor(std::size_t count, int workers,
                 const std::function<void(std::size_t)>& fn) {
  const auto n_workers = static_cast<std::size_t>(std::max(1, workers));
  if (n_workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(n_workers, count); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

BatchSummary DefendBatch(const std::vector<fs::path>& inputs, const DefenseConfig& cfg,
                         const fs::path& out_dir, int workers) {
  cfg.Validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }

  BatchSummary summary;
  summary.rows.resize(inputs.size());
  ParallelFor(inputs.size(), workers, [&](std::size_t i) {
    BatchRow& row = summary.rows[i];
    row.file = inputs[i].filename().string();
    try {
      const Image img = LoadImage(inputs[i]);
      const DefenseOutcome outcome = Defend(img, cfg);
      const std::string stem = inputs[i].stem().string();
      SaveImage(outcome.sanitized, out_dir / (stem + "_sanitized.png"));
      SaveMask(outcome.anomaly_mask, out_dir / (stem + "_mask.png"));
      row.n_segments = outcome.segment_count;
      row.n_anomalous = outcome.anomalous_segments.size();
      row.anomaly_pixel_fraction = static_cast<double>(outcome.anomaly_mask.count()) /
                                   static_cast<double>(img.pixel_count());
      row.timing = outcome.timing;
      row.all_noise = outcome.all_noise;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });

  std::ostringstream csv;
  csv << kDefendSummaryHeader << '\n';
  for (const auto& row : summary.rows) {
    csv << row.file;
    if (row.ok) {
      csv << ',' << row.n_segments << ',' << row.n_anomalous << ','
          << FormatReal(row.anomaly_pixel_fraction) << ','
          << FormatReal(row.timing.segment_ms, 3) << ','
          << FormatReal(row.timing.cluster_ms, 3) << ','
          << FormatReal(row.timing.block_ms, 3);
    } else {
      csv << ",,,,,,";
    }
    csv << '\n';
  }
  summary.summary_csv = out_dir / "summary.csv";
  WriteTextAtomically(summary.summary_csv, csv.str());
  return summary;
}

}  // namespace patchdef
