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

#ifndef PATCHDEF_DEFENSE_H_
#define PATCHDEF_DEFENSE_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "patchdef/clustering.h"
#include "patchdef/config.h"
#include "patchdef/image.h"
#include "patchdef/segmenter.h"

namespace patchdef {

struct PhaseTiming {
  double segment_ms = 0.0;
  double cluster_ms = 0.0;
  double block_ms = 0.0;
};

struct DefenseOutcome {
  Image sanitized;
  PixelMask anomaly_mask;
  std::vector<std::size_t> anomalous_segments;  // ascending
  ClusterLabels labels;
  std::size_t segment_count = 0;
  int resolved_min_pts = 0;
  // Every segment came back as Noise; usually a sign that minPts exceeds
  // the segment count or eps is far too small.
  bool all_noise = false;
  std::vector<std::string> diagnostics;
  PhaseTiming timing;
};

// Fills every pixel of the segment, per channel, with that channel's
// min/mean/max over the segment.
Segment ReplaceSegment(const Segment& seg, ReplacementMode mode, int channels);

// Segment -> cluster -> block.
DefenseOutcome Defend(const Image& img, const DefenseConfig& cfg);
// Cluster and block an already segmented image. `grid` must come from `img`
// with cfg.kernel / cfg.stride.
DefenseOutcome DefendSegments(const Image& img, const SegmentGrid& grid,
                              const DefenseConfig& cfg);

struct BatchRow {
  std::string file;
  bool ok = false;
  std::string error;
  std::size_t n_segments = 0;
  std::size_t n_anomalous = 0;
  double anomaly_pixel_fraction = 0.0;
  PhaseTiming timing;
  bool all_noise = false;
};

struct BatchSummary {
  std::vector<BatchRow> rows;  // input order
  std::filesystem::path summary_csv;
};

inline constexpr const char* kDefendSummaryHeader =
    "file,n_segments,n_anomalous,anomaly_pixel_fraction,seg_ms,cluster_ms,block_ms";

// For each input writes <stem>_sanitized.png and <stem>_mask.png into
// `out_dir`, plus summary.csv. A failing file leaves empty numeric fields in
// its row and the batch continues. Up to `workers` images run concurrently;
// rows stay in input order.
BatchSummary DefendBatch(const std::vector<std::filesystem::path>& inputs,
                         const DefenseConfig& cfg,
                         const std::filesystem::path& out_dir, int workers = 1);

// Runs fn(i) for i in [0, count) on up to `workers` threads. Exceptions
// escaping fn are rethrown on the caller after all work stops.
void ParallelFor(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace patchdef

#endif  // PATCHDEF_DEFENSE_H_
