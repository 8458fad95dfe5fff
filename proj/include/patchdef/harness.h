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

#ifndef PATCHDEF_HARNESS_H_
#define PATCHDEF_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "patchdef/attacksim.h"
#include "patchdef/clustering.h"
#include "patchdef/config.h"
#include "patchdef/defense.h"

namespace patchdef {

inline constexpr const char* kToolVersion = "patchdef 1.0.0";
inline constexpr const char* kMetricsHeader =
    "file,seg_precision,seg_recall,pixel_iou,patch_pixel_recall,clean_fp_rate";
inline constexpr const char* kAggregateHeader = "metric,mean,count";
inline constexpr double kDefaultOverlapFraction = 0.25;
inline constexpr double kDefaultEpsPercentile = 95.0;
inline constexpr double kMinimumEps = 1e-6;

// Unset fields are not applicable for the image (e.g. recall without any
// ground-truth positives).
struct DetectionMetrics {
  std::optional<double> segment_precision;
  std::optional<double> segment_recall;
  std::optional<double> pixel_iou;
  std::optional<double> patch_pixel_recall;
  // False positives over ground-truth-negative segments; with an empty truth
  // mask this is the flagged fraction.
  std::optional<double> clean_fp_segment_rate;

  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t flagged = 0;
  std::size_t truth_positive = 0;
};

// A segment is ground-truth positive when at least `overlap_fraction` of its
// footprint lies inside `truth`.
DetectionMetrics Score(const DefenseOutcome& outcome, const PixelMask& truth,
                       const SegmentGrid& grid,
                       double overlap_fraction = kDefaultOverlapFraction);

// Per-segment ground-truth labels under the same rule as Score.
std::vector<bool> TruthPositiveSegments(const PixelMask& truth, const SegmentGrid& grid,
                                        double overlap_fraction = kDefaultOverlapFraction);

struct Calibration {
  ClusterParams params;
  std::vector<std::string> warnings;
};

// Distance from each point to its k-th closest point, the point itself
// counting as the first (so a point is core exactly when eps >= this value).
std::vector<double> CoreDistances(std::span<const PointView> points, int k,
                                  DistanceKind kind);

// Linear-interpolated percentile (0..100) of `values`.
double Percentile(std::vector<double> values, double pct);

// eps = `percentile`-th percentile of per-segment core distances pooled over
// all images, with k = minPts resolved per image; minPts is reported for the
// smallest segment count in the corpus. eps is floored at 1e-6.
Calibration CalibrateImages(const std::vector<Image>& images, const DefenseConfig& cfg,
                            double percentile = kDefaultEpsPercentile);
Calibration Calibrate(const std::filesystem::path& clean_dir, const DefenseConfig& cfg,
                      double percentile = kDefaultEpsPercentile);

// Everything needed to reproduce an evaluate run.
struct RunManifest {
  DefenseConfig config;
  PatchSpec patch;
  // Patch side per image cycles through this list; empty means patch.size.
  std::vector<int> patch_sizes;
  std::vector<std::string> corpus;  // file names inside corpus_dir
  std::string corpus_dir;
  std::uint64_t seed = 0;
  bool calibrate_eps = false;
  double eps_percentile = kDefaultEpsPercentile;
  double overlap_fraction = kDefaultOverlapFraction;
  int histogram_bins = 30;
  std::string tool_version = kToolVersion;
};

std::string ManifestToJson(const RunManifest& manifest);
RunManifest ManifestFromJson(const std::string& text);

struct EvaluationRow {
  std::string file;
  bool ok = false;
  std::string error;
  DetectionMetrics patched;
  std::optional<double> clean_fp_rate;
};

struct EvaluationSummary {
  std::vector<EvaluationRow> rows;
  DefenseConfig effective_config;  // after optional eps calibration
  double mean_seg_precision = 0.0;
  double mean_seg_recall = 0.0;
  double mean_pixel_iou = 0.0;
  double mean_patch_pixel_recall = 0.0;
  double mean_clean_fp_rate = 0.0;
};

// Clean pass plus patched pass per image. Writes metrics.csv, aggregate.csv,
// manifest.json, hist_clean.csv and hist_patched.csv (Mahalanobis distances
// of the first image) into out_dir, plus failures.txt when any image failed.
// When manifest.corpus is empty it is filled from the PNG files of
// corpus_dir. Images are processed on up to `workers` threads; outputs do
// not depend on the worker count.
EvaluationSummary Evaluate(RunManifest manifest, const std::filesystem::path& out_dir,
                           int workers = 1);

}  // namespace patchdef

#endif  // PATCHDEF_HARNESS_H_
