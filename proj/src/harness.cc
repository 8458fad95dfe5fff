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

#include "patchdef/harness.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "patchdef/analyzer.h"
#include "patchdef/fileutil.h"

namespace patchdef {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<double> Ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Cell(const std::optional<double>& v) {
  return FormatReal(v.value_or(std::numeric_limits<double>::quiet_NaN()));
}

// Running mean over the defined values.
struct MeanAcc {
  double sum = 0.0;
  std::size_t n = 0;
  void Add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  double Mean() const { return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN(); }
};

json PatchToJson(const PatchSpec& p) {
  return json{{"size", p.size},
              {"placement", p.placement == Placement::kFixed ? "fixed" : "random"},
              {"row", p.row},
              {"col", p.col},
              {"kind", std::string(ToString(p.kind))},
              {"seed", p.seed},
              {"constant_value", p.constant_value},
              {"bounds",
               {{"mean_diff_low", p.bounds.mean_diff_low},
                {"mean_diff_high", p.bounds.mean_diff_high},
                {"std_ratio_low", p.bounds.std_ratio_low},
                {"std_ratio_high", p.bounds.std_ratio_high},
                {"n_fragments", p.bounds.n_fragments},
                {"fragment_size", p.bounds.fragment_size},
                {"tolerance", p.bounds.tolerance},
                {"field", p.bounds.field == AdaptiveField::kWhiteNoise ? "noise" : "host"}}}};
}

PatchSpec PatchFromJson(const json& j) {
  PatchSpec p;
  p.size = j.at("size").get<int>();
  p.placement = j.at("placement").get<std::string>() == "fixed" ? Placement::kFixed
                                                                : Placement::kRandom;
  p.row = j.at("row").get<int>();
  p.col = j.at("col").get<int>();
  p.kind = ParsePatchKind(j.at("kind").get<std::string>());
  p.seed = j.at("seed").get<std::uint64_t>();
  p.constant_value = j.at("constant_value").get<double>();
  const json& b = j.at("bounds");
  p.bounds.mean_diff_low = b.at("mean_diff_low").get<double>();
  p.bounds.mean_diff_high = b.at("mean_diff_high").get<double>();
  p.bounds.std_ratio_low = b.at("std_ratio_low").get<double>();
  p.bounds.std_ratio_high = b.at("std_ratio_high").get<double>();
  p.bounds.n_fragments = b.at("n_fragments").get<int>();
  p.bounds.fragment_size = b.at("fragment_size").get<int>();
  p.bounds.tolerance = b.at("tolerance").get<double>();
  const std::string field = b.value("field", std::string("host"));
  if (field != "host" && field != "noise") throw Error("unknown adaptive field: " + field);
  p.bounds.field = field == "noise" ? AdaptiveField::kWhiteNoise : AdaptiveField::kHostTexture;
  return p;
}

}  // namespace

std::vector<bool> TruthPositiveSegments(const PixelMask& truth, const SegmentGrid& grid,
                                        double overlap_fraction) {
  if (truth.height() != grid.source_height() || truth.width() != grid.source_width()) {
    throw DimensionError("truth mask does not match the segmented image");
  }
  const int k = grid.kernel();
  const double area = static_cast<double>(k) * k;
  std::vector<bool> positive(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Segment& s = grid[i];
    std::size_t inside = 0;
    for (int r = s.origin_row; r < s.origin_row + k; ++r) {
      for (int c = s.origin_col; c < s.origin_col + k; ++c) inside += truth.at(r, c);
    }
    positive[i] = inside > 0 && static_cast<double>(inside) >= overlap_fraction * area;
  }
  return positive;
}

DetectionMetrics Score(const DefenseOutcome& outcome, const PixelMask& truth,
                       const SegmentGrid& grid, double overlap_fraction) {
  if (!truth.SameShape(outcome.anomaly_mask)) {
    throw DimensionError("truth mask and anomaly mask differ in shape");
  }
  if (outcome.labels.size() != grid.size()) {
    throw DimensionError("outcome labels do not match the segment grid");
  }
  const std::vector<bool> positive = TruthPositiveSegments(truth, grid, overlap_fraction);
  std::vector<bool> flagged(grid.size(), false);
  for (std::size_t idx : outcome.anomalous_segments) flagged.at(idx) = true;

  DetectionMetrics m;
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    m.flagged += flagged[i];
    m.truth_positive += positive[i];
    negatives += !positive[i];
    if (flagged[i] && positive[i]) ++m.true_positives;
    if (flagged[i] && !positive[i]) ++m.false_positives;
    if (!flagged[i] && positive[i]) ++m.false_negatives;
  }
  m.clean_fp_segment_rate = Ratio(m.false_positives, negatives);

  const std::size_t truth_pixels = truth.count();
  if (truth_pixels == 0) return m;

  m.segment_precision = Ratio(m.true_positives, m.flagged);
  m.segment_recall = Ratio(m.true_positives, m.truth_positive);
  const std::size_t inter = IntersectionCount(outcome.anomaly_mask, truth);
  m.pixel_iou = Ratio(inter, UnionCount(outcome.anomaly_mask, truth));
  m.patch_pixel_recall = Ratio(inter, truth_pixels);
  return m;
}

std::vector<double> CoreDistances(std::span<const PointView> points, int k,
                                  DistanceKind kind) {
  if (points.empty()) return {};
  const std::size_t n = points.size();
  const auto rank = static_cast<std::size_t>(std::clamp<long>(k, 1, static_cast<long>(n))) - 1;
  const DistanceMatrix dist(points, kind);
  std::vector<double> out(n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = i == j ? 0.0 : dist(i, j);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(rank), row.end());
    out[i] = row[rank];
  }
  return out;
}

double Percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw Error("percentile of an empty sample");
  if (!(pct >= 0.0 && pct <= 100.0)) throw Error("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Calibration CalibrateImages(const std::vector<Image>& images, const DefenseConfig& cfg,
                            double percentile) {
  if (images.empty()) throw Error("calibration needs at least one clean image");
  std::vector<double> pooled;
  std::size_t min_segments = std::numeric_limits<std::size_t>::max();
  for (const Image& img : images) {
    const SegmentGrid grid = SegmentImage(img, cfg.kernel, cfg.stride);
    const auto vectors = grid.Vectors();
    const int k = cfg.min_pts.Resolve(grid.size());
    const std::vector<double> core = CoreDistances(vectors, k, cfg.distance);
    pooled.insert(pooled.end(), core.begin(), core.end());
    min_segments = std::min(min_segments, grid.size());
  }
  Calibration cal;
  cal.params.min_pts = cfg.min_pts.Resolve(min_segments);
  cal.params.eps = Percentile(std::move(pooled), percentile);
  if (cal.params.eps < kMinimumEps) {
    std::ostringstream msg;
    msg << "calibrated eps " << cal.params.eps << " is degenerate; using floor "
        << kMinimumEps;
    cal.warnings.push_back(msg.str());
    cal.params.eps = kMinimumEps;
  }
  return cal;
}

Calibration Calibrate(const fs::path& clean_dir, const DefenseConfig& cfg,
                      double percentile) {
  const auto files = ListPngFiles(clean_dir);
  if (files.empty()) throw Error("calibration corpus is empty: " + clean_dir.string());
  std::vector<Image> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(LoadImage(f));
  return CalibrateImages(images, cfg, percentile);
}

std::string ManifestToJson(const RunManifest& m) {
  json j;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  j["corpus_dir"] = m.corpus_dir;
  j["corpus"] = m.corpus;
  j["config"] = {{"kernel", m.config.kernel},
                 {"stride", m.config.stride},
                 {"eps", m.config.eps},
                 {"min_pts", m.config.min_pts.ToString()},
                 {"replacement", std::string(ToString(m.config.replacement))},
                 {"distance", std::string(ToString(m.config.distance))},
                 {"overlap", std::string(ToString(m.config.overlap))},
                 {"shrinkage_lambda", m.config.shrinkage_lambda}};
  j["patch"] = PatchToJson(m.patch);
  j["patch_sizes"] = m.patch_sizes;
  j["calibrate_eps"] = m.calibrate_eps;
  j["eps_percentile"] = m.eps_percentile;
  j["overlap_fraction"] = m.overlap_fraction;
  j["histogram_bins"] = m.histogram_bins;
  return j.dump(2) + "\n";
}

RunManifest ManifestFromJson(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.corpus_dir = j.at("corpus_dir").get<std::string>();
    m.corpus = j.at("corpus").get<std::vector<std::string>>();
    const json& c = j.at("config");
    m.config.kernel = c.at("kernel").get<int>();
    m.config.stride = c.at("stride").get<int>();
    m.config.eps = c.at("eps").get<double>();
    m.config.min_pts = MinPts::Parse(c.at("min_pts").get<std::string>());
    m.config.replacement = ParseReplacementMode(c.at("replacement").get<std::string>());
    m.config.distance = ParseDistanceKind(c.at("distance").get<std::string>());
    m.config.overlap = ParseOverlapStrategy(c.at("overlap").get<std::string>());
    m.config.shrinkage_lambda = c.at("shrinkage_lambda").get<double>();
    m.patch = PatchFromJson(j.at("patch"));
    m.patch_sizes = j.at("patch_sizes").get<std::vector<int>>();
    m.calibrate_eps = j.at("calibrate_eps").get<bool>();
    m.eps_percentile = j.at("eps_percentile").get<double>();
    m.overlap_fraction = j.at("overlap_fraction").get<double>();
    m.histogram_bins = j.at("histogram_bins").get<int>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

EvaluationSummary Evaluate(RunManifest manifest, const fs::path& out_dir, int workers) {
  manifest.config.Validate();
  const fs::path corpus_dir(manifest.corpus_dir);
  if (manifest.corpus.empty()) {
    for (const auto& f : ListPngFiles(corpus_dir)) {
      manifest.corpus.push_back(f.filename().string());
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }

  const std::size_t n = manifest.corpus.size();
  std::vector<std::optional<Image>> hosts(n);
  std::vector<std::string> load_errors(n);
  ParallelFor(n, workers, [&](std::size_t i) {
    try {
      hosts[i] = LoadImage(corpus_dir / manifest.corpus[i]);
    } catch (const std::exception& e) {
      load_errors[i] = e.what();
    }
  });

  DefenseConfig cfg = manifest.config;
  if (manifest.calibrate_eps) {
    std::vector<Image> clean;
    for (const auto& h : hosts) {
      if (h) clean.push_back(*h);
    }
    const Calibration cal = CalibrateImages(clean, cfg, manifest.eps_percentile);
    for (const auto& w : cal.warnings) std::cerr << "warning: " << w << '\n';
    cfg.eps = cal.params.eps;
  }

  EvaluationSummary summary;
  summary.effective_config = cfg;
  summary.rows.resize(n);
  std::vector<std::vector<double>> sample_clean(n), sample_patched(n);

  ParallelFor(n, workers, [&](std::size_t i) {
    EvaluationRow& row = summary.rows[i];
    row.file = manifest.corpus[i];
    if (!hosts[i]) {
      row.error = load_errors[i];
      return;
    }
    try {
      const Image& host = *hosts[i];
      const SegmentGrid clean_grid = SegmentImage(host, cfg.kernel, cfg.stride);
      const DefenseOutcome clean = DefendSegments(host, clean_grid, cfg);
      row.clean_fp_rate = Ratio(clean.anomalous_segments.size(), clean_grid.size());

      PatchSpec spec = manifest.patch;
      spec.seed = MixSeed(manifest.seed, i);
      if (!manifest.patch_sizes.empty()) {
        spec.size = manifest.patch_sizes[i % manifest.patch_sizes.size()];
      }
      const PatchedImage patched = MakePatch(spec, host);
      const SegmentGrid grid = SegmentImage(patched.composed, cfg.kernel, cfg.stride);
      const DefenseOutcome outcome = DefendSegments(patched.composed, grid, cfg);
      row.patched = Score(outcome, patched.mask, grid, manifest.overlap_fraction);

      if (i == 0) {
        FitOptions fit;
        fit.lambda = cfg.shrinkage_lambda;
        const auto cv = clean_grid.Vectors();
        sample_clean[i] = MahalanobisAll(SegmentDistribution::Fit(cv, fit), cv);
        const auto pv = grid.Vectors();
        sample_patched[i] = MahalanobisAll(SegmentDistribution::Fit(pv, fit), pv);
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });

  MeanAcc precision, recall, iou, pixel_recall, clean_fp;
  std::ostringstream metrics;
  metrics << kMetricsHeader << '\n';
  std::ostringstream failures;
  for (const auto& row : summary.rows) {
    if (!row.ok) {
      failures << row.file << ": " << row.error << '\n';
      std::cerr << "evaluate: " << row.file << ": " << row.error << '\n';
    }
    const DetectionMetrics& m = row.patched;
    metrics << row.file << ',' << Cell(m.segment_precision) << ','
            << Cell(m.segment_recall) << ',' << Cell(m.pixel_iou) << ','
            << Cell(m.patch_pixel_recall) << ',' << Cell(row.clean_fp_rate) << '\n';
    precision.Add(m.segment_precision);
    recall.Add(m.segment_recall);
    iou.Add(m.pixel_iou);
    pixel_recall.Add(m.patch_pixel_recall);
    clean_fp.Add(row.clean_fp_rate);
  }
  summary.mean_seg_precision = precision.Mean();
  summary.mean_seg_recall = recall.Mean();
  summary.mean_pixel_iou = iou.Mean();
  summary.mean_patch_pixel_recall = pixel_recall.Mean();
  summary.mean_clean_fp_rate = clean_fp.Mean();

  std::ostringstream aggregate;
  aggregate << kAggregateHeader << '\n';
  auto agg_row = [&](const char* name, const MeanAcc& acc) {
    aggregate << name << ',' << FormatReal(acc.Mean()) << ',' << acc.n << '\n';
  };
  agg_row("seg_precision", precision);
  agg_row("seg_recall", recall);
  agg_row("pixel_iou", iou);
  agg_row("patch_pixel_recall", pixel_recall);
  agg_row("clean_fp_rate", clean_fp);
  aggregate << "effective_eps," << FormatReal(cfg.eps, 9) << ",1\n";

  WriteTextAtomically(out_dir / "metrics.csv", metrics.str());
  WriteTextAtomically(out_dir / "aggregate.csv", aggregate.str());
  WriteTextAtomically(out_dir / "manifest.json", ManifestToJson(manifest));
  if (!failures.str().empty()) WriteTextAtomically(out_dir / "failures.txt", failures.str());
  if (n > 0 && !sample_clean[0].empty()) {
    ExportHistogram(sample_clean[0], out_dir / "hist_clean.csv", manifest.histogram_bins);
    ExportHistogram(sample_patched[0], out_dir / "hist_patched.csv", manifest.histogram_bins);
  }
  return summary;
}

}  // namespace patchdef
