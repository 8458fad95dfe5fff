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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass a criterion number to run only that
// one, e.g. `patchdef_acceptance 6`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "patchdef/analyzer.h"
#include "patchdef/attacksim.h"
#include "patchdef/defense.h"
#include "patchdef/harness.h"
#include "support.h"

using namespace patchdef;
using Points = std::vector<std::vector<double>>;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. DBSCAN against the brute-force oracle.
Verdict DbscanOracle() {
  const auto start = Clock::now();
  Rng rng(20240601);
  const int instances = 250;
  int matched = 0;
  std::string first_failure;
  for (int t = 0; t < instances; ++t) {
    const auto n = static_cast<std::size_t>(rng.UniformInt(1, 200));
    const auto d = static_cast<std::size_t>(rng.UniformInt(1, 16));
    // Mixture of tight blobs and uniform clutter so every regime shows up.
    const int centres = rng.UniformInt(1, 5);
    const double spread = 0.01 + 0.1 * rng.Uniform();
    Points ctr(centres, std::vector<double>(d));
    for (auto& c : ctr)
      for (double& v : c) v = rng.Uniform();
    Points pts(n, std::vector<double>(d));
    for (auto& p : pts) {
      if (rng.Uniform() < 0.25) {
        for (double& v : p) v = rng.Uniform();
      } else {
        const auto& c = ctr[rng.UniformInt(0, centres - 1)];
        for (std::size_t j = 0; j < d; ++j)
          p[j] = c[j] + spread * testing::Gaussian([&] { return rng.Uniform(); });
      }
    }
    const double eps = 0.005 + 0.3 * rng.Uniform();
    const int min_pts = rng.UniformInt(1, std::max(1, static_cast<int>(n) / 4));
    const auto views = testing::Views(pts);
    const ClusterParams params{eps, min_pts};
    // Alternate between the two public entry points.
    const ClusterLabels labels = (t % 2 == 0)
                                     ? Dbscan(views, params)
                                     : Dbscan(DistanceMatrix(views, DistanceKind::kRms), params);
    std::string why;
    if (testing::MatchesOracle(labels, testing::OracleDbscan(pts, eps, min_pts), &why)) {
      ++matched;
    } else if (first_failure.empty()) {
      first_failure = Fmt(" (instance %d: %s)", t, why.c_str());
    }
  }
  const double secs = SecondsSince(start);
  return {matched == instances && secs < 60.0,
          Fmt("%d/%d instances match, %.1f s (< 60 s)", matched, instances, secs) + first_failure};
}

// ---------------------------------------------------------------------------
// 2. Segment count law.
Verdict CountLaw() {
  Rng rng(77);
  int ok = 0;
  const int cases = 1000;
  for (int t = 0; t < cases; ++t) {
    const int h = rng.UniformInt(1, 64), w = rng.UniformInt(1, 64);
    const int k = rng.UniformInt(1, std::min(h, w));
    const int s = rng.UniformInt(1, 20);
    const int c = rng.UniformInt(0, 1) ? 3 : 1;
    const auto grid = SegmentImage(Image(h, w, c), k, s);
    const std::size_t expect = static_cast<std::size_t>((h - k) / s + 1) * ((w - k) / s + 1);
    bool good = grid.size() == expect;
    for (const auto& seg : grid.segments())
      good = good && seg.vector.size() == static_cast<std::size_t>(k * k * c);
    ok += good ? 1 : 0;
  }
  const auto ref = SegmentImage(Image(224, 224, 3), 40, 8);
  const bool ref_ok = ref.size() == 576 && ref[0].vector.size() == 4800;
  return {ok == cases && ref_ok,
          Fmt("%d/%d random shapes exact; 224/40/8 -> %zu segments of length %zu", ok, cases,
              ref.size(), ref[0].vector.size())};
}

// ---------------------------------------------------------------------------
// 3. Mahalanobis correctness.
Verdict MahalanobisChecks() {
  Rng rng(3);
  // d_M(mu) = 0 exactly on dense, low-rank and full-size fits.
  bool zero_ok = true;
  for (auto [n, d] : {std::pair{30, 5}, std::pair{20, 60}, std::pair{576, 4800}}) {
    Points pts(n, std::vector<double>(d));
    for (auto& p : pts)
      for (double& v : p) v = rng.Uniform();
    const auto dist = SegmentDistribution::Fit(testing::Views(pts));
    const std::vector<double> mu(dist.mean().data(), dist.mean().data() + d);
    zero_ok = zero_ok && dist.Mahalanobis(mu) == 0.0;
  }

  // Hand cases. Samples chosen so the unbiased covariance is exactly diagonal.
  double worst_hand = 0.0;
  {
    const double a = std::sqrt(6.0), b = std::sqrt(1.5);  // diag(4, 1)
    const Points pts = {{a, 0.0}, {-a, 0.0}, {0.0, b}, {0.0, -b}};
    FitOptions fit;
    fit.lambda = 0.0;
    const auto dist = SegmentDistribution::Fit(testing::Views(pts), fit);
    worst_hand = std::max(worst_hand, std::fabs(dist.Mahalanobis(std::vector<double>{2.0, 3.0}) -
                                                std::sqrt(10.0)));
    // Six samples, divisor 5: 2c^2/5 = 9, 2e^2/5 = 4, 2f^2/5 = 1.
    const double c = std::sqrt(22.5), e = std::sqrt(10.0), f = std::sqrt(2.5);
    const Points p3 = {{c, 0, 0}, {-c, 0, 0}, {0, e, 0}, {0, -e, 0}, {0, 0, f}, {0, 0, -f}};
    const auto d3 = SegmentDistribution::Fit(testing::Views(p3), fit);
    // (3/3)^2 + (4/2)^2 + (1/1)^2 = 6.
    worst_hand = std::max(worst_hand, std::fabs(d3.Mahalanobis(std::vector<double>{3.0, 4.0, 1.0}) -
                                                std::sqrt(6.0)));
    const Points p1 = {{-1.0}, {0.0}, {1.0}};
    const auto d1 = SegmentDistribution::Fit(testing::Views(p1), fit);
    worst_hand = std::max(worst_hand, std::fabs(d1.Mahalanobis(std::vector<double>{0.5}) - 0.5));
  }

  // Affine invariance at lambda = 0 on 5-d well-conditioned instances.
  double worst_rel = 0.0;
  for (int t = 0; t < 50; ++t) {
    Points pts(60, std::vector<double>(5));
    for (auto& p : pts)
      for (double& v : p) v = rng.Uniform();
    double A[5][5], bvec[5];
    for (int i = 0; i < 5; ++i) {
      bvec[i] = 10.0 * (rng.Uniform() - 0.5);
      for (int j = 0; j < 5; ++j) A[i][j] = 0.5 * (rng.Uniform() - 0.5) + (i == j ? 2.0 : 0.0);
    }
    auto move = [&](const std::vector<double>& x) {
      std::vector<double> y(5);
      for (int i = 0; i < 5; ++i) {
        y[i] = bvec[i];
        for (int j = 0; j < 5; ++j) y[i] += A[i][j] * x[j];
      }
      return y;
    };
    Points moved;
    for (const auto& p : pts) moved.push_back(move(p));
    FitOptions fit;
    fit.lambda = 0.0;
    const auto d0 = SegmentDistribution::Fit(testing::Views(pts), fit);
    const auto d1 = SegmentDistribution::Fit(testing::Views(moved), fit);
    for (int q = 0; q < 10; ++q) {
      std::vector<double> x(5);
      for (double& v : x) v = rng.Uniform() * 1.5 - 0.25;
      const double before = d0.Mahalanobis(x);
      const double after = d1.Mahalanobis(move(x));
      worst_rel = std::max(worst_rel, std::fabs(after - before) / before);
    }
  }
  return {zero_ok && worst_hand <= 1e-9 && worst_rel <= 1e-6,
          Fmt("d_M(mu)=0 %s; hand cases max err %.2e (<= 1e-9); affine max rel err %.2e (<= 1e-6)",
              zero_ok ? "exact" : "NOT exact", worst_hand, worst_rel)};
}

// ---------------------------------------------------------------------------
// 4 and 5 share hosts and patch placements.
struct SeparationCase {
  double noise_score = 0.0;
  bool noise_bimodal = false;
  double mean_ratio = 0.0;
  double adaptive_score = 0.0;
  bool adaptive_unimodal = false;
  bool adaptive_in_bounds = false;
};

constexpr int kSeparationHosts = 20;

const std::vector<SeparationCase>& SeparationCases(double* seconds_noise,
                                                   double* seconds_adaptive) {
  static std::vector<SeparationCase> cases;
  static double t_noise = 0.0, t_adaptive = 0.0;
  if (cases.empty()) {
    for (int i = 0; i < kSeparationHosts; ++i) {
      SeparationCase c;
      const Image host = MakeTexturedHost(224, 224, 3, MixSeed(4242, i));
      PatchSpec spec;
      spec.size = 50;
      spec.seed = MixSeed(777, i);

      auto start = Clock::now();
      spec.kind = PatchKind::kUniformNoise;
      const auto noisy = MakePatch(spec, host);
      const auto grid = SegmentImage(noisy.composed, 40, 8);
      const auto vectors = grid.Vectors();
      const auto d = MahalanobisAll(FitDistribution(grid, 0.1), vectors);
      const auto positive = TruthPositiveSegments(noisy.mask, grid);
      double in = 0.0, out = 0.0;
      int n_in = 0, n_out = 0;
      for (std::size_t s = 0; s < d.size(); ++s) {
        (positive[s] ? in : out) += d[s];
        (positive[s] ? n_in : n_out) += 1;
      }
      c.mean_ratio = (in / n_in) / (out / n_out);
      const auto report = ModalityReport(d);
      c.noise_score = report.separation_score;
      c.noise_bimodal = report.modality == Modality::kBimodal;
      t_noise += SecondsSince(start);

      start = Clock::now();
      spec.kind = PatchKind::kAdaptive;
      const auto adaptive = MakePatch(spec, host);
      const auto measured = MeasureAdaptive(host, adaptive, spec.bounds, spec.seed);
      const auto& b = spec.bounds;
      c.adaptive_in_bounds = adaptive.row == noisy.row && adaptive.col == noisy.col;
      for (const auto& s : measured) {
        c.adaptive_in_bounds = c.adaptive_in_bounds &&
                               s.mean_diff >= b.mean_diff_low - b.tolerance &&
                               s.mean_diff <= b.mean_diff_high + b.tolerance &&
                               s.std_ratio >= b.std_ratio_low - b.tolerance &&
                               s.std_ratio <= b.std_ratio_high + b.tolerance;
      }
      const auto agrid = SegmentImage(adaptive.composed, 40, 8);
      const auto ad = MahalanobisAll(FitDistribution(agrid, 0.1), agrid.Vectors());
      const auto areport = ModalityReport(ad);
      c.adaptive_score = areport.separation_score;
      c.adaptive_unimodal = areport.modality == Modality::kUnimodal;
      t_adaptive += SecondsSince(start);
      cases.push_back(c);
    }
  }
  if (seconds_noise) *seconds_noise = t_noise;
  if (seconds_adaptive) *seconds_adaptive = t_adaptive;
  return cases;
}

Verdict Bimodality() {
  double secs = 0.0;
  const auto& cases = SeparationCases(&secs, nullptr);
  int good = 0;
  double min_ratio = 1e300, min_score = 1e300;
  for (const auto& c : cases) {
    good += (c.noise_bimodal && c.mean_ratio >= 2.0) ? 1 : 0;
    min_ratio = std::min(min_ratio, c.mean_ratio);
    min_score = std::min(min_score, c.noise_score);
  }
  const int n = static_cast<int>(cases.size());
  return {good * 10 >= n * 9 && secs < 300.0,
          Fmt("%d/%d images bimodal with patch/non-patch mean ratio >= 2 (need >= 90%%); "
              "min ratio %.2f, min separation %.2f; %.0f s (< 300 s)",
              good, n, min_ratio, min_score, secs)};
}

Verdict AdaptiveContrast() {
  double secs = 0.0;
  const auto& cases = SeparationCases(nullptr, &secs);
  int lower = 0, unimodal = 0, in_bounds = 0;
  for (const auto& c : cases) {
    lower += c.adaptive_score < c.noise_score ? 1 : 0;
    unimodal += c.adaptive_unimodal ? 1 : 0;
    in_bounds += c.adaptive_in_bounds ? 1 : 0;
  }
  const int n = static_cast<int>(cases.size());
  return {lower * 10 >= n * 8 && unimodal * 2 >= n && in_bounds == n,
          Fmt("adaptive separation lower in %d/%d (need >= 80%%), unimodal in %d/%d (need >= "
              "half), bounds honoured in %d/%d",
              lower, n, unimodal, n, in_bounds, n)};
}

// ---------------------------------------------------------------------------
// 6. End-to-end detection on a 50-image corpus.
Verdict EndToEnd(const fs::path& scratch) {
  const auto start = Clock::now();
  const fs::path corpus = scratch / "corpus50";
  fs::create_directories(corpus);
  for (int i = 0; i < 50; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "host_%02d.png", i);
    SaveImage(MakeTexturedHost(224, 224, 3, MixSeed(9001, i)), corpus / name);
  }
  RunManifest m;
  m.config.min_pts = MinPts::Fraction(0.6);
  m.corpus_dir = corpus.string();
  m.calibrate_eps = true;
  m.patch.kind = PatchKind::kUniformNoise;
  m.patch.placement = Placement::kRandom;
  m.patch_sizes.assign(kPatchSizes.begin(), kPatchSizes.end());
  m.seed = 6;
  const auto summary = Evaluate(m, scratch / "eval50");
  const double secs = SecondsSince(start);
  std::size_t ok = 0;
  for (const auto& r : summary.rows) ok += r.ok ? 1 : 0;
  return {ok == 50 && summary.mean_patch_pixel_recall >= 0.9 &&
              summary.mean_clean_fp_rate <= 0.05 && secs < 600.0,
          Fmt("patch_pixel_recall %.4f (>= 0.9), clean_fp_segment_rate %.4f (<= 0.05), "
              "eps %.6f, minPts %d, %zu/50 images, %.0f s (< 600 s)",
              summary.mean_patch_pixel_recall, summary.mean_clean_fp_rate,
              summary.effective_config.eps, summary.effective_config.min_pts.Resolve(576), ok,
              secs)};
}

// ---------------------------------------------------------------------------
// 7. Blocking: locality, exact means, range under fuzzing.
Verdict Blocking() {
  // Crafted: one 2x2 anomalous tile in an otherwise constant 3-channel image,
  // stride = kernel so the tile is blocked alone.
  Image img = Image::Filled(8, 8, 3, 0.5);
  const double tile[4][3] = {{0.125, 0.5, 1.0}, {0.25, 0.5, 0.0}, {0.5, 0.25, 0.75},
                             {0.375, 0.75, 0.25}};
  for (int p = 0; p < 4; ++p)
    for (int ch = 0; ch < 3; ++ch) img.at(4 + p / 2, 2 + p % 2, ch) = tile[p][ch];
  DefenseConfig crafted;
  crafted.kernel = 2;
  crafted.stride = 2;
  crafted.eps = 0.01;
  crafted.min_pts = MinPts::Absolute(3);
  const auto out = Defend(img, crafted);
  bool exact = out.anomalous_segments.size() == 1 && out.anomaly_mask.count() == 4;
  const double expect[3] = {0.3125, 0.5, 0.5};  // channel sums 1.25, 2.0, 2.0 over 4
  for (int p = 0; p < 4; ++p)
    for (int ch = 0; ch < 3; ++ch)
      exact = exact && out.sanitized.at(4 + p / 2, 2 + p % 2, ch) == expect[ch];
  for (auto mode : {ReplacementMode::kMin, ReplacementMode::kMax}) {
    crafted.replacement = mode;
    const auto o = Defend(img, crafted);
    for (int ch = 0; ch < 3; ++ch) {
      double want = mode == ReplacementMode::kMin ? 1.0 : 0.0;
      for (int p = 0; p < 4; ++p)
        want = mode == ReplacementMode::kMin ? std::min(want, tile[p][ch])
                                             : std::max(want, tile[p][ch]);
      exact = exact && o.sanitized.at(5, 3, ch) == want;
    }
  }

  Rng rng(7007);
  const int trials = 300;
  int local_ok = 0, range_ok = 0, mask_ok = 0;
  for (int t = 0; t < trials; ++t) {
    const int h = rng.UniformInt(4, 48), w = rng.UniformInt(4, 48);
    const int c = rng.UniformInt(0, 1) ? 3 : 1;
    Image x(h, w, c);
    const int style = rng.UniformInt(0, 2);
    for (double& v : x.mutable_data())
      v = style == 0 ? rng.Uniform() : style == 1 ? (rng.Uniform() < 0.5 ? 0.0 : 1.0)
                                                  : 0.999 + 0.001 * rng.Uniform();
    DefenseConfig cfg;
    cfg.kernel = rng.UniformInt(1, std::min(h, w));
    cfg.stride = rng.UniformInt(1, cfg.kernel + 4);
    cfg.eps = 0.001 + 0.6 * rng.Uniform();
    cfg.min_pts = rng.Uniform() < 0.5 ? MinPts::Absolute(rng.UniformInt(1, 50))
                                      : MinPts::Fraction(0.05 + 0.95 * rng.Uniform());
    cfg.replacement = static_cast<ReplacementMode>(rng.UniformInt(0, 2));
    cfg.overlap = rng.Uniform() < 0.5 ? OverlapStrategy::kSequential : OverlapStrategy::kUnionFill;
    const auto o = Defend(x, cfg);
    bool local = true, range = true;
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        for (int ch = 0; ch < c; ++ch) {
          const double v = o.sanitized.at(r, col, ch);
          if (!o.anomaly_mask.at(r, col)) local = local && v == x.at(r, col, ch);
          range = range && v >= 0.0 && v <= 1.0;
        }
    const auto grid = SegmentImage(x, cfg.kernel, cfg.stride);
    PixelMask expect_mask(h, w);
    for (std::size_t i : o.anomalous_segments) expect_mask |= Footprint(grid[i], grid);
    local_ok += local ? 1 : 0;
    range_ok += range ? 1 : 0;
    mask_ok += (expect_mask == o.anomaly_mask) ? 1 : 0;
  }
  return {exact && local_ok == trials && range_ok == trials && mask_ok == trials,
          Fmt("crafted fills %s; fuzz (%d cases): locality %d, range [0,1] %d, mask = noise "
              "footprints %d",
              exact ? "exact" : "WRONG", trials, local_ok, range_ok, mask_ok)};
}

// ---------------------------------------------------------------------------
// 8. Determinism of evaluate under a fixed manifest.
Verdict Determinism(const fs::path& scratch) {
  const fs::path corpus = scratch / "corpus8";
  fs::create_directories(corpus);
  for (int i = 0; i < 8; ++i)
    SaveImage(MakeTexturedHost(224, 224, 3, MixSeed(88, i)),
              corpus / ("img_" + std::to_string(i) + ".png"));
  RunManifest m;
  m.config.min_pts = MinPts::Fraction(0.6);
  m.corpus_dir = corpus.string();
  m.calibrate_eps = true;
  m.patch_sizes.assign(kPatchSizes.begin(), kPatchSizes.end());
  m.patch.kind = PatchKind::kAdaptive;
  m.seed = 314;
  Evaluate(m, scratch / "run_a", 1);
  // Second run is driven purely by the manifest the first run wrote.
  const RunManifest replay = ManifestFromJson(testing::ReadText(scratch / "run_a" / "manifest.json"));
  Evaluate(replay, scratch / "run_b", 2);
  int identical = 0, total = 0;
  for (const char* f : {"metrics.csv", "aggregate.csv", "hist_clean.csv", "hist_patched.csv"}) {
    ++total;
    const std::string a = testing::ReadText(scratch / "run_a" / f);
    identical += (!a.empty() && a == testing::ReadText(scratch / "run_b" / f)) ? 1 : 0;
  }
  return {identical == total, Fmt("%d/%d CSV outputs byte-identical across manifest replay",
                                  identical, total)};
}

// ---------------------------------------------------------------------------
// 9. Literal published parameters over-flag.
Verdict LiteralDefaults() {
  const Image img = MakeTexturedHost(224, 224, 3, 1);
  const DefenseConfig cfg;  // eps 0.4, minPts 1201
  const auto out = Defend(img, cfg);
  const bool pass = cfg.eps == 0.4 && cfg.min_pts.Resolve(576) == 1201 &&
                    out.segment_count == 576 && out.anomalous_segments.size() == 576 &&
                    out.all_noise && !out.diagnostics.empty();
  return {pass, Fmt("eps=%.1f minPts=%d on %zu segments: %zu flagged, diagnostic %s", cfg.eps,
                    out.resolved_min_pts, out.segment_count, out.anomalous_segments.size(),
                    out.all_noise ? "raised" : "missing")};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  testing::TempDir scratch("acceptance");

  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "DBSCAN oracle equivalence", DbscanOracle},
      {2, "segmentation count law", CountLaw},
      {3, "Mahalanobis correctness", MahalanobisChecks},
      {4, "bimodality on noise patches", Bimodality},
      {5, "adaptive-attack contrast", AdaptiveContrast},
      {6, "end-to-end detection", [&] { return EndToEnd(scratch.path()); }},
      {7, "blocking correctness", Blocking},
      {8, "evaluate determinism", [&] { return Determinism(scratch.path()); }},
      {9, "literal published parameters", LiteralDefaults},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
