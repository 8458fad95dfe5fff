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

// patchdef: command-line front end for the patch defense pipeline.
//
//   patchdef defend    -o out/ [--config cfg.txt] [flags] image.png|dir ...
//   patchdef inject    --input host.png --output patched.png [patch flags]
//   patchdef analyze   --input image.png --out hist.csv
//   patchdef evaluate  --corpus dir/ -o out/ [flags] | --manifest run.json -o out/
//   patchdef calibrate --corpus dir/ [flags]
//   patchdef synth     -o dir/ --count 10

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "patchdef/analyzer.h"
#include "patchdef/attacksim.h"
#include "patchdef/config.h"
#include "patchdef/defense.h"
#include "patchdef/fileutil.h"
#include "patchdef/harness.h"

namespace fs = std::filesystem;
using namespace patchdef;

namespace {

// DefenseConfig fields settable from the command line; unset flags leave the
// config-file (or default) value alone.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void Register(CLI::App* app) {
    app->add_option("--config", config_file, "Flat key = value config file")
        ->check(CLI::ExistingFile);
    for (const char* key : {"kernel", "stride", "eps", "min-pts", "replacement",
                            "distance", "overlap", "lambda"}) {
      const char* help = "";
      const std::string k = key;
      if (k == "min-pts") help = "Absolute count or rho:<fraction>";
      if (k == "replacement") help = "min | mean | max";
      if (k == "distance") help = "rms | euclidean | cosine";
      if (k == "overlap") help = "sequential | union";
      if (k == "lambda") help = "Covariance shrinkage for the analyzer";
      app->add_option_function<std::string>(
          "--" + k, [this, k](const std::string& v) { values[k] = v; }, help);
    }
  }

  DefenseConfig Resolve() const {
    DefenseConfig cfg;
    if (!config_file.empty()) cfg = LoadConfigFile(config_file, cfg);
    for (const auto& [k, v] : values) ApplyConfigValue(cfg, k, v);
    cfg.Validate();
    return cfg;
  }
};

struct PatchFlags {
  int size = 50;
  std::string placement = "random";
  std::string kind = "uniform_noise";
  std::uint64_t seed = 0;
  double value = 0.5;
  std::vector<double> mean_diff;
  std::vector<double> std_ratio;
  int fragments = 20;
  std::string field = "host";

  void Register(CLI::App* app) {
    app->add_option("--size", size, "Patch side in pixels")->capture_default_str();
    app->add_option("--placement", placement, "random | fixed:<row>,<col>")
        ->capture_default_str();
    app->add_option("--kind", kind,
                    "uniform_noise | high_frequency | constant | adaptive_constrained")
        ->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--value", value, "Fill value for constant patches")->capture_default_str();
    app->add_option("--mean-diff", mean_diff, "Adaptive |mean difference| bounds: low high")
        ->expected(2);
    app->add_option("--std-ratio", std_ratio, "Adaptive std ratio bounds: low high")
        ->expected(2);
    app->add_option("--fragments", fragments, "Adaptive fragment count")->capture_default_str();
    app->add_option("--field", field, "Adaptive field: host | noise")->capture_default_str();
  }

  PatchSpec Resolve() const {
    PatchSpec spec;
    spec.size = size;
    spec.kind = ParsePatchKind(kind);
    spec.seed = seed;
    spec.constant_value = value;
    if (placement == "random") {
      spec.placement = Placement::kRandom;
    } else if (placement.starts_with("fixed:")) {
      spec.placement = Placement::kFixed;
      char comma = 0;
      std::istringstream in(placement.substr(6));
      if (!(in >> spec.row >> comma >> spec.col) || comma != ',') {
        throw Error("placement must look like fixed:<row>,<col>");
      }
    } else {
      throw Error("unknown placement: " + placement);
    }
    if (mean_diff.size() == 2) {
      spec.bounds.mean_diff_low = mean_diff[0];
      spec.bounds.mean_diff_high = mean_diff[1];
    }
    if (std_ratio.size() == 2) {
      spec.bounds.std_ratio_low = std_ratio[0];
      spec.bounds.std_ratio_high = std_ratio[1];
    }
    spec.bounds.n_fragments = fragments;
    if (field == "host") {
      spec.bounds.field = AdaptiveField::kHostTexture;
    } else if (field == "noise") {
      spec.bounds.field = AdaptiveField::kWhiteNoise;
    } else {
      throw Error("unknown adaptive field: " + field);
    }
    spec.bounds.Validate();
    return spec;
  }
};

std::vector<fs::path> ExpandInputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& f : ListPngFiles(in)) out.push_back(std::move(f));
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

fs::path SiblingMaskPath(const fs::path& image) {
  fs::path p = image;
  p.replace_filename(image.stem().string() + "_mask.png");
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial patch detection and blocking"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("-j,--workers", workers, "Images processed concurrently")
      ->capture_default_str();

  // defend
  auto* defend = app.add_subcommand("defend", "Detect and block anomalous segments");
  ConfigFlags defend_cfg;
  defend_cfg.Register(defend);
  std::vector<std::string> defend_inputs;
  std::string defend_out;
  defend->add_option("inputs", defend_inputs, "Images or directories of PNGs")->required();
  defend->add_option("-o,--out", defend_out, "Output directory")->required();

  // inject
  auto* inject = app.add_subcommand("inject", "Compose a synthetic patch into an image");
  PatchFlags inject_patch;
  inject_patch.Register(inject);
  std::string inject_in, inject_out, inject_mask;
  inject->add_option("--input", inject_in, "Host image")->required()->check(CLI::ExistingFile);
  inject->add_option("--output", inject_out, "Composed image")->required();
  inject->add_option("--mask-out", inject_mask, "Ground-truth mask (default <output>_mask.png)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Mahalanobis distance histogram of segments");
  std::string analyze_in, analyze_out;
  int analyze_bins = 30;
  double analyze_lambda = kDefaultShrinkage;
  int analyze_kernel = kDefaultKernel, analyze_stride = kDefaultStride;
  std::optional<double> analyze_pca;
  analyze->add_option("--input", analyze_in, "Image")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "Histogram CSV")->required();
  analyze->add_option("--bins", analyze_bins)->capture_default_str();
  analyze->add_option("--lambda", analyze_lambda, "Covariance shrinkage")->capture_default_str();
  analyze->add_option("--kernel", analyze_kernel)->capture_default_str();
  analyze->add_option("--stride", analyze_stride)->capture_default_str();
  analyze->add_option("--pca", analyze_pca, "Project onto components explaining this variance fraction");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Corpus-level detection metrics");
  ConfigFlags eval_cfg;
  eval_cfg.Register(evaluate);
  PatchFlags eval_patch;
  eval_patch.Register(evaluate);
  std::string eval_corpus, eval_out, eval_manifest;
  std::vector<int> eval_sizes;
  std::uint64_t eval_seed = 0;
  bool eval_calibrate = false;
  double eval_percentile = kDefaultEpsPercentile;
  evaluate->add_option("--corpus", eval_corpus, "Directory of clean PNG hosts");
  evaluate->add_option("--manifest", eval_manifest, "Re-run from a manifest.json")
      ->check(CLI::ExistingFile);
  evaluate->add_option("-o,--out", eval_out, "Output directory")->required();
  evaluate->add_option("--sizes", eval_sizes, "Patch sides cycled over images");
  evaluate->add_option("--run-seed", eval_seed, "Seed for per-image patch draws")
      ->capture_default_str();
  evaluate->add_flag("--calibrate", eval_calibrate, "Calibrate eps on the clean corpus first");
  evaluate->add_option("--percentile", eval_percentile)->capture_default_str();

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Choose eps from a clean corpus");
  ConfigFlags cal_cfg;
  cal_cfg.Register(calibrate);
  std::string cal_corpus;
  double cal_percentile = kDefaultEpsPercentile;
  calibrate->add_option("--corpus", cal_corpus, "Directory of clean PNGs")->required();
  calibrate->add_option("--percentile", cal_percentile)->capture_default_str();
  std::string cal_out;
  calibrate->add_option("-o,--out", cal_out, "Write the calibrated config file here");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a corpus of synthetic textured hosts");
  std::string synth_out;
  int synth_count = 10, synth_size = 224, synth_channels = 3;
  std::uint64_t synth_seed = 1;
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count)->capture_default_str();
  synth->add_option("--size", synth_size)->capture_default_str();
  synth->add_option("--channels", synth_channels)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*defend) {
      const DefenseConfig cfg = defend_cfg.Resolve();
      const auto summary = DefendBatch(ExpandInputs(defend_inputs), cfg, defend_out, workers);
      int failed = 0;
      for (const auto& row : summary.rows) {
        if (!row.ok) {
          ++failed;
          std::cerr << row.file << ": " << row.error << '\n';
        } else if (row.all_noise) {
          std::cerr << row.file << ": warning: every segment labelled Noise; "
                    << "check eps/minPts against the segment count\n";
        }
      }
      std::cout << "wrote " << summary.summary_csv.string() << " (" << summary.rows.size()
                << " images, " << failed << " failed)\n";
      return failed ? 2 : 0;
    }

    if (*inject) {
      const PatchSpec spec = inject_patch.Resolve();
      const Image host = LoadImage(inject_in);
      const PatchedImage patched = MakePatch(spec, host);
      const fs::path mask_path =
          inject_mask.empty() ? SiblingMaskPath(inject_out) : fs::path(inject_mask);
      SaveImage(patched.composed, inject_out);
      SaveMask(patched.mask, mask_path);
      std::cout << "patch " << spec.size << "x" << spec.size << " at (" << patched.row << ", "
                << patched.col << ") -> " << inject_out << ", " << mask_path.string() << '\n';
      for (std::size_t ch = 0; ch < patched.adaptive_stats.size(); ++ch) {
        const auto& s = patched.adaptive_stats[ch];
        std::printf("  channel %zu: mean diff %.4f, std ratio %.3f\n", ch, s.mean_diff,
                    s.std_ratio);
      }
      return 0;
    }

    if (*analyze) {
      const Image img = LoadImage(analyze_in);
      const SegmentGrid grid = SegmentImage(img, analyze_kernel, analyze_stride);
      FitOptions fit;
      fit.lambda = analyze_lambda;
      fit.pca_variance = analyze_pca;
      const auto vectors = grid.Vectors();
      const auto dist = SegmentDistribution::Fit(vectors, fit);
      std::vector<double> d = MahalanobisAll(dist, vectors);
      ExportHistogram(d, analyze_out, analyze_bins);
      const DistanceReport report = ModalityReport(std::move(d));
      std::printf("segments %zu, modality %s, separation %.3f, threshold %.4f\n", grid.size(),
                  report.modality == Modality::kBimodal ? "bimodal" : "unimodal",
                  report.separation_score, report.threshold);
      return 0;
    }

    if (*evaluate) {
      RunManifest manifest;
      if (!eval_manifest.empty()) {
        std::ifstream in(eval_manifest);
        std::stringstream buf;
        buf << in.rdbuf();
        manifest = ManifestFromJson(buf.str());
      } else {
        if (eval_corpus.empty()) throw Error("evaluate needs --corpus or --manifest");
        manifest.config = eval_cfg.Resolve();
        manifest.patch = eval_patch.Resolve();
        manifest.patch_sizes = eval_sizes;
        manifest.corpus_dir = eval_corpus;
        manifest.seed = eval_seed;
        manifest.calibrate_eps = eval_calibrate;
        manifest.eps_percentile = eval_percentile;
      }
      const auto summary = Evaluate(manifest, eval_out, workers);
      std::printf("images %zu, eps %.6f\n", summary.rows.size(), summary.effective_config.eps);
      std::printf("seg_precision %.4f  seg_recall %.4f  pixel_iou %.4f\n",
                  summary.mean_seg_precision, summary.mean_seg_recall, summary.mean_pixel_iou);
      std::printf("patch_pixel_recall %.4f  clean_fp_rate %.4f\n",
                  summary.mean_patch_pixel_recall, summary.mean_clean_fp_rate);
      return 0;
    }

    if (*calibrate) {
      DefenseConfig cfg = cal_cfg.Resolve();
      if (!cal_cfg.values.contains("min-pts") && cal_cfg.config_file.empty()) {
        cfg.min_pts = MinPts::Fraction(kDefaultDensityFraction);
      }
      const Calibration cal = Calibrate(cal_corpus, cfg, cal_percentile);
      for (const auto& w : cal.warnings) std::cerr << "warning: " << w << '\n';
      cfg.eps = cal.params.eps;
      std::printf("eps = %.9f\nmin_pts_resolved = %d\n", cal.params.eps, cal.params.min_pts);
      if (cal_out.empty()) {
        std::cout << "# config\n" << FormatConfig(cfg);
      } else {
        WriteTextAtomically(cal_out, FormatConfig(cfg));
        std::cout << "wrote " << cal_out << '\n';
      }
      return 0;
    }

    if (*synth) {
      std::error_code ec;
      fs::create_directories(synth_out, ec);
      for (int i = 0; i < synth_count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "host_%03d.png", i);
        SaveImage(MakeTexturedHost(synth_size, synth_size, synth_channels,
                                   MixSeed(synth_seed, static_cast<std::uint64_t>(i))),
                  fs::path(synth_out) / name);
      }
      std::cout << "wrote " << synth_count << " hosts to " << synth_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
