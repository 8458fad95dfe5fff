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

#ifndef PATCHDEF_ATTACKSIM_H_
#define PATCHDEF_ATTACKSIM_H_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "patchdef/image.h"
#include "patchdef/segmenter.h"

namespace patchdef {

// Patch side lengths used throughout the evaluation corpus.
inline constexpr std::array<int, 5> kPatchSizes = {38, 41, 44, 47, 50};

// splitmix64-seeded xoshiro256** so every platform draws the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t Next();
  // Uniform in [0, 1).
  double Uniform();
  // Uniform integer in [lo, hi].
  int UniformInt(int lo, int hi);

 private:
  std::array<std::uint64_t, 4> s_{};
};

// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream);

enum class PatchKind { kUniformNoise, kHighFrequency, kConstant, kAdaptive };
std::string_view ToString(PatchKind kind);
PatchKind ParsePatchKind(std::string_view name);

enum class Placement { kFixed, kRandom };

// Spatial structure of the field that is rescaled into an adaptive patch.
enum class AdaptiveField {
  kHostTexture,  // pixels of a random host window of the patch size
  kWhiteNoise,   // i.i.d. uniform samples
};

struct AdaptiveBounds {
  double mean_diff_low = 0.02;
  double mean_diff_high = 0.08;
  double std_ratio_low = 1.5;
  double std_ratio_high = 2.4;
  int n_fragments = 20;
  int fragment_size = kDefaultKernel;
  // Slack allowed on the post-clamp statistics.
  double tolerance = 0.005;
  AdaptiveField field = AdaptiveField::kHostTexture;

  void Validate() const;
};

struct PatchSpec {
  int size = 50;
  Placement placement = Placement::kRandom;
  int row = 0;  // used with Placement::kFixed
  int col = 0;
  PatchKind kind = PatchKind::kUniformNoise;
  std::uint64_t seed = 0;
  double constant_value = 0.5;  // PatchKind::kConstant
  AdaptiveBounds bounds;
};

struct ChannelStats {
  double fragment_mean = 0.0;
  double fragment_std = 0.0;
  double patch_mean = 0.0;
  double patch_std = 0.0;
  double mean_diff = 0.0;  // |patch_mean - fragment_mean|
  double std_ratio = 0.0;  // patch_std / fragment_std
  bool within_bounds = false;
};

struct PatchedImage {
  Image composed;
  PixelMask mask;
  int row = 0;
  int col = 0;
  std::vector<ChannelStats> adaptive_stats;  // adaptive patches only
};

class ConstraintError : public Error {
 public:
  ConstraintError(const std::string& what, std::vector<ChannelStats> stats)
      : Error(what), stats_(std::move(stats)) {}
  const std::vector<ChannelStats>& stats() const { return stats_; }

 private:
  std::vector<ChannelStats> stats_;
};

// Composes a synthetic patch into `host` and returns the ground-truth mask.
// Dispatches to MakeAdaptivePatch for PatchKind::kAdaptive.
PatchedImage MakePatch(const PatchSpec& spec, const Image& host);

// Per channel, rescales a noise field so that, after clamping to [0, 1], the
// patch mean differs from the average fragment mean by an amount in
// [mean_diff_low, mean_diff_high] and the patch std is std_ratio_low..high
// times the average fragment std. Fragment statistics come from n_fragments
// random clean windows of the host. Throws ConstraintError when the bounds
// cannot be met within tolerance.
PatchedImage MakeAdaptivePatch(const Image& host, const AdaptiveBounds& bounds,
                               const PatchSpec& spec);

// Recomputes the per-channel statistics of `patched` against `host`
// independently of the generator (same fragment draw for the same seed).
std::vector<ChannelStats> MeasureAdaptive(const Image& host, const PatchedImage& patched,
                                          const AdaptiveBounds& bounds,
                                          std::uint64_t seed);

// Synthetic host: per-channel base colour plus a few low-frequency gratings
// and fine grain whose amplitude varies slowly across the image.
Image MakeTexturedHost(int height, int width, int channels, std::uint64_t seed);

}  // namespace patchdef

#endif  // PATCHDEF_ATTACKSIM_H_
