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

#include "patchdef/attacksim.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace patchdef {

namespace {

// Stream indices for MixSeed.
constexpr std::uint64_t kPlacementStream = 0;
constexpr std::uint64_t kFragmentStream = 1;
constexpr std::uint64_t kFieldStream = 2;

constexpr int kAdaptiveIterations = 100;

std::uint64_t SplitMix(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t Rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

struct Origin {
  int row;
  int col;
};

Origin ChoosePlacement(const PatchSpec& spec, const Image& host) {
  if (spec.size < 1) throw Error("patch size must be at least 1");
  if (spec.size > host.height() || spec.size > host.width()) {
    throw DimensionError("patch of size " + std::to_string(spec.size) +
                         " does not fit the host image");
  }
  if (spec.placement == Placement::kFixed) {
    if (spec.row < 0 || spec.col < 0 || spec.row + spec.size > host.height() ||
        spec.col + spec.size > host.width()) {
      throw DimensionError("patch exceeds image bounds at the fixed placement");
    }
    return {spec.row, spec.col};
  }
  Rng rng(MixSeed(spec.seed, kPlacementStream));
  const int row = rng.UniformInt(0, host.height() - spec.size);
  const int col = rng.UniformInt(0, host.width() - spec.size);
  return {row, col};
}

// Average of per-fragment channel means and population stds.
void FragmentStats(const Image& host, const AdaptiveBounds& bounds, std::uint64_t seed,
                   std::vector<double>& mean, std::vector<double>& sd) {
  const int f = bounds.fragment_size;
  if (f > host.height() || f > host.width()) {
    throw DimensionError("fragment size exceeds the host image");
  }
  const int c = host.channels();
  mean.assign(c, 0.0);
  sd.assign(c, 0.0);
  Rng rng(MixSeed(seed, kFragmentStream));
  const double count = static_cast<double>(f) * f;
  for (int n = 0; n < bounds.n_fragments; ++n) {
    const int r0 = rng.UniformInt(0, host.height() - f);
    const int c0 = rng.UniformInt(0, host.width() - f);
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int r = r0; r < r0 + f; ++r) {
        for (int col = c0; col < c0 + f; ++col) s += host.at(r, col, ch);
      }
      const double m = s / count;
      double ss = 0.0;
      for (int r = r0; r < r0 + f; ++r) {
        for (int col = c0; col < c0 + f; ++col) {
          const double t = host.at(r, col, ch) - m;
          ss += t * t;
        }
      }
      mean[ch] += m;
      sd[ch] += std::sqrt(ss / count);
    }
  }
  for (int ch = 0; ch < c; ++ch) {
    mean[ch] /= bounds.n_fragments;
    sd[ch] /= bounds.n_fragments;
  }
}

void MeanStd(std::span<const double> v, double& mean, double& sd) {
  double s = 0.0;
  for (double x : v) s += x;
  mean = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

bool WithinBounds(const ChannelStats& s, const AdaptiveBounds& b) {
  const double tol = b.tolerance;
  return s.mean_diff >= b.mean_diff_low - tol && s.mean_diff <= b.mean_diff_high + tol &&
         s.patch_std >= b.std_ratio_low * s.fragment_std - tol &&
         s.patch_std <= b.std_ratio_high * s.fragment_std + tol;
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& word : s_) word = SplitMix(seed);
}

std::uint64_t Rng::Next() {
  const std::uint64_t result = Rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = Rotl(s_[3], 45);
  return result;
}

double Rng::Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

int Rng::UniformInt(int lo, int hi) {
  if (hi < lo) throw Error("empty integer range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(Next() % span);
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (0xD1B54A32D192ED03ull * (stream + 1));
  return SplitMix(x);
}

std::string_view ToString(PatchKind kind) {
  switch (kind) {
    case PatchKind::kUniformNoise:
      return "uniform_noise";
    case PatchKind::kHighFrequency:
      return "high_frequency";
    case PatchKind::kConstant:
      return "constant";
    case PatchKind::kAdaptive:
      return "adaptive_constrained";
  }
  return "uniform_noise";
}

PatchKind ParsePatchKind(std::string_view name) {
  if (name == "uniform_noise" || name == "uniform") return PatchKind::kUniformNoise;
  if (name == "high_frequency") return PatchKind::kHighFrequency;
  if (name == "constant") return PatchKind::kConstant;
  if (name == "adaptive_constrained" || name == "adaptive") return PatchKind::kAdaptive;
  throw Error("unknown patch kind: " + std::string(name));
}

void AdaptiveBounds::Validate() const {
  if (!(0.0 <= mean_diff_low && mean_diff_low <= mean_diff_high)) {
    throw Error("adaptive mean-difference bounds must satisfy 0 <= low <= high");
  }
  if (!(0.0 <= std_ratio_low && std_ratio_low <= std_ratio_high)) {
    throw Error("adaptive std-ratio bounds must satisfy 0 <= low <= high");
  }
  if (n_fragments < 1) throw Error("need at least one fragment");
  if (fragment_size < 1) throw Error("fragment size must be at least 1");
  if (tolerance < 0.0) throw Error("tolerance must be non-negative");
}

PatchedImage MakePatch(const PatchSpec& spec, const Image& host) {
  if (spec.kind == PatchKind::kAdaptive) return MakeAdaptivePatch(host, spec.bounds, spec);
  if (spec.kind == PatchKind::kConstant &&
      !(spec.constant_value >= 0.0 && spec.constant_value <= 1.0)) {
    throw Error("constant patch value outside [0, 1]");
  }

  const Origin at = ChoosePlacement(spec, host);
  const int c = host.channels();
  Image patch = host;
  Rng rng(MixSeed(spec.seed, kFieldStream));
  for (int r = at.row; r < at.row + spec.size; ++r) {
    for (int col = at.col; col < at.col + spec.size; ++col) {
      for (int ch = 0; ch < c; ++ch) {
        double v = 0.0;
        switch (spec.kind) {
          case PatchKind::kUniformNoise:
            v = rng.Uniform();
            break;
          case PatchKind::kHighFrequency: {
            // Checkerboard sign modulating noise amplitude around mid-grey.
            const double sign = ((r + col) & 1) ? 1.0 : -1.0;
            v = 0.5 + 0.5 * sign * rng.Uniform();
            break;
          }
          case PatchKind::kConstant:
            v = spec.constant_value;
            break;
          case PatchKind::kAdaptive:
            break;
        }
        patch.at(r, col, ch) = Clamp01(v);
      }
    }
  }

  PatchedImage out;
  out.mask = PixelMask(host.height(), host.width());
  out.mask.SetRect(at.row, at.col, spec.size, spec.size);
  out.composed = ComposeWithMask(host, patch, out.mask);
  out.row = at.row;
  out.col = at.col;
  return out;
}

PatchedImage MakeAdaptivePatch(const Image& host, const AdaptiveBounds& bounds,
                               const PatchSpec& spec) {
  bounds.Validate();
  const Origin at = ChoosePlacement(spec, host);
  const int c = host.channels();
  const int side = spec.size;
  const std::size_t pixels = static_cast<std::size_t>(side) * side;

  std::vector<double> frag_mean, frag_sd;
  FragmentStats(host, bounds, spec.seed, frag_mean, frag_sd);

  // Standardised noise field per channel.
  Rng rng(MixSeed(spec.seed, kFieldStream));
  std::vector<std::vector<double>> field(c, std::vector<double>(pixels));
  if (bounds.field == AdaptiveField::kHostTexture) {
    const int r0 = rng.UniformInt(0, host.height() - side);
    const int c0 = rng.UniformInt(0, host.width() - side);
    for (int r = 0; r < side; ++r) {
      for (int col = 0; col < side; ++col) {
        const std::size_t p = static_cast<std::size_t>(r) * side + col;
        for (int ch = 0; ch < c; ++ch) {
          field[ch][p] = host.at(r0 + r, c0 + col, ch) + 1e-3 * (rng.Uniform() - 0.5);
        }
      }
    }
  } else {
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int ch = 0; ch < c; ++ch) field[ch][p] = rng.Uniform();
    }
  }
  for (auto& f : field) {
    double m, s;
    MeanStd(f, m, s);
    for (double& v : f) v = (v - m) / s;
  }

  const double diff_target = 0.5 * (bounds.mean_diff_low + bounds.mean_diff_high);
  const double ratio_target = 0.5 * (bounds.std_ratio_low + bounds.std_ratio_high);

  std::vector<ChannelStats> stats(c);
  std::vector<std::vector<double>> values(c, std::vector<double>(pixels));
  for (int ch = 0; ch < c; ++ch) {
    ChannelStats& s = stats[ch];
    s.fragment_mean = frag_mean[ch];
    s.fragment_std = frag_sd[ch];
    // Shift towards mid-grey so clamping bites as little as possible.
    const double sign = frag_mean[ch] <= 0.5 ? 1.0 : -1.0;
    const double want_mean = frag_mean[ch] + sign * diff_target;
    const double want_std = ratio_target * frag_sd[ch];

    // Fixed-point on the pre-clamp offset/scale so the clamped field hits the
    // targets.
    double offset = want_mean;
    double scale = want_std;
    auto& out = values[ch];
    for (int it = 0; it < kAdaptiveIterations; ++it) {
      for (std::size_t p = 0; p < pixels; ++p) out[p] = Clamp01(offset + scale * field[ch][p]);
      MeanStd(out, s.patch_mean, s.patch_std);
      const double mean_err = want_mean - s.patch_mean;
      const double std_err = want_std - s.patch_std;
      if (std::abs(mean_err) < 1e-6 && std::abs(std_err) < 1e-6) break;
      offset += mean_err;
      if (s.patch_std > 0.0) scale *= want_std / s.patch_std;
    }
    s.mean_diff = std::abs(s.patch_mean - s.fragment_mean);
    s.std_ratio = s.fragment_std > 0.0 ? s.patch_std / s.fragment_std : 0.0;
    s.within_bounds = s.fragment_std > 0.0 && WithinBounds(s, bounds);
  }

  for (int ch = 0; ch < c; ++ch) {
    if (!stats[ch].within_bounds) {
      std::ostringstream msg;
      msg << "adaptive patch constraints unreachable on channel " << ch
          << " (mean diff " << stats[ch].mean_diff << ", std " << stats[ch].patch_std
          << " vs fragment std " << stats[ch].fragment_std << ")";
      throw ConstraintError(msg.str(), stats);
    }
  }

  Image patch = host;
  for (int r = 0; r < side; ++r) {
    for (int col = 0; col < side; ++col) {
      const std::size_t p = static_cast<std::size_t>(r) * side + col;
      for (int ch = 0; ch < c; ++ch) patch.at(at.row + r, at.col + col, ch) = values[ch][p];
    }
  }

  PatchedImage out;
  out.mask = PixelMask(host.height(), host.width());
  out.mask.SetRect(at.row, at.col, side, side);
  out.composed = ComposeWithMask(host, patch, out.mask);
  out.row = at.row;
  out.col = at.col;
  out.adaptive_stats = std::move(stats);
  return out;
}

std::vector<ChannelStats> MeasureAdaptive(const Image& host, const PatchedImage& patched,
                                          const AdaptiveBounds& bounds,
                                          std::uint64_t seed) {
  std::vector<double> frag_mean, frag_sd;
  FragmentStats(host, bounds, seed, frag_mean, frag_sd);
  const int c = host.channels();
  std::vector<ChannelStats> stats(c);
  for (int ch = 0; ch < c; ++ch) {
    std::vector<double> v;
    for (int r = 0; r < host.height(); ++r) {
      for (int col = 0; col < host.width(); ++col) {
        if (patched.mask.at(r, col)) v.push_back(patched.composed.at(r, col, ch));
      }
    }
    if (v.empty()) throw Error("patched image has an empty mask");
    ChannelStats& s = stats[ch];
    s.fragment_mean = frag_mean[ch];
    s.fragment_std = frag_sd[ch];
    MeanStd(v, s.patch_mean, s.patch_std);
    s.mean_diff = std::abs(s.patch_mean - s.fragment_mean);
    s.std_ratio = s.fragment_std > 0.0 ? s.patch_std / s.fragment_std : 0.0;
    s.within_bounds = s.fragment_std > 0.0 && WithinBounds(s, bounds);
  }
  return stats;
}

Image MakeTexturedHost(int height, int width, int channels, std::uint64_t seed) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  constexpr int kGratings = 3;
  constexpr double kGrain = 0.02;
  constexpr double kFloorGrain = 0.004;
  struct Grating {
    double fx, fy, phase, amp;
  };

  Image img(height, width, channels);
  Rng rng(seed);
  // Grain amplitude follows a slow envelope in [0, 1] shared by all channels,
  // so some regions are nearly flat and others visibly grainy.
  const double env_fx = kTwoPi / (100.0 + 100.0 * rng.Uniform());
  const double env_fy = kTwoPi / (100.0 + 100.0 * rng.Uniform());
  const double env_px = kTwoPi * rng.Uniform();
  const double env_py = kTwoPi * rng.Uniform();
  for (int ch = 0; ch < channels; ++ch) {
    const double base = 0.3 + 0.4 * rng.Uniform();
    std::array<Grating, kGratings> g{};
    for (auto& gr : g) {
      const double angle = kTwoPi * rng.Uniform();
      const double period = 80.0 + 160.0 * rng.Uniform();
      gr.fx = std::cos(angle) * kTwoPi / period;
      gr.fy = std::sin(angle) * kTwoPi / period;
      gr.phase = kTwoPi * rng.Uniform();
      gr.amp = 0.02 + 0.03 * rng.Uniform();
    }
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        double v = base;
        for (const auto& gr : g) v += gr.amp * std::sin(gr.fx * c + gr.fy * r + gr.phase);
        const double envelope =
            0.5 + 0.25 * (std::sin(env_fx * c + env_px) + std::sin(env_fy * r + env_py));
        v += kGrain * envelope * (rng.Uniform() - 0.5);
        v += kFloorGrain * (rng.Uniform() - 0.5);
        img.at(r, c, ch) = Clamp01(v);
      }
    }
  }
  return img;
}

}  // namespace patchdef
