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

#ifndef PATCHDEF_CONFIG_H_
#define PATCHDEF_CONFIG_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "patchdef/analyzer.h"
#include "patchdef/clustering.h"
#include "patchdef/segmenter.h"

namespace patchdef {

inline constexpr double kDefaultEps = 0.4;
inline constexpr int kDefaultMinPts = 1201;
inline constexpr double kDefaultDensityFraction = 0.6;

// minPts either as an absolute count or as a fraction rho of the segment
// count, resolved to ceil(rho * n).
class MinPts {
 public:
  static MinPts Absolute(int count);
  static MinPts Fraction(double rho);
  // "1201", "rho:0.6" or "ρ:0.6".
  static MinPts Parse(std::string_view text);

  bool is_fraction() const { return fraction_; }
  int count() const { return count_; }
  double rho() const { return rho_; }
  int Resolve(std::size_t segment_count) const;
  std::string ToString() const;

  friend bool operator==(const MinPts&, const MinPts&) = default;

 private:
  bool fraction_ = false;
  int count_ = kDefaultMinPts;
  double rho_ = 0.0;
};

enum class ReplacementMode { kMin, kMean, kMax };
std::string_view ToString(ReplacementMode mode);
ReplacementMode ParseReplacementMode(std::string_view name);

enum class OverlapStrategy {
  kSequential,  // anomalous segments written back in ascending index order
  kUnionFill,   // each masked pixel takes the mean fill of its covering segments
};
std::string_view ToString(OverlapStrategy strategy);
OverlapStrategy ParseOverlapStrategy(std::string_view name);

struct DefenseConfig {
  int kernel = kDefaultKernel;
  int stride = kDefaultStride;
  double eps = kDefaultEps;
  MinPts min_pts = MinPts::Absolute(kDefaultMinPts);
  ReplacementMode replacement = ReplacementMode::kMean;
  DistanceKind distance = DistanceKind::kRms;
  OverlapStrategy overlap = OverlapStrategy::kSequential;
  double shrinkage_lambda = kDefaultShrinkage;

  void Validate() const;
  friend bool operator==(const DefenseConfig&, const DefenseConfig&) = default;
};

// Sets one field from its key ("kernel", "stride", "eps", "min_pts",
// "replacement", "distance", "overlap", "shrinkage_lambda"). Dashes in keys
// are accepted in place of underscores.
void ApplyConfigValue(DefenseConfig& cfg, std::string_view key, std::string_view value);

// Flat "key = value" file; '#' starts a comment. Values override `base`.
DefenseConfig LoadConfigFile(const std::filesystem::path& path, DefenseConfig base = {});
std::string FormatConfig(const DefenseConfig& cfg);

}  // namespace patchdef

#endif  // PATCHDEF_CONFIG_H_
