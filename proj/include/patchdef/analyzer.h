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

#ifndef PATCHDEF_ANALYZER_H_
#define PATCHDEF_ANALYZER_H_

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "patchdef/clustering.h"
#include "patchdef/segmenter.h"

namespace patchdef {

class SingularCovarianceError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kDefaultShrinkage = 0.1;

enum class CovarianceSolver {
  kAuto,     // low-rank when the working dimension exceeds the sample count
  kDense,    // Cholesky of the full covariance
  kLowRank,  // Woodbury identity over the n x n capacitance matrix
};

struct FitOptions {
  // Weight of the scaled-identity target: S = (1 - l) S_sample + l (tr S_sample / d) I.
  double lambda = kDefaultShrinkage;
  // When set, samples are first projected onto the leading principal
  // components that explain at least this fraction of the variance.
  std::optional<double> pca_variance;
  CovarianceSolver solver = CovarianceSolver::kAuto;
};

// Gaussian fit to a set of equal-length vectors with a shrunk covariance.
//
// The covariance is never inverted explicitly. With d <= n it is factored
// directly; with d > n (the usual case for image segments, where the sample
// covariance is rank deficient) the quadratic form is evaluated through the
// Woodbury identity,
//
//   (a I + c X^T X)^-1 = (1/a) [I - c X^T (a I + c X X^T)^-1 X],
//
// which only needs a Cholesky factor of an n x n matrix.
class SegmentDistribution {
 public:
  static SegmentDistribution Fit(std::span<const PointView> samples,
                                 const FitOptions& options = {});

  // Length of the input vectors.
  std::size_t dimension() const { return static_cast<std::size_t>(mean_.size()); }
  // Length after the optional principal-component projection.
  std::size_t working_dimension() const { return static_cast<std::size_t>(samples_.cols()); }
  std::size_t sample_count() const { return static_cast<std::size_t>(samples_.rows()); }
  double shrinkage_lambda() const { return lambda_; }
  bool uses_low_rank() const { return low_rank_; }
  bool uses_projection() const { return projection_.has_value(); }

  const Eigen::VectorXd& mean() const { return mean_; }
  // Dense covariance in the working space. Materialises a d x d matrix.
  Eigen::MatrixXd Covariance() const;

  double SquaredMahalanobis(PointView x) const;
  double Mahalanobis(PointView x) const;

 private:
  SegmentDistribution() = default;
  Eigen::VectorXd Whitenable(PointView x) const;

  Eigen::VectorXd mean_;
  std::optional<Eigen::MatrixXd> projection_;  // d x r, orthonormal columns
  Eigen::MatrixXd samples_;                    // centred, n x working dim
  double lambda_ = 0.0;
  double ridge_ = 0.0;  // lambda * tr(S_sample) / d
  double scale_ = 0.0;  // (1 - lambda) / (n - 1)
  bool low_rank_ = false;
  Eigen::LLT<Eigen::MatrixXd> factor_;
};

// Fits to the segment vectors of `grid`. Throws Error for fewer than two
// segments or lambda outside (0, 1] (lambda = 0 is allowed through
// SegmentDistribution::Fit for well-conditioned data).
SegmentDistribution FitDistribution(const SegmentGrid& grid, double lambda);

std::vector<double> MahalanobisAll(const SegmentDistribution& dist,
                                   std::span<const PointView> points);

enum class Modality { kUnimodal, kBimodal };

struct DistanceReport {
  std::vector<double> distances;
  Modality modality = Modality::kUnimodal;
  double separation_score = 0.0;
  double threshold = 0.0;
  double low_mean = 0.0;
  double high_mean = 0.0;
  std::size_t high_count = 0;
};

inline constexpr double kBimodalSeparation = 2.0;

// Splits the values with an exact 1-D two-means partition and scores the gap
// as |m2 - m1| / (s1 + s2 + 1e-12). Bimodal iff the score exceeds 2.
DistanceReport ModalityReport(std::vector<double> distances);

struct HistogramBin {
  double left;
  double right;
  std::size_t count;
};

// Equal-width bins over [min, max]. All-equal input collapses to one bin.
std::vector<HistogramBin> Histogram(std::span<const double> values, int bins);
// CSV "bin_left,bin_right,count".
void ExportHistogram(std::span<const double> values,
                     const std::filesystem::path& path, int bins);

}  // namespace patchdef

#endif  // PATCHDEF_ANALYZER_H_
