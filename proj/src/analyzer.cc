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

#include "patchdef/analyzer.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "patchdef/fileutil.h"

namespace patchdef {

namespace {

// Smallest admissible ridge; keeps constant inputs factorable when lambda > 0.
constexpr double kRidgeFloor = 1e-12;

Eigen::Map<const Eigen::VectorXd> AsVector(PointView v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

SegmentDistribution SegmentDistribution::Fit(std::span<const PointView> samples,
                                             const FitOptions& options) {
  if (samples.size() < 2) throw Error("need at least two samples to fit a distribution");
  if (!(options.lambda >= 0.0 && options.lambda <= 1.0)) {
    throw Error("shrinkage lambda must lie in [0, 1]");
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(samples[0].size());
  if (d == 0) throw DimensionError("cannot fit zero-length vectors");

  SegmentDistribution dist;
  dist.lambda_ = options.lambda;
  dist.mean_ = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd centred(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(samples[i].size()) != d) {
      throw DimensionError("samples differ in length");
    }
    centred.row(i) = AsVector(samples[i]).transpose();
    dist.mean_ += AsVector(samples[i]);
  }
  dist.mean_ /= static_cast<double>(n);
  centred.rowwise() -= dist.mean_.transpose();

  if (options.pca_variance) {
    const double keep = *options.pca_variance;
    if (!(keep > 0.0 && keep <= 1.0)) throw Error("pca variance fraction must lie in (0, 1]");
    // Principal axes from the n x n Gram matrix: if G u = s u then X^T u / sqrt(s)
    // is a unit principal direction with variance s / (n - 1).
    Eigen::MatrixXd gram = centred * centred.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
    const double total = std::max(values.sum(), 0.0);
    Eigen::Index rank = 0;
    double acc = 0.0;
    for (Eigen::Index k = n - 1; k >= 0; --k) {
      if (values(k) <= 1e-12 * std::max(total, 1.0)) break;
      acc += values(k);
      ++rank;
      if (acc >= keep * total) break;
    }
    if (rank == 0) rank = 1;
    Eigen::MatrixXd axes(d, rank);
    for (Eigen::Index r = 0; r < rank; ++r) {
      const Eigen::Index k = n - 1 - r;
      const double s = values(k);
      if (s > 0.0) {
        axes.col(r) = centred.transpose() * eig.eigenvectors().col(k) / std::sqrt(s);
      } else {
        axes.col(r) = Eigen::VectorXd::Unit(d, r % d);
      }
    }
    dist.samples_ = centred * axes;
    dist.projection_ = std::move(axes);
  } else {
    dist.samples_ = std::move(centred);
  }

  const Eigen::Index m = dist.samples_.cols();
  const double trace = dist.samples_.squaredNorm() / static_cast<double>(n - 1);
  dist.scale_ = (1.0 - options.lambda) / static_cast<double>(n - 1);
  dist.ridge_ = options.lambda * trace / static_cast<double>(m);
  if (options.lambda > 0.0) dist.ridge_ = std::max(dist.ridge_, options.lambda * kRidgeFloor);

  switch (options.solver) {
    case CovarianceSolver::kAuto:
      dist.low_rank_ = m > n && dist.ridge_ > 0.0;
      break;
    case CovarianceSolver::kDense:
      dist.low_rank_ = false;
      break;
    case CovarianceSolver::kLowRank:
      if (dist.ridge_ <= 0.0) {
        throw SingularCovarianceError("low-rank solver requires a positive shrinkage ridge");
      }
      dist.low_rank_ = true;
      break;
  }

  if (dist.low_rank_) {
    Eigen::MatrixXd capacitance = dist.scale_ * (dist.samples_ * dist.samples_.transpose());
    capacitance.diagonal().array() += dist.ridge_;
    dist.factor_.compute(capacitance);
  } else {
    dist.factor_.compute(dist.Covariance());
  }
  if (dist.factor_.info() != Eigen::Success) {
    throw SingularCovarianceError("covariance is not positive definite");
  }
  if (!dist.low_rank_) {
    // LLT accepts some numerically singular matrices; reject a collapsed pivot.
    const Eigen::VectorXd diag = dist.factor_.matrixLLT().diagonal();
    const double max_pivot = diag.maxCoeff();
    if (!(diag.minCoeff() > 1e-10 * std::max(max_pivot, 1e-300))) {
      throw SingularCovarianceError("covariance is numerically singular");
    }
  }
  return dist;
}

Eigen::MatrixXd SegmentDistribution::Covariance() const {
  Eigen::MatrixXd cov = scale_ * (samples_.transpose() * samples_);
  cov.diagonal().array() += ridge_;
  return cov;
}

Eigen::VectorXd SegmentDistribution::Whitenable(PointView x) const {
  if (x.size() != dimension()) {
    throw DimensionError("vector length does not match the fitted distribution");
  }
  Eigen::VectorXd diff = AsVector(x) - mean_;
  if (projection_) return projection_->transpose() * diff;
  return diff;
}

double SegmentDistribution::SquaredMahalanobis(PointView x) const {
  const Eigen::VectorXd v = Whitenable(x);
  double q;
  if (low_rank_) {
    const Eigen::VectorXd u = samples_ * v;
    q = (v.squaredNorm() - scale_ * u.dot(factor_.solve(u))) / ridge_;
  } else {
    q = v.dot(factor_.solve(v));
  }
  return std::max(q, 0.0);
}

double SegmentDistribution::Mahalanobis(PointView x) const {
  return std::sqrt(SquaredMahalanobis(x));
}

SegmentDistribution FitDistribution(const SegmentGrid& grid, double lambda) {
  if (grid.size() < 2) throw Error("need at least two segments to fit a distribution");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error("shrinkage lambda must lie in (0, 1]");
  const auto vectors = grid.Vectors();
  FitOptions options;
  options.lambda = lambda;
  return SegmentDistribution::Fit(vectors, options);
}

std::vector<double> MahalanobisAll(const SegmentDistribution& dist,
                                   std::span<const PointView> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(dist.Mahalanobis(p));
  return out;
}

DistanceReport ModalityReport(std::vector<double> distances) {
  if (distances.size() < 4) throw Error("modality report needs at least four distances");
  DistanceReport report;
  std::vector<double> sorted = distances;
  report.distances = std::move(distances);
  std::sort(sorted.begin(), sorted.end());

  if (sorted.front() == sorted.back()) {
    report.threshold = sorted.front();
    report.low_mean = report.high_mean = sorted.front();
    return report;
  }

  // Exact 1-D two-means: the optimal partition is a split of the sorted data.
  const std::size_t n = sorted.size();
  std::vector<double> sum(n + 1, 0.0), sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[i + 1] = sum[i] + sorted[i];
    sq[i + 1] = sq[i] + sorted[i] * sorted[i];
  }
  auto sse = [&](std::size_t lo, std::size_t hi) {
    const double cnt = static_cast<double>(hi - lo);
    const double s = sum[hi] - sum[lo];
    return std::max(0.0, (sq[hi] - sq[lo]) - s * s / cnt);
  };
  std::size_t best = 1;
  double best_cost = sse(0, 1) + sse(1, n);
  for (std::size_t k = 2; k < n; ++k) {
    const double cost = sse(0, k) + sse(k, n);
    if (cost < best_cost) {
      best_cost = cost;
      best = k;
    }
  }

  const auto lo_n = static_cast<double>(best);
  const auto hi_n = static_cast<double>(n - best);
  const double m1 = sum[best] / lo_n;
  const double m2 = (sum[n] - sum[best]) / hi_n;
  const double s1 = std::sqrt(sse(0, best) / lo_n);
  const double s2 = std::sqrt(sse(best, n) / hi_n);

  report.low_mean = m1;
  report.high_mean = m2;
  report.high_count = n - best;
  report.threshold = 0.5 * (m1 + m2);
  report.separation_score = std::abs(m2 - m1) / (s1 + s2 + 1e-12);
  report.modality = report.separation_score > kBimodalSeparation ? Modality::kBimodal
                                                                 : Modality::kUnimodal;
  return report;
}

std::vector<HistogramBin> Histogram(std::span<const double> values, int bins) {
  if (bins < 2) throw Error("histogram needs at least two bins");
  if (values.empty()) throw Error("histogram of an empty sample");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) return {{lo, hi, values.size()}};

  const double width = (hi - lo) / bins;
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    out[b].left = lo + width * b;
    out[b].right = b + 1 == bins ? hi : lo + width * (b + 1);
    out[b].count = 0;
  }
  for (double v : values) {
    auto b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    ++out[b].count;
  }
  return out;
}

void ExportHistogram(std::span<const double> values, const std::filesystem::path& path,
                     int bins) {
  std::ostringstream csv;
  csv << "bin_left,bin_right,count\n";
  for (const auto& bin : Histogram(values, bins)) {
    csv << FormatReal(bin.left) << ',' << FormatReal(bin.right) << ',' << bin.count
        << '\n';
  }
  WriteTextAtomically(path, csv.str());
}

}  // namespace patchdef
