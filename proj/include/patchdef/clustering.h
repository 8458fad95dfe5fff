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

#ifndef PATCHDEF_CLUSTERING_H_
#define PATCHDEF_CLUSTERING_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "patchdef/image.h"

namespace patchdef {

using PointView = std::span<const double>;

enum class DistanceKind {
  kRms,        // sqrt(sum (a_i - b_i)^2 / d)
  kEuclidean,  // sqrt(sum (a_i - b_i)^2)
  kCosine,     // 1 - cos(a, b); two zero vectors are at distance 0
};

std::string_view ToString(DistanceKind kind);
// Accepts "rms", "euclidean", "cosine"; throws Error otherwise.
DistanceKind ParseDistanceKind(std::string_view name);

// Throws DimensionError when the lengths differ.
double Distance(PointView a, PointView b, DistanceKind kind = DistanceKind::kRms);

// Symmetric n x n matrix of pairwise distances. Rows may be filled by
// several worker threads; the result does not depend on the thread count.
class DistanceMatrix {
 public:
  DistanceMatrix(std::span<const PointView> points, DistanceKind kind,
                 int threads = 1);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

struct ClusterParams {
  double eps = 0.4;
  int min_pts = 1201;

  // Throws Error unless eps > 0 and min_pts >= 1.
  void Validate() const;
};

class ClusterLabels {
 public:
  static constexpr int kNoise = -1;

  ClusterLabels() = default;
  ClusterLabels(std::vector<int> labels, int cluster_count);

  std::size_t size() const { return labels_.size(); }
  int operator[](std::size_t i) const { return labels_[i]; }
  bool is_noise(std::size_t i) const { return labels_[i] == kNoise; }
  int cluster_count() const { return cluster_count_; }
  std::span<const int> labels() const { return labels_; }

  friend bool operator==(const ClusterLabels&, const ClusterLabels&) = default;

 private:
  std::vector<int> labels_;
  int cluster_count_ = 0;
};

// Indices p with dist(points[p], points[q]) <= eps, in ascending order. The
// query point is always included.
std::vector<std::size_t> RegionQuery(std::span<const PointView> points,
                                     std::size_t q, double eps,
                                     DistanceKind kind = DistanceKind::kRms);
std::vector<std::size_t> RegionQuery(const DistanceMatrix& dist, std::size_t q,
                                     double eps);

// Density-based clustering. A point is core when its self-inclusive
// eps-neighbourhood holds at least min_pts points; clusters are the maximal
// density-connected sets grown from core points visited in ascending index
// order; everything unreachable from a core point is Noise. A border point
// reachable from several clusters joins the first one to reach it.
ClusterLabels Dbscan(std::span<const PointView> points, const ClusterParams& params,
                     DistanceKind kind = DistanceKind::kRms);
ClusterLabels Dbscan(const DistanceMatrix& dist, const ClusterParams& params);

std::vector<std::size_t> ExtractNoise(const ClusterLabels& labels);

}  // namespace patchdef

#endif  // PATCHDEF_CLUSTERING_H_
