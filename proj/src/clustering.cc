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

#include "patchdef/clustering.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <thread>

namespace patchdef {

namespace {

constexpr int kUnvisited = 0;

double SquaredDiff(PointView a, PointView b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    acc += t * t;
  }
  return acc;
}

double CosineDistance(PointView a, PointView b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 && bb == 0.0) return 0.0;
  if (aa == 0.0 || bb == 0.0) return 1.0;
  const double cos = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
  return 1.0 - cos;
}

// Shared expansion over an abstract neighbourhood oracle.
template <typename Neighbours>
ClusterLabels RunDbscan(std::size_t n, const ClusterParams& params,
                        Neighbours&& neighbours) {
  params.Validate();
  if (n == 0) throw Error("dbscan requires at least one point");
  const auto min_pts = static_cast<std::size_t>(params.min_pts);

  std::vector<int> label(n, kUnvisited);
  int cluster = 0;
  std::deque<std::size_t> seeds;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    std::vector<std::size_t> hood = neighbours(p);
    if (hood.size() < min_pts) {
      label[p] = ClusterLabels::kNoise;
      continue;
    }
    ++cluster;
    label[p] = cluster;
    seeds.assign(hood.begin(), hood.end());
    while (!seeds.empty()) {
      const std::size_t q = seeds.front();
      seeds.pop_front();
      if (label[q] == ClusterLabels::kNoise) {
        // Border point: previously judged non-core, now reached.
        label[q] = cluster;
        continue;
      }
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      std::vector<std::size_t> q_hood = neighbours(q);
      if (q_hood.size() >= min_pts) {
        for (std::size_t r : q_hood) {
          if (label[r] == kUnvisited || label[r] == ClusterLabels::kNoise) {
            seeds.push_back(r);
          }
        }
      }
    }
  }
  return ClusterLabels(std::move(label), cluster);
}

}  // namespace

std::string_view ToString(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kRms:
      return "rms";
    case DistanceKind::kEuclidean:
      return "euclidean";
    case DistanceKind::kCosine:
      return "cosine";
  }
  return "rms";
}

DistanceKind ParseDistanceKind(std::string_view name) {
  if (name == "rms") return DistanceKind::kRms;
  if (name == "euclidean") return DistanceKind::kEuclidean;
  if (name == "cosine") return DistanceKind::kCosine;
  throw Error("unknown distance kind: " + std::string(name));
}

double Distance(PointView a, PointView b, DistanceKind kind) {
  if (a.size() != b.size()) {
    throw DimensionError("distance between vectors of length " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  switch (kind) {
    case DistanceKind::kRms:
      if (a.empty()) return 0.0;
      return std::sqrt(SquaredDiff(a, b) / static_cast<double>(a.size()));
    case DistanceKind::kEuclidean:
      return std::sqrt(SquaredDiff(a, b));
    case DistanceKind::kCosine:
      return CosineDistance(a, b);
  }
  return 0.0;
}

DistanceMatrix::DistanceMatrix(std::span<const PointView> points,
                               DistanceKind kind, int threads)
    : n_(points.size()), d_(points.size() * points.size(), 0.0) {
  for (std::size_t i = 1; i < n_; ++i) {
    if (points[i].size() != points[0].size()) {
      throw DimensionError("points differ in dimension");
    }
  }
  // Row i owns entries (i, j > i); mirrored afterwards.
  auto fill_rows = [&](std::size_t start, std::size_t step) {
    for (std::size_t i = start; i < n_; i += step) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        d_[i * n_ + j] = Distance(points[i], points[j], kind);
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n_ < 64) {
    fill_rows(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w, workers);
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) d_[j * n_ + i] = d_[i * n_ + j];
  }
}

void ClusterParams::Validate() const {
  if (!(eps > 0.0)) throw Error("eps must be positive");
  if (min_pts < 1) throw Error("minPts must be at least 1");
}

ClusterLabels::ClusterLabels(std::vector<int> labels, int cluster_count)
    : labels_(std::move(labels)), cluster_count_(cluster_count) {
  for (int l : labels_) {
    if (l != kNoise && (l < 1 || l > cluster_count_)) {
      throw Error("cluster label out of range");
    }
  }
}

std::vector<std::size_t> RegionQuery(std::span<const PointView> points,
                                     std::size_t q, double eps,
                                     DistanceKind kind) {
  if (q >= points.size()) throw Error("query index out of range");
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (p == q || Distance(points[q], points[p], kind) <= eps) out.push_back(p);
  }
  return out;
}

std::vector<std::size_t> RegionQuery(const DistanceMatrix& dist, std::size_t q,
                                     double eps) {
  if (q >= dist.size()) throw Error("query index out of range");
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < dist.size(); ++p) {
    if (p == q || dist(q, p) <= eps) out.push_back(p);
  }
  return out;
}

ClusterLabels Dbscan(std::span<const PointView> points, const ClusterParams& params,
                     DistanceKind kind) {
  return RunDbscan(points.size(), params, [&](std::size_t q) {
    return RegionQuery(points, q, params.eps, kind);
  });
}

ClusterLabels Dbscan(const DistanceMatrix& dist, const ClusterParams& params) {
  return RunDbscan(dist.size(), params, [&](std::size_t q) {
    return RegionQuery(dist, q, params.eps);
  });
}

std::vector<std::size_t> ExtractNoise(const ClusterLabels& labels) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.is_noise(i)) out.push_back(i);
  }
  return out;
}

}  // namespace patchdef
