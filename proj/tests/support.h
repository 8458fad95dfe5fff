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

// Test helpers and reference implementations. The oracles here are written
// from the textbook definitions and share no code with the library.

#ifndef PATCHDEF_TESTS_SUPPORT_H_
#define PATCHDEF_TESTS_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchdef/clustering.h"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("patchdef_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void WriteBytes(const fs::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Plain RMS distance: sqrt(mean squared difference).
inline double RmsDistance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

inline std::vector<patchdef::PointView> Views(const std::vector<std::vector<double>>& pts) {
  std::vector<patchdef::PointView> v;
  v.reserve(pts.size());
  for (const auto& p : pts) v.emplace_back(p);
  return v;
}

// Standard normal draw via Box-Muller on a uniform source.
template <typename Uniform>
double Gaussian(Uniform&& uniform) {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Brute-force density-reachability DBSCAN.
//   core: |N_eps(p)| >= min_pts with p in its own neighbourhood;
//   clusters: connected components of the core-core eps graph;
//   border: non-core within eps of a core point, may belong to several;
//   noise: everything else.
struct OracleResult {
  std::vector<bool> core;
  std::vector<int> component;                  // core points only, else -1
  std::vector<std::set<int>> reachable_from;   // candidate components
  std::set<std::size_t> noise;
  int component_count = 0;
};

inline OracleResult OracleDbscan(const std::vector<std::vector<double>>& pts, double eps,
                                 int min_pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) adj[i][j] = RmsDistance(pts[i], pts[j]) <= eps;

  OracleResult r;
  r.core.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) count += adj[i][j] ? 1 : 0;
    r.core[i] = count >= min_pts;
  }
  // Union-find over core points.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (r.core[i] && r.core[j] && adj[i][j]) parent[find(i)] = find(j);

  std::map<std::size_t, int> root_id;
  r.component.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!r.core[i]) continue;
    auto [it, inserted] = root_id.try_emplace(find(i), static_cast<int>(root_id.size()));
    r.component[i] = it->second;
  }
  r.component_count = static_cast<int>(root_id.size());
  r.reachable_from.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    if (r.core[i]) {
      r.reachable_from[i].insert(r.component[i]);
      continue;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (r.core[j] && adj[i][j]) r.reachable_from[i].insert(r.component[j]);
    if (r.reachable_from[i].empty()) r.noise.insert(i);
  }
  return r;
}

// True when `labels` is a legal DBSCAN labelling per the oracle: identical
// noise set, a bijection between library clusters and oracle components on
// core points, and every border point inside one of its reachable clusters.
inline bool MatchesOracle(const patchdef::ClusterLabels& labels, const OracleResult& o,
                          std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const std::size_t n = o.core.size();
  if (labels.size() != n) return fail("size mismatch");
  std::map<int, int> lib_to_oracle;
  std::map<int, int> oracle_to_lib;
  for (std::size_t i = 0; i < n; ++i) {
    if (!o.core[i]) continue;
    const int lib = labels[i];
    if (lib == patchdef::ClusterLabels::kNoise) return fail("core point labelled noise");
    auto [a, ia] = lib_to_oracle.try_emplace(lib, o.component[i]);
    auto [b, ib] = oracle_to_lib.try_emplace(o.component[i], lib);
    if (a->second != o.component[i] || b->second != lib) return fail("core partition differs");
  }
  if (static_cast<int>(lib_to_oracle.size()) != o.component_count)
    return fail("cluster count differs");
  if (labels.cluster_count() != o.component_count) return fail("reported cluster count differs");
  for (std::size_t i = 0; i < n; ++i) {
    const bool lib_noise = labels[i] == patchdef::ClusterLabels::kNoise;
    if (lib_noise != (o.noise.count(i) == 1)) return fail("noise set differs");
    if (lib_noise || o.core[i]) continue;
    auto it = lib_to_oracle.find(labels[i]);
    if (it == lib_to_oracle.end()) return fail("border point in a cluster without core");
    if (o.reachable_from[i].count(it->second) == 0) return fail("border point not reachable");
  }
  return true;
}

// Dense Gauss-Jordan inverse with partial pivoting; small matrices only.
inline std::vector<std::vector<double>> Invert(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double p = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= p;
      inv[c][k] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

// Textbook Mahalanobis distance with the shrunk covariance formed explicitly.
inline double OracleMahalanobis(const std::vector<std::vector<double>>& samples,
                                const std::vector<double>& x, double lambda) {
  const std::size_t n = samples.size();
  const std::size_t d = x.size();
  std::vector<double> mu(d, 0.0);
  for (const auto& s : samples)
    for (std::size_t j = 0; j < d; ++j) mu[j] += s[j] / static_cast<double>(n);
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& s : samples)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        cov[i][j] += (s[i] - mu[i]) * (s[j] - mu[j]) / static_cast<double>(n - 1);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i][i];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      cov[i][j] = (1.0 - lambda) * cov[i][j] + (i == j ? lambda * trace / d : 0.0);
  const auto inv = Invert(cov);
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) q += (x[i] - mu[i]) * inv[i][j] * (x[j] - mu[j]);
  return std::sqrt(std::max(q, 0.0));
}

}  // namespace testing

#endif  // PATCHDEF_TESTS_SUPPORT_H_
