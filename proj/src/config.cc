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

#include "patchdef/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "patchdef/fileutil.h"

namespace patchdef {

namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

int ParseInt(std::string_view key, std::string_view text) {
  int v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error("invalid integer for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return v;
}

double ParseReal(std::string_view key, std::string_view text) {
  std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw Error("invalid number for " + std::string(key) + ": '" + s + "'");
  }
  return v;
}

}  // namespace

MinPts MinPts::Absolute(int count) {
  if (count < 1) throw Error("minPts must be at least 1");
  MinPts m;
  m.count_ = count;
  return m;
}

MinPts MinPts::Fraction(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error("minPts fraction must lie in (0, 1]");
  MinPts m;
  m.fraction_ = true;
  m.rho_ = rho;
  m.count_ = 0;
  return m;
}

MinPts MinPts::Parse(std::string_view text) {
  text = Trim(text);
  for (std::string_view prefix : {"rho:", "ρ:"}) {
    if (text.starts_with(prefix)) {
      return Fraction(ParseReal("min_pts", text.substr(prefix.size())));
    }
  }
  return Absolute(ParseInt("min_pts", text));
}

int MinPts::Resolve(std::size_t segment_count) const {
  if (!fraction_) return count_;
  // Guard against 0.6 * 10 evaluating to 6.000000000000001.
  const double raw = rho_ * static_cast<double>(segment_count);
  const double nearest = std::round(raw);
  const double v = std::abs(raw - nearest) < 1e-9 ? nearest : std::ceil(raw);
  return std::max(1, static_cast<int>(v));
}

std::string MinPts::ToString() const {
  if (!fraction_) return std::to_string(count_);
  return "rho:" + FormatReal(rho_, 6);
}

std::string_view ToString(ReplacementMode mode) {
  switch (mode) {
    case ReplacementMode::kMin:
      return "min";
    case ReplacementMode::kMean:
      return "mean";
    case ReplacementMode::kMax:
      return "max";
  }
  return "mean";
}

ReplacementMode ParseReplacementMode(std::string_view name) {
  if (name == "min") return ReplacementMode::kMin;
  if (name == "mean") return ReplacementMode::kMean;
  if (name == "max") return ReplacementMode::kMax;
  throw Error("unknown replacement mode: " + std::string(name));
}

std::string_view ToString(OverlapStrategy strategy) {
  return strategy == OverlapStrategy::kSequential ? "sequential" : "union";
}

OverlapStrategy ParseOverlapStrategy(std::string_view name) {
  if (name == "sequential") return OverlapStrategy::kSequential;
  if (name == "union") return OverlapStrategy::kUnionFill;
  throw Error("unknown overlap strategy: " + std::string(name));
}

void DefenseConfig::Validate() const {
  if (kernel < 1) throw Error("kernel must be at least 1");
  if (stride < 1) throw Error("stride must be at least 1");
  if (!(eps > 0.0)) throw Error("eps must be positive");
  if (!(shrinkage_lambda > 0.0 && shrinkage_lambda <= 1.0)) {
    throw Error("shrinkage_lambda must lie in (0, 1]");
  }
}

void ApplyConfigValue(DefenseConfig& cfg, std::string_view raw_key, std::string_view value) {
  std::string key(Trim(raw_key));
  for (char& c : key) {
    if (c == '-') c = '_';
  }
  value = Trim(value);
  if (key == "kernel") {
    cfg.kernel = ParseInt(key, value);
  } else if (key == "stride") {
    cfg.stride = ParseInt(key, value);
  } else if (key == "eps") {
    cfg.eps = ParseReal(key, value);
  } else if (key == "min_pts" || key == "minpts") {
    cfg.min_pts = MinPts::Parse(value);
  } else if (key == "replacement") {
    cfg.replacement = ParseReplacementMode(value);
  } else if (key == "distance" || key == "distance_kind") {
    cfg.distance = ParseDistanceKind(value);
  } else if (key == "overlap") {
    cfg.overlap = ParseOverlapStrategy(value);
  } else if (key == "shrinkage_lambda" || key == "lambda") {
    cfg.shrinkage_lambda = ParseReal(key, value);
  } else {
    throw Error("unknown config key: " + key);
  }
}

DefenseConfig LoadConfigFile(const std::filesystem::path& path, DefenseConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = Trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    ApplyConfigValue(base, view.substr(0, eq), view.substr(eq + 1));
  }
  base.Validate();
  return base;
}

std::string FormatConfig(const DefenseConfig& cfg) {
  std::ostringstream out;
  out << "kernel = " << cfg.kernel << '\n'
      << "stride = " << cfg.stride << '\n'
      << "eps = " << FormatReal(cfg.eps, 9) << '\n'
      << "min_pts = " << cfg.min_pts.ToString() << '\n'
      << "replacement = " << ToString(cfg.replacement) << '\n'
      << "distance = " << ToString(cfg.distance) << '\n'
      << "overlap = " << ToString(cfg.overlap) << '\n'
      << "shrinkage_lambda = " << FormatReal(cfg.shrinkage_lambda, 6) << '\n';
  return out.str();
}

}  // namespace patchdef
