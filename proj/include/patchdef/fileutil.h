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

#ifndef PATCHDEF_FILEUTIL_H_
#define PATCHDEF_FILEUTIL_H_

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace patchdef {

// Runs `writer` against a sibling temp path, then renames it over `path`.
// The temp file is removed if `writer` throws.
void WriteAtomically(const std::filesystem::path& path,
                     const std::function<void(const std::filesystem::path&)>& writer);

void WriteTextAtomically(const std::filesystem::path& path, std::string_view text);

// Regular files in `dir` with a .png extension, sorted by filename.
std::vector<std::filesystem::path> ListPngFiles(const std::filesystem::path& dir);

// Fixed-precision decimal formatting used by every CSV writer ("%.6f",
// "nan" for NaN) so outputs are byte-stable.
std::string FormatReal(double v, int precision = 6);

}  // namespace patchdef

#endif  // PATCHDEF_FILEUTIL_H_
