// Copyright 2026 The sbx-forge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Small filesystem helpers. Every output file goes through AtomicWriteFile
// so an interrupted campaign never leaves a truncated artifact behind.
#ifndef SBXFORGE_FILE_UTIL_H_
#define SBXFORGE_FILE_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sbxforge {

// Writes to a sibling temp file and renames it over `path`. Creates parent
// directories. Throws std::runtime_error on I/O failure.
void AtomicWriteFile(const std::filesystem::path& path, std::string_view contents);
void AtomicWriteFile(const std::filesystem::path& path, std::span<const uint8_t> contents);

// Throws LoadError if the file cannot be read.
std::string ReadTextFile(const std::filesystem::path& path);
std::vector<uint8_t> ReadBinaryFile(const std::filesystem::path& path);

std::string HexEncode(std::span<const uint8_t> bytes);
// Throws LoadError on odd length or non-hex characters.
std::vector<uint8_t> HexDecode(std::string_view hex);

}  // namespace sbxforge

#endif  // SBXFORGE_FILE_UTIL_H_
