// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
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

#ifndef MAST_IO_HPP_
#define MAST_IO_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mast/common.hpp"

namespace mast {

// Feature files: magic "MASTF1\0\0" (8 bytes), u32 LE rank, u32 LE extents,
// then float32 LE row-major payload.
void write_feature_file(const std::string& path, const Shape& shape,
                        std::span<const float> data);
std::pair<Shape, std::vector<float>> read_feature_file(const std::string& path);

// Manifest: CSV `relative_path,label_id` with a header line.
struct ManifestEntry {
  std::string relative_path;
  int label = -1;
};
void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

uint32_t crc32(std::span<const uint8_t> data);

// Checkpoints: magic "MASTC1\0\0", u32 LE entry count, then per entry
// u16 LE name length, UTF-8 name, u32 LE rank, u32 LE extents, float32 LE
// payload; finally a u32 LE CRC32 of all preceding bytes.
struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};
void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

}  // namespace mast

#endif  // MAST_IO_HPP_
