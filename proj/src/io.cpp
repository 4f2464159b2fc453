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

#include "mast/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "serialization code assumes a little-endian host");

namespace mast {

namespace {

constexpr char kFeatureMagic[8] = {'M', 'A', 'S', 'T', 'F', '1', '\0', '\0'};
constexpr char kCheckpointMagic[8] = {'M', 'A', 'S', 'T',
                                      'C', '1', '\0', '\0'};

void put_u16(std::string& buf, uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_bytes(std::string& buf, const void* p, size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

class Reader {
 public:
  Reader(const uint8_t* p, size_t n, std::string what)
      : p_(p), n_(n), what_(std::move(what)) {}

  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(p_[pos_] | (p_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  void floats(std::vector<float>& out, size_t count) {
    need(count * 4);
    out.resize(count);
    std::memcpy(out.data(), p_ + pos_, count * 4);
    pos_ += count * 4;
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return n_ - pos_; }

 private:
  void need(size_t n) {
    if (pos_ + n > n_) {
      throw DataError(what_ + ": truncated (need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ")");
    }
  }
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
  std::string what_;
};

std::vector<uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write: " + path);
}

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> t{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1) ? 0xedb88320u ^ (c >> 1) : (c >> 1);
    }
    t[i] = c;
  }
  return t;
}

}  // namespace

uint32_t crc32(std::span<const uint8_t> data) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = 0xffffffffu;
  for (uint8_t b : data) c = table[(c ^ b) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

void write_feature_file(const std::string& path, const Shape& shape,
                        std::span<const float> data) {
  if (numel(shape) != static_cast<int64_t>(data.size())) {
    throw ArgumentError("feature file: payload does not match shape " +
                        shape_str(shape));
  }
  std::string buf;
  put_bytes(buf, kFeatureMagic, 8);
  put_u32(buf, static_cast<uint32_t>(shape.size()));
  for (int e : shape) put_u32(buf, static_cast<uint32_t>(e));
  put_bytes(buf, data.data(), data.size() * 4);
  spit(path, buf);
}

std::pair<Shape, std::vector<float>> read_feature_file(
    const std::string& path) {
  auto bytes = slurp(path);
  Reader r(bytes.data(), bytes.size(), "feature file " + path);
  if (r.str(8) != std::string(kFeatureMagic, 8)) {
    throw DataError("feature file " + path + ": bad magic");
  }
  const uint32_t rank = r.u32();
  if (rank == 0 || rank > 8) {
    throw DataError("feature file " + path + ": implausible rank " +
                    std::to_string(rank));
  }
  Shape shape;
  int64_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint32_t e = r.u32();
    if (e == 0 || e > (1u << 24)) {
      throw DataError("feature file " + path + ": bad extent " +
                      std::to_string(e));
    }
    shape.push_back(static_cast<int>(e));
    n *= e;
  }
  std::vector<float> data;
  r.floats(data, static_cast<size_t>(n));
  return {std::move(shape), std::move(data)};
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ostringstream out;
  out << "relative_path,label_id\n";
  for (const auto& e : entries) {
    out << e.relative_path << "," << e.label << "\n";
  }
  spit(path, out.str());
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      if (line != "relative_path,label_id") {
        throw DataError("manifest " + path + ": bad header '" + line + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    const size_t comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) {
      throw DataError("manifest " + path + ": malformed line " +
                      std::to_string(lineno));
    }
    ManifestEntry e;
    e.relative_path = line.substr(0, comma);
    try {
      e.label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw DataError("manifest " + path + ": bad label on line " +
                      std::to_string(lineno));
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& entries) {
  std::string buf;
  put_bytes(buf, kCheckpointMagic, 8);
  put_u32(buf, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xffff) {
      throw ArgumentError("checkpoint: entry name too long: " + e.name);
    }
    if (numel(e.shape) != static_cast<int64_t>(e.data.size())) {
      throw ArgumentError("checkpoint: entry '" + e.name +
                          "' payload does not match shape " +
                          shape_str(e.shape));
    }
    put_u16(buf, static_cast<uint16_t>(e.name.size()));
    put_bytes(buf, e.name.data(), e.name.size());
    put_u32(buf, static_cast<uint32_t>(e.shape.size()));
    for (int d : e.shape) put_u32(buf, static_cast<uint32_t>(d));
    put_bytes(buf, e.data.data(), e.data.size() * 4);
  }
  const uint32_t crc = crc32(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(buf.data()), buf.size()));
  put_u32(buf, crc);
  spit(path, buf);
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  auto bytes = slurp(path);
  if (bytes.size() < 16) {
    throw IoError("checkpoint " + path + ": file too small");
  }
  const size_t body = bytes.size() - 4;
  uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 4);
  const uint32_t actual =
      crc32(std::span<const uint8_t>(bytes.data(), body));
  if (stored != actual) {
    throw IoError("checkpoint " + path + ": checksum mismatch (stored " +
                  std::to_string(stored) + ", computed " +
                  std::to_string(actual) + ")");
  }
  Reader r(bytes.data(), body, "checkpoint " + path);
  if (r.str(8) != std::string(kCheckpointMagic, 8)) {
    throw IoError("checkpoint " + path + ": bad magic");
  }
  const uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    e.name = r.str(r.u16());
    const uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) {
      throw IoError("checkpoint " + path + ": entry '" + e.name +
                    "' has implausible rank " + std::to_string(rank));
    }
    int64_t n = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      const uint32_t d = r.u32();
      if (d == 0 || d > (1u << 24)) {
        throw IoError("checkpoint " + path + ": entry '" + e.name +
                      "' has bad extent " + std::to_string(d));
      }
      e.shape.push_back(static_cast<int>(d));
      n *= d;
    }
    r.floats(e.data, static_cast<size_t>(n));
    out.push_back(std::move(e));
  }
  if (r.remaining() != 0) {
    throw IoError("checkpoint " + path + ": trailing bytes after entries");
  }
  return out;
}

}  // namespace mast
