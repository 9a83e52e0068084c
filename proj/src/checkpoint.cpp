// Copyright 2026 The Agrifed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "agrifed/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "agrifed/errors.hpp"

namespace agrifed {

namespace {

constexpr char kMagic[8] = {'A', 'F', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);

  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& e : params.entries) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) write_pod<std::uint64_t>(os, d);
    write_pod<std::uint8_t>(os, e.is_bn ? 1 : 0);
  }
  for (const auto& e : params.entries)
    os.write(reinterpret_cast<const char*>(e.values.data()),
             static_cast<std::streamsize>(e.values.size() * sizeof(double)));
  if (!os) throw IoError("write failed: " + path);
}

ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);

  const auto count = read_pod<std::uint32_t>(is, path);
  ParameterSet params;
  params.entries.resize(count);
  for (auto& e : params.entries) {
    const auto name_len = read_pod<std::uint32_t>(is, path);
    e.name.resize(name_len);
    is.read(e.name.data(), name_len);
    if (!is) throw IoError("truncated checkpoint: " + path);
    const auto ndim = read_pod<std::uint32_t>(is, path);
    e.shape.resize(ndim);
    std::size_t total = 1;
    for (auto& d : e.shape) {
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(is, path));
      total *= d;
    }
    e.is_bn = read_pod<std::uint8_t>(is, path) != 0;
    e.values.resize(total);
  }
  for (auto& e : params.entries) {
    is.read(reinterpret_cast<char*>(e.values.data()),
            static_cast<std::streamsize>(e.values.size() * sizeof(double)));
    if (!is) throw IoError("truncated checkpoint payload: " + path);
  }
  return params;
}

std::string describe_checkpoint(const std::string& path) {
  const ParameterSet params = load_checkpoint(path);
  std::ostringstream os;
  os << path << ": " << params.entries.size() << " entries, "
     << params.total_size() << " values\n";
  for (const auto& e : params.entries) {
    os << "  " << e.name << " [";
    for (std::size_t i = 0; i < e.shape.size(); ++i)
      os << (i ? "x" : "") << e.shape[i];
    os << "]" << (e.is_bn ? " bn" : "") << "\n";
  }
  return os.str();
}

}  // namespace agrifed
