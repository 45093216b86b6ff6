// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cgl/tensor.hpp"

namespace cgl::io {

/// Little-endian byte sink used by every binary format in the project.
class ByteWriter {
 public:
  void bytes(std::string_view data) { buffer_.append(data); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);  // u32 length + bytes
  void tensor(const Tensor& t);   // u32 rank, u64 dims, f64 values

  const std::string& buffer() const noexcept { return buffer_; }

 private:
  std::string buffer_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  std::string_view bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Tensor tensor();
  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n);

  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

/// Named arrays plus a JSON metadata blob behind the "CGL1" magic.
///
/// Layout: magic, u32 format version, u32 kind, str metadata JSON, u32 entry
/// count, then per entry str name and tensor.
struct Archive {
  static constexpr std::string_view kMagic = "CGL1";
  static constexpr std::uint32_t kVersion = 1;
  enum class Kind : std::uint32_t { kEncoders = 1, kCheckpoint = 2 };

  struct Entry {
    std::string name;
    Tensor value;
  };

  Kind kind = Kind::kCheckpoint;
  std::string metadata = "{}";
  std::vector<Entry> entries;

  const Tensor* find(std::string_view name) const;
  std::string serialize() const;
  static Archive parse(std::string data, const std::string& source);
};

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cgl::io
