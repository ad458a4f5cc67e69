// Copyright 2026 The vslab Authors.
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

#include "vslab/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "vslab/error.hpp"

namespace vslab {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = ::crc32(c, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::bytes(std::span<const std::uint8_t> b) {
  buf_.insert(buf_.end(), b.begin(), b.end());
}

void ByteWriter::str(std::string_view s) {
  u16(static_cast<std::uint16_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }

void ByteWriter::seal() { u32(crc32(buf_)); }

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > remaining()) throw ChecksumMismatch("unexpected end of data");
  auto s = buf_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }
std::uint16_t ByteReader::u16() {
  auto s = take(2);
  return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
}
std::uint32_t ByteReader::u32() {
  auto s = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | s[i];
  return v;
}
std::uint64_t ByteReader::u64() {
  auto s = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | s[i];
  return v;
}
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) { return take(n); }

std::string ByteReader::str() {
  const std::uint16_t n = u16();
  auto s = take(n);
  return {s.begin(), s.end()};
}

void ByteReader::expect_magic(std::string_view m) {
  if (remaining() < m.size() || std::memcmp(buf_.data() + pos_, m.data(), m.size()) != 0) {
    throw FormatVersionMismatch("bad magic, expected " + std::string(m));
  }
  pos_ += m.size();
}

std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> file) {
  if (file.size() < 4) throw ChecksumMismatch("file too short");
  auto payload = file.first(file.size() - 4);
  ByteReader tail(file.subspan(file.size() - 4));
  if (tail.u32() != crc32(payload)) throw ChecksumMismatch("CRC32 does not match");
  return payload;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoFailure("read failed for " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("write failed for " + path.string());
}

}  // namespace vslab
