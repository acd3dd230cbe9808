// cidnst/bytes.hpp  Little-endian primitives shared by the binary file
// formats; written out explicitly so files are portable across hosts.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_BYTES_HPP_
#define CIDNST_BYTES_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cidnst/common.hpp"

namespace cidnst {
namespace bytes {

inline void PutU16(std::string* out, uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void PutU32(std::string* out, uint32_t v) {
  for (int i = 0; i < 4; i++) {
    out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

inline void PutU64(std::string* out, uint64_t v) {
  for (int i = 0; i < 8; i++) {
    out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

inline void PutF64(std::string* out, double d) {
  uint64_t v;
  static_assert(sizeof(v) == sizeof(d));
  std::memcpy(&v, &d, 8);
  PutU64(out, v);
}

// Sequential reader over a whole file image; any read past the end reports
// the byte offset, so corruption is caught rather than misparsed.
class ByteReader {
 public:
  ByteReader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  bool AtEnd() const { return pos_ == bytes_.size(); }

  uint16_t U16() { return static_cast<uint16_t>(Byte() | (Byte() << 8)); }

  uint32_t U32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= static_cast<uint32_t>(Byte()) << (8 * i);
    return v;
  }

  uint64_t U64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= static_cast<uint64_t>(Byte()) << (8 * i);
    return v;
  }

  double F64() {
    uint64_t v = U64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }

  std::string Str(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  uint32_t Byte() {
    Need(1);
    return static_cast<unsigned char>(bytes_[pos_++]);
  }

  void Need(size_t n) {
    if (pos_ + n > bytes_.size()) {
      Fail(ErrorKind::kFormat,
           path_ + ": truncated at byte " + std::to_string(pos_));
    }
  }

  std::string bytes_;
  std::string path_;
  size_t pos_ = 0;
};

inline std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  std::string b((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  if (in.bad()) Fail(ErrorKind::kIo, "read failed on " + path);
  return b;
}

inline void WriteAll(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "write failed on " + path);
}

}  // namespace bytes
}  // namespace cidnst

#endif  // CIDNST_BYTES_HPP_
