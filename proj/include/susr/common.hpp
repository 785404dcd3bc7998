// susr/common.hpp

// Copyright 2026 The susr Authors
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

#ifndef SUSR_COMMON_HPP
#define SUSR_COMMON_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace susr {

// Error taxonomy maps onto the CLI exit codes: 1 usage, 2 data/format,
// 3 numerical failure.
class Error : public std::runtime_error {
 public:
  Error(const std::string &msg, int exit_code)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string &msg) : Error(msg, 1) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string &msg) : Error(msg, 2) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string &msg) : Error(msg, 3) {}
};

inline void log_info(const std::string &msg) {
  std::cerr << "susr: " << msg << std::endl;
}

inline void log_warn(const std::string &msg) {
  std::cerr << "susr: WARNING: " << msg << std::endl;
}

// ---------------------------------------------------------------------------
// Little-endian binary primitives. All on-disk formats are little-endian
// regardless of host order.

inline void write_bytes(std::ostream &os, const void *p, std::size_t n) {
  os.write(static_cast<const char *>(p), static_cast<std::streamsize>(n));
  if (!os) throw DataError("write failed");
}

inline void read_exact(std::istream &is, void *p, std::size_t n) {
  is.read(static_cast<char *>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw DataError("unexpected end of file");
}

inline void write_u16(std::ostream &os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  write_bytes(os, b, 2);
}

inline void write_u32(std::ostream &os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; i++) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(os, b, 4);
}

inline void write_u64(std::ostream &os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; i++) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(os, b, 8);
}

inline std::uint16_t read_u16(std::istream &is) {
  unsigned char b[2];
  read_exact(is, b, 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32(std::istream &is) {
  unsigned char b[4];
  read_exact(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; i++) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream &is) {
  unsigned char b[8];
  read_exact(is, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; i++) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f32(std::ostream &os, float v) {
  write_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline void write_f64(std::ostream &os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline float read_f32(std::istream &is) {
  return std::bit_cast<float>(read_u32(is));
}

inline double read_f64(std::istream &is) {
  return std::bit_cast<double>(read_u64(is));
}

// Strings are stored as u32 byte length followed by raw utf-8 bytes.
inline void write_string(std::ostream &os, const std::string &s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  if (!s.empty()) write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream &is) {
  std::uint32_t n = read_u32(is);
  if (n > (1u << 20)) throw DataError("string field too long, corrupt file?");
  std::string s(n, '\0');
  if (n > 0) read_exact(is, s.data(), n);
  return s;
}

// File magics are exactly 8 bytes.
inline void write_magic(std::ostream &os, const char magic[9]) {
  write_bytes(os, magic, 8);
}

inline void expect_magic(std::istream &is, const char magic[9]) {
  char b[8];
  read_exact(is, b, 8);
  if (std::memcmp(b, magic, 8) != 0)
    throw DataError(std::string("bad file magic, expected ") + magic);
}

// Returns true if a record can follow (stream not at EOF), consuming nothing.
inline bool stream_has_more(std::istream &is) {
  return is.peek() != std::char_traits<char>::eof();
}

inline std::ifstream open_input(const std::string &path, bool binary = true) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw DataError("cannot open input file: " + path);
  return is;
}

inline std::ofstream open_output(const std::string &path, bool binary = true) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw DataError("cannot open output file: " + path);
  return os;
}

// ---------------------------------------------------------------------------
// Small text helpers for the tab-separated file formats.

inline std::vector<std::string> split_fields(const std::string &line, char delim = '\t') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string &s, const std::string &what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw DataError("cannot parse " + what + " as a number: '" + s + "'");
  }
}

inline long parse_long(const std::string &s, const std::string &what) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw DataError("cannot parse " + what + " as an integer: '" + s + "'");
  }
}

// Identifiers end up in tab-separated text files, so they must not contain
// separators themselves.
inline void check_identifier(const std::string &id, const std::string &what) {
  if (id.empty()) throw DataError(what + " must not be empty");
  for (char c : id)
    if (c == '\t' || c == '\n' || c == '\r')
      throw DataError(what + " contains tab or newline: '" + id + "'");
}

}  // namespace susr

#endif  // SUSR_COMMON_HPP
