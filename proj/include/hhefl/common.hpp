#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace hhefl {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;

// Error taxonomy; everything user-recoverable derives from HheError.
class HheError : public std::runtime_error {
 public:
  explicit HheError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParameterError : public HheError {
 public:
  explicit ParameterError(const std::string& msg) : HheError(msg) {}
};

class CapacityError : public HheError {
 public:
  explicit CapacityError(const std::string& msg) : HheError(msg) {}
};

class MissingKeyError : public HheError {
 public:
  explicit MissingKeyError(const std::string& msg) : HheError(msg) {}
};

class NoiseBudgetError : public HheError {
 public:
  explicit NoiseBudgetError(const std::string& msg) : HheError(msg) {}
};

class ProtocolError : public HheError {
 public:
  explicit ProtocolError(const std::string& msg) : HheError(msg) {}
};

class FormatError : public HheError {
 public:
  explicit FormatError(const std::string& msg) : HheError(msg) {}
};

class IoError : public HheError {
 public:
  explicit IoError(const std::string& msg) : HheError(msg) {}
};

// Little-endian byte stream helpers shared by every wire/file format.
class ByteWriter {
 public:
  void u8v(u8 v) { buf_.push_back(v); }
  void u16v(u16 v) { le(v, 2); }
  void u32v(u32 v) { le(v, 4); }
  void u64v(u64 v) { le(v, 8); }
  void f32v(float v) {
    u32 bits;
    std::memcpy(&bits, &v, 4);
    u32v(bits);
  }
  void f64v(double v) {
    u64 bits;
    std::memcpy(&bits, &v, 8);
    u64v(bits);
  }
  void bytes(const void* p, std::size_t n) {
    const u8* b = static_cast<const u8*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  const std::vector<u8>& data() const { return buf_; }
  std::vector<u8> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  void le(u64 v, int n) {
    for (int i = 0; i < n; i++) buf_.push_back(static_cast<u8>(v >> (8 * i)));
  }
  std::vector<u8> buf_;
};

class ByteReader {
 public:
  ByteReader(const u8* data, std::size_t size) : p_(data), end_(data + size) {}
  explicit ByteReader(const std::vector<u8>& v) : ByteReader(v.data(), v.size()) {}

  u8 u8v() { return take(1); }
  u16 u16v() { return static_cast<u16>(take(2)); }
  u32 u32v() { return static_cast<u32>(take(4)); }
  u64 u64v() { return take(8); }
  float f32v() {
    u32 bits = u32v();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64v() {
    u64 bits = u64v();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, p_, n);
    p_ += n;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }
  bool done() const { return p_ == end_; }

 private:
  u64 take(int n) {
    need(static_cast<std::size_t>(n));
    u64 v = 0;
    for (int i = 0; i < n; i++) v |= static_cast<u64>(p_[i]) << (8 * i);
    p_ += n;
    return v;
  }
  void need(std::size_t n) {
    if (remaining() < n) throw FormatError("byte stream truncated");
  }
  const u8* p_;
  const u8* end_;
};

}  // namespace hhefl
