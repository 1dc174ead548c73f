// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zipcol {

enum class ErrorCode {
  kInvalid,
  kOutOfRange,
  kCorrupt,
  kUnsupported,
  kIllegalCodec,
  kRouting,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  [[nodiscard]] ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Check(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) {
    Raise(code, message);
  }
}

namespace bit_util {

constexpr uint64_t CeilDiv(uint64_t value, uint64_t divisor) {
  return (value + divisor - 1) / divisor;
}

constexpr uint64_t AlignUp(uint64_t value, uint64_t alignment) {
  return CeilDiv(value, alignment) * alignment;
}

// Number of bits needed to represent `value` (0 for value == 0).
constexpr int BitLength(uint64_t value) {
  int bits = 0;
  while (value != 0) {
    bits++;
    value >>= 1;
  }
  return bits;
}

// Smallest w in [1, 8] such that `value` fits in w bytes.
constexpr int MinByteWidth(uint64_t value) {
  int width = 1;
  while (width < 8 && (value >> (8 * width)) != 0) {
    width++;
  }
  return width;
}

constexpr bool IsPowerOfTwo(uint64_t value) {
  return value != 0 && (value & (value - 1)) == 0;
}

constexpr int CeilLog2(uint64_t value) {
  return value <= 1 ? 0 : BitLength(value - 1);
}

inline bool GetBit(std::span<const uint8_t> bits, uint64_t i) {
  return (bits[i / 8] >> (i % 8)) & 1;
}

inline void SetBit(std::span<uint8_t> bits, uint64_t i, bool value) {
  if (value) {
    bits[i / 8] |= static_cast<uint8_t>(1 << (i % 8));
  } else {
    bits[i / 8] &= static_cast<uint8_t>(~(1 << (i % 8)));
  }
}

}  // namespace bit_util

// Little-endian scalar IO over byte vectors/spans.  All on-disk integers in
// this library are little-endian.
namespace le {

template <typename T>
void Append(std::vector<uint8_t>* out, T value) {
  static_assert(std::is_integral_v<T> || std::is_floating_point_v<T>);
  uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out->insert(out->end(), bytes, bytes + sizeof(T));
}

inline void AppendUnsigned(std::vector<uint8_t>* out, uint64_t value,
                           int width) {
  for (int i = 0; i < width; i++) {
    out->push_back(static_cast<uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T Load(const uint8_t* bytes) {
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline uint64_t LoadUnsigned(const uint8_t* bytes, int width) {
  uint64_t value = 0;
  for (int i = 0; i < width; i++) {
    value |= static_cast<uint64_t>(bytes[i]) << (8 * i);
  }
  return value;
}

inline void StoreUnsigned(uint8_t* bytes, uint64_t value, int width) {
  for (int i = 0; i < width; i++) {
    bytes[i] = static_cast<uint8_t>(value >> (8 * i));
  }
}

// Cursor with bounds checking for parsing serialized metadata.
class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  template <typename T>
  T Read() {
    Need(sizeof(T));
    T value = Load<T>(data_.data() + pos_);
    pos_ += sizeof(T);
    return value;
  }

  uint64_t ReadUnsigned(int width) {
    Need(width);
    uint64_t value = LoadUnsigned(data_.data() + pos_, width);
    pos_ += width;
    return value;
  }

  std::span<const uint8_t> ReadBytes(uint64_t count) {
    Need(count);
    std::span<const uint8_t> bytes = data_.subspan(pos_, count);
    pos_ += count;
    return bytes;
  }

  std::string ReadString() {
    auto length = Read<uint32_t>();
    auto bytes = ReadBytes(length);
    return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
  }

  [[nodiscard]] uint64_t position() const { return pos_; }
  [[nodiscard]] uint64_t remaining() const { return data_.size() - pos_; }

 private:
  void Need(uint64_t count) const {
    Check(pos_ + count <= data_.size(), ErrorCode::kCorrupt,
          "metadata truncated at offset " + std::to_string(pos_));
  }

  std::span<const uint8_t> data_;
  uint64_t pos_ = 0;
};

inline void AppendString(std::vector<uint8_t>* out, const std::string& s) {
  Append<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out->insert(out->end(), s.begin(), s.end());
}

}  // namespace le

// Writes fixed-width values LSB-first; value i occupies bits
// [i*width, (i+1)*width) of the output stream.
class BitWriter {
 public:
  explicit BitWriter(int bit_width) : bit_width_(bit_width) {}

  void Write(uint64_t value) {
    for (int b = 0; b < bit_width_; b++) {
      uint64_t bit_pos = count_ * bit_width_ + b;
      if (bit_pos / 8 >= bytes_.size()) {
        bytes_.push_back(0);
      }
      if ((value >> b) & 1) {
        bytes_[bit_pos / 8] |= static_cast<uint8_t>(1 << (bit_pos % 8));
      }
    }
    count_++;
  }

  [[nodiscard]] const std::vector<uint8_t>& bytes() const { return bytes_; }
  std::vector<uint8_t> TakeBytes() { return std::move(bytes_); }
  [[nodiscard]] uint64_t count() const { return count_; }

 private:
  int bit_width_;
  uint64_t count_ = 0;
  std::vector<uint8_t> bytes_;
};

inline uint64_t ReadPackedBits(std::span<const uint8_t> bytes, int bit_width,
                               uint64_t index) {
  uint64_t value = 0;
  for (int b = 0; b < bit_width; b++) {
    uint64_t bit_pos = index * bit_width + b;
    Check(bit_pos / 8 < bytes.size(), ErrorCode::kCorrupt,
          "bit-packed buffer truncated");
    if ((bytes[bit_pos / 8] >> (bit_pos % 8)) & 1) {
      value |= uint64_t{1} << b;
    }
  }
  return value;
}

}  // namespace zipcol
