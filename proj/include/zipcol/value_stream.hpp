// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "zipcol/common.hpp"

namespace zipcol {

// Flattened leaf values with nulls removed.  Fixed-width streams hold
// count * width bytes; variable-width streams additionally carry one byte
// length per value.
struct ValueStream {
  bool fixed_width = true;
  uint64_t width = 0;  // bytes per value when fixed
  std::vector<uint8_t> bytes;
  std::vector<uint64_t> lengths;  // variable width only

  [[nodiscard]] uint64_t Count() const {
    if (fixed_width) {
      return width == 0 ? 0 : bytes.size() / width;
    }
    return lengths.size();
  }

  [[nodiscard]] uint64_t LengthOf(uint64_t i) const {
    return fixed_width ? width : lengths[i];
  }

  [[nodiscard]] uint64_t OffsetOf(uint64_t i) const {
    if (fixed_width) {
      return i * width;
    }
    uint64_t offset = 0;
    for (uint64_t j = 0; j < i; j++) {
      offset += lengths[j];
    }
    return offset;
  }

  [[nodiscard]] std::span<const uint8_t> ValueAt(uint64_t i) const {
    return std::span<const uint8_t>(bytes).subspan(OffsetOf(i), LengthOf(i));
  }

  void Append(std::span<const uint8_t> value) {
    bytes.insert(bytes.end(), value.begin(), value.end());
    if (!fixed_width) {
      lengths.push_back(value.size());
    }
  }

  bool operator==(const ValueStream& other) const {
    return fixed_width == other.fixed_width && width == other.width &&
           bytes == other.bytes && lengths == other.lengths;
  }
};

}  // namespace zipcol
