// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zipcol/common.hpp"
#include "zipcol/data_type.hpp"

namespace zipcol {

// In-memory nested typed array.  Immutable by convention once built; all
// operations below return new arrays.  Offsets are kept as 64-bit values
// regardless of how they are packed on disk.
//
// Payload by kind:
//   primitives       values (length * width bytes)
//   Utf8 / Binary    offsets (length + 1) + values (data bytes)
//   List             offsets (length + 1) + children[0]
//   FixedSizeList    children[0] (length * dimension rows)
//   Struct           children (one per field, same length)
//
// Rows marked invalid may carry arbitrary payload; logical equality never
// inspects bytes under invalid rows.
struct LogicalArray {
  DataType dtype;
  uint64_t length = 0;
  std::optional<std::vector<uint8_t>> validity;  // 1 bit per row, 1 = valid
  std::vector<uint8_t> values;
  std::vector<uint64_t> offsets;
  std::vector<LogicalArray> children;

  [[nodiscard]] bool IsValid(uint64_t row) const {
    if (!validity.has_value()) {
      return true;
    }
    return bit_util::GetBit(*validity, row);
  }
};

inline std::vector<uint8_t> MakeBitmap(const std::vector<bool>& bits) {
  std::vector<uint8_t> bytes(bit_util::CeilDiv(bits.size(), 8), 0);
  for (size_t i = 0; i < bits.size(); i++) {
    if (bits[i]) {
      bit_util::SetBit(bytes, i, true);
    }
  }
  return bytes;
}

namespace array {

// --- Builders (convenience constructors used by tests and the CLI) ---

template <typename T>
LogicalArray FromValues(Kind kind, const std::vector<T>& values,
                        const std::vector<bool>& valid = {}) {
  Check(sizeof(T) == PrimitiveWidth(kind), ErrorCode::kInvalid,
        "value width mismatch");
  LogicalArray out;
  out.dtype = DataType::Primitive(kind, !valid.empty());
  out.length = values.size();
  out.values.resize(values.size() * sizeof(T));
  if (!values.empty()) {
    std::memcpy(out.values.data(), values.data(), out.values.size());
  }
  if (!valid.empty()) {
    out.validity = MakeBitmap(valid);
  }
  return out;
}

inline LogicalArray FromStrings(const std::vector<std::string>& strings,
                                const std::vector<bool>& valid = {},
                                Kind kind = Kind::kUtf8) {
  LogicalArray out;
  out.dtype = kind == Kind::kUtf8 ? DataType::Utf8(!valid.empty())
                                  : DataType::Binary(!valid.empty());
  out.length = strings.size();
  out.offsets.push_back(0);
  for (const auto& s : strings) {
    out.values.insert(out.values.end(), s.begin(), s.end());
    out.offsets.push_back(out.values.size());
  }
  if (!valid.empty()) {
    out.validity = MakeBitmap(valid);
  }
  return out;
}

inline LogicalArray ListOf(LogicalArray child, std::vector<uint64_t> offsets,
                           const std::vector<bool>& valid = {}) {
  LogicalArray out;
  out.dtype = DataType::List(child.dtype, !valid.empty());
  out.length = offsets.empty() ? 0 : offsets.size() - 1;
  out.offsets = std::move(offsets);
  out.children.push_back(std::move(child));
  if (!valid.empty()) {
    out.validity = MakeBitmap(valid);
  }
  return out;
}

inline LogicalArray StructOf(
    std::vector<std::pair<std::string, LogicalArray>> fields, uint64_t length,
    const std::vector<bool>& valid = {}) {
  LogicalArray out;
  std::vector<std::pair<std::string, DataType>> field_types;
  for (auto& [name, child] : fields) {
    field_types.emplace_back(name, child.dtype);
  }
  out.dtype = DataType::Struct(std::move(field_types), !valid.empty());
  out.length = length;
  for (auto& [name, child] : fields) {
    out.children.push_back(std::move(child));
  }
  if (!valid.empty()) {
    out.validity = MakeBitmap(valid);
  }
  return out;
}

inline LogicalArray FixedSizeListOf(LogicalArray child, uint64_t dimension,
                                    const std::vector<bool>& valid = {}) {
  LogicalArray out;
  out.dtype = DataType::FixedSizeList(child.dtype, dimension, !valid.empty());
  Check(dimension > 0 && child.length % dimension == 0, ErrorCode::kInvalid,
        "child length not a multiple of dimension");
  out.length = child.length / dimension;
  out.children.push_back(std::move(child));
  if (!valid.empty()) {
    out.validity = MakeBitmap(valid);
  }
  return out;
}

inline LogicalArray Empty(const DataType& dtype) {
  LogicalArray out;
  out.dtype = dtype;
  out.length = 0;
  switch (dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary:
      out.offsets.push_back(0);
      break;
    case Kind::kList:
      out.offsets.push_back(0);
      out.children.push_back(Empty(dtype.children[0]));
      break;
    case Kind::kFixedSizeList:
      out.children.push_back(Empty(dtype.children[0]));
      break;
    case Kind::kStruct:
      for (const auto& child : dtype.children) {
        out.children.push_back(Empty(child));
      }
      break;
    default:
      break;
  }
  return out;
}

// --- Validation ---

namespace detail {

inline std::optional<std::string> ValidateImpl(const LogicalArray& a,
                                               const std::string& path) {
  if (a.validity.has_value()) {
    if (!a.dtype.nullable) {
      return path + ": validity bitmap on non-nullable type";
    }
    if (a.validity->size() != bit_util::CeilDiv(a.length, 8)) {
      return path + ": validity bitmap size mismatch";
    }
  }
  switch (a.dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary:
    case Kind::kList: {
      if (a.offsets.size() != a.length + 1) {
        return path + ": offsets length != length + 1";
      }
      if (a.offsets[0] != 0) {
        return path + ": offsets[0] != 0";
      }
      for (uint64_t i = 0; i < a.length; i++) {
        if (a.offsets[i + 1] < a.offsets[i]) {
          return path + ": offsets not monotone";
        }
      }
      if (a.dtype.kind == Kind::kList) {
        if (a.children.size() != 1) {
          return path + ": list must have one child";
        }
        if (a.offsets[a.length] != a.children[0].length) {
          return path + ": terminal offset != child length";
        }
        if (a.children[0].dtype != a.dtype.children[0]) {
          return path + ": child dtype mismatch";
        }
        return ValidateImpl(a.children[0], path + ".item");
      }
      if (a.offsets[a.length] != a.values.size()) {
        return path + ": terminal offset != byte-buffer length";
      }
      return std::nullopt;
    }
    case Kind::kFixedSizeList: {
      if (a.dtype.fsl_dimension < 1) {
        return path + ": fixed-size-list dimension < 1";
      }
      if (a.children.size() != 1) {
        return path + ": fixed-size-list must have one child";
      }
      if (a.children[0].length != a.length * a.dtype.fsl_dimension) {
        return path + ": child length != length * dimension";
      }
      if (a.children[0].dtype != a.dtype.children[0]) {
        return path + ": child dtype mismatch";
      }
      return ValidateImpl(a.children[0], path + ".item");
    }
    case Kind::kStruct: {
      if (a.dtype.children.empty()) {
        return path + ": struct must have at least one field";
      }
      for (size_t i = 0; i < a.dtype.field_names.size(); i++) {
        for (size_t j = i + 1; j < a.dtype.field_names.size(); j++) {
          if (a.dtype.field_names[i] == a.dtype.field_names[j]) {
            return path + ": duplicate field name " + a.dtype.field_names[i];
          }
        }
      }
      if (a.children.size() != a.dtype.children.size()) {
        return path + ": struct child count mismatch";
      }
      for (size_t i = 0; i < a.children.size(); i++) {
        if (a.children[i].length != a.length) {
          return path + ": child length mismatch";
        }
        if (a.children[i].dtype != a.dtype.children[i]) {
          return path + ": child dtype mismatch";
        }
        auto err =
            ValidateImpl(a.children[i], path + "." + a.dtype.field_names[i]);
        if (err.has_value()) {
          return err;
        }
      }
      return std::nullopt;
    }
    default: {
      if (a.values.size() != a.length * PrimitiveWidth(a.dtype.kind)) {
        return path + ": value buffer size mismatch";
      }
      return std::nullopt;
    }
  }
}

}  // namespace detail

// Returns the first violated invariant, or nullopt when the array is valid.
inline std::optional<std::string> Validate(const LogicalArray& a) {
  return detail::ValidateImpl(a, "$");
}

// --- Slice ---

inline LogicalArray Slice(const LogicalArray& a, uint64_t start, uint64_t len) {
  Check(start + len <= a.length, ErrorCode::kOutOfRange, "slice out of range");
  LogicalArray out;
  out.dtype = a.dtype;
  out.length = len;
  if (a.validity.has_value()) {
    std::vector<uint8_t> bits(bit_util::CeilDiv(len, 8), 0);
    for (uint64_t i = 0; i < len; i++) {
      bit_util::SetBit(bits, i, bit_util::GetBit(*a.validity, start + i));
    }
    out.validity = std::move(bits);
  }
  switch (a.dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary: {
      uint64_t base = a.offsets[start];
      out.offsets.reserve(len + 1);
      for (uint64_t i = 0; i <= len; i++) {
        out.offsets.push_back(a.offsets[start + i] - base);
      }
      out.values.assign(a.values.begin() + base,
                        a.values.begin() + a.offsets[start + len]);
      break;
    }
    case Kind::kList: {
      uint64_t base = a.offsets[start];
      out.offsets.reserve(len + 1);
      for (uint64_t i = 0; i <= len; i++) {
        out.offsets.push_back(a.offsets[start + i] - base);
      }
      out.children.push_back(
          Slice(a.children[0], base, a.offsets[start + len] - base));
      break;
    }
    case Kind::kFixedSizeList:
      out.children.push_back(Slice(a.children[0], start * a.dtype.fsl_dimension,
                                   len * a.dtype.fsl_dimension));
      break;
    case Kind::kStruct:
      for (const auto& child : a.children) {
        out.children.push_back(Slice(child, start, len));
      }
      break;
    default: {
      uint64_t width = PrimitiveWidth(a.dtype.kind);
      out.values.assign(a.values.begin() + start * width,
                        a.values.begin() + (start + len) * width);
      break;
    }
  }
  return out;
}

// --- Canonical form and logical equality ---

namespace detail {

inline LogicalArray ConcatPieces(const DataType& dtype,
                                 const std::vector<LogicalArray>& pieces);

// Rewrites the array so that all payload under invalid rows takes a canonical
// shape: zero bytes for fixed-width leaves, empty extents for variable-width
// and list rows, and recursively null/zero filler below null structs.  Also
// drops all-ones validity bitmaps.  Logical equality compares canonical forms.
inline LogicalArray NormalizeImpl(const LogicalArray& a,
                                  const std::vector<bool>& dead) {
  LogicalArray out;
  out.dtype = a.dtype;
  out.length = a.length;
  std::vector<bool> row_valid(a.length);
  bool any_invalid = false;
  for (uint64_t i = 0; i < a.length; i++) {
    row_valid[i] = !dead[i] && a.IsValid(i);
    if (!row_valid[i]) {
      any_invalid = true;
    }
  }
  if (a.dtype.nullable && any_invalid) {
    std::vector<bool> bits(a.length);
    for (uint64_t i = 0; i < a.length; i++) {
      bits[i] = row_valid[i];
    }
    out.validity = MakeBitmap(bits);
  }
  switch (a.dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary: {
      out.offsets.push_back(0);
      for (uint64_t i = 0; i < a.length; i++) {
        if (row_valid[i]) {
          out.values.insert(out.values.end(), a.values.begin() + a.offsets[i],
                            a.values.begin() + a.offsets[i + 1]);
        }
        out.offsets.push_back(out.values.size());
      }
      break;
    }
    case Kind::kList: {
      out.offsets.push_back(0);
      std::vector<uint64_t> keep_from;
      std::vector<uint64_t> keep_len;
      for (uint64_t i = 0; i < a.length; i++) {
        uint64_t n = row_valid[i] ? a.offsets[i + 1] - a.offsets[i] : 0;
        if (n > 0) {
          keep_from.push_back(a.offsets[i]);
          keep_len.push_back(n);
        }
        out.offsets.push_back(out.offsets.back() + n);
      }
      // Compact the child down to the surviving extents, then normalize it.
      LogicalArray compact;
      bool contiguous = true;
      uint64_t expect = 0;
      uint64_t total = 0;
      for (size_t i = 0; i < keep_from.size(); i++) {
        if (i == 0) {
          expect = keep_from[0];
        }
        if (keep_from[i] != expect) {
          contiguous = false;
        }
        expect = keep_from[i] + keep_len[i];
        total += keep_len[i];
      }
      if (contiguous && total == a.children[0].length &&
          (keep_from.empty() || keep_from[0] == 0)) {
        out.children.push_back(
            NormalizeImpl(a.children[0],
                          std::vector<bool>(a.children[0].length, false)));
      } else {
        std::vector<LogicalArray> pieces;
        for (size_t i = 0; i < keep_from.size(); i++) {
          pieces.push_back(Slice(a.children[0], keep_from[i], keep_len[i]));
        }
        LogicalArray child = ConcatPieces(a.dtype.children[0], pieces);
        out.children.push_back(
            NormalizeImpl(child, std::vector<bool>(child.length, false)));
      }
      break;
    }
    case Kind::kFixedSizeList: {
      std::vector<bool> child_dead(a.children[0].length, false);
      for (uint64_t i = 0; i < a.length; i++) {
        if (!row_valid[i]) {
          for (uint64_t j = 0; j < a.dtype.fsl_dimension; j++) {
            child_dead[i * a.dtype.fsl_dimension + j] = true;
          }
        }
      }
      out.children.push_back(NormalizeImpl(a.children[0], child_dead));
      break;
    }
    case Kind::kStruct: {
      std::vector<bool> child_dead(a.length);
      for (uint64_t i = 0; i < a.length; i++) {
        child_dead[i] = !row_valid[i];
      }
      for (const auto& child : a.children) {
        out.children.push_back(NormalizeImpl(child, child_dead));
      }
      break;
    }
    default: {
      uint64_t width = PrimitiveWidth(a.dtype.kind);
      out.values.assign(a.length * width, 0);
      for (uint64_t i = 0; i < a.length; i++) {
        if (row_valid[i]) {
          std::memcpy(out.values.data() + i * width,
                      a.values.data() + i * width, width);
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace detail

inline LogicalArray Normalize(const LogicalArray& a) {
  return detail::NormalizeImpl(a, std::vector<bool>(a.length, false));
}

namespace detail {

inline bool BitwiseEquals(const LogicalArray& a, const LogicalArray& b) {
  if (a.dtype != b.dtype || a.length != b.length ||
      a.validity != b.validity || a.values != b.values ||
      a.offsets != b.offsets || a.children.size() != b.children.size()) {
    return false;
  }
  for (size_t i = 0; i < a.children.size(); i++) {
    if (!BitwiseEquals(a.children[i], b.children[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Two arrays are logically equal iff dtype, length, validity, and the payload
// of valid rows match.  Garbage under invalid rows is ignored.
inline bool Equals(const LogicalArray& a, const LogicalArray& b) {
  if (a.dtype != b.dtype || a.length != b.length) {
    return false;
  }
  return detail::BitwiseEquals(Normalize(a), Normalize(b));
}

// --- Concatenation / gather ---

inline LogicalArray Concat(const std::vector<LogicalArray>& pieces) {
  Check(!pieces.empty(), ErrorCode::kInvalid, "concat of zero arrays");
  return detail::ConcatPieces(pieces[0].dtype, pieces);
}

// Selects rows by index (duplicates and arbitrary order permitted).
inline LogicalArray GatherRows(const LogicalArray& a,
                               const std::vector<uint64_t>& indices) {
  std::vector<LogicalArray> rows;
  rows.reserve(indices.size());
  for (uint64_t index : indices) {
    rows.push_back(Slice(a, index, 1));
  }
  if (rows.empty()) {
    return Slice(a, 0, 0);
  }
  return Concat(rows);
}

namespace detail {

inline LogicalArray ConcatPieces(const DataType& dtype,
                                 const std::vector<LogicalArray>& pieces) {
  LogicalArray out;
  out.dtype = dtype;
  for (const auto& piece : pieces) {
    Check(piece.dtype == dtype, ErrorCode::kInvalid, "concat dtype mismatch");
    out.length += piece.length;
  }
  bool need_validity = false;
  for (const auto& piece : pieces) {
    if (piece.validity.has_value()) {
      need_validity = true;
    }
  }
  if (need_validity) {
    std::vector<bool> bits;
    bits.reserve(out.length);
    for (const auto& piece : pieces) {
      for (uint64_t i = 0; i < piece.length; i++) {
        bits.push_back(piece.IsValid(i));
      }
    }
    out.validity = MakeBitmap(bits);
  }
  switch (dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary: {
      out.offsets.push_back(0);
      for (const auto& piece : pieces) {
        uint64_t base = out.values.size();
        out.values.insert(out.values.end(), piece.values.begin(),
                          piece.values.end());
        for (uint64_t i = 0; i < piece.length; i++) {
          out.offsets.push_back(base + piece.offsets[i + 1]);
        }
      }
      break;
    }
    case Kind::kList: {
      out.offsets.push_back(0);
      std::vector<LogicalArray> child_pieces;
      uint64_t base = 0;
      for (const auto& piece : pieces) {
        for (uint64_t i = 0; i < piece.length; i++) {
          out.offsets.push_back(base + piece.offsets[i + 1]);
        }
        base += piece.offsets[piece.length];
        child_pieces.push_back(piece.children[0]);
      }
      out.children.push_back(ConcatPieces(dtype.children[0], child_pieces));
      break;
    }
    case Kind::kFixedSizeList: {
      std::vector<LogicalArray> child_pieces;
      for (const auto& piece : pieces) {
        child_pieces.push_back(piece.children[0]);
      }
      out.children.push_back(ConcatPieces(dtype.children[0], child_pieces));
      break;
    }
    case Kind::kStruct: {
      for (size_t c = 0; c < dtype.children.size(); c++) {
        std::vector<LogicalArray> child_pieces;
        for (const auto& piece : pieces) {
          child_pieces.push_back(piece.children[c]);
        }
        out.children.push_back(ConcatPieces(dtype.children[c], child_pieces));
      }
      break;
    }
    default: {
      for (const auto& piece : pieces) {
        out.values.insert(out.values.end(), piece.values.begin(),
                          piece.values.end());
      }
      break;
    }
  }
  return out;
}

}  // namespace detail

// --- Average value width ---

namespace detail {

// Serialized payload bytes: value buffers plus offset entries at 4 bytes
// each.  Validity bitmaps do not count toward the width.
inline uint64_t PayloadBytes(const LogicalArray& a) {
  constexpr uint64_t kOffsetEntryBytes = 4;
  switch (a.dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary:
      return a.values.size() + a.offsets.size() * kOffsetEntryBytes;
    case Kind::kList:
      return a.offsets.size() * kOffsetEntryBytes +
             PayloadBytes(a.children[0]);
    case Kind::kFixedSizeList:
      return PayloadBytes(a.children[0]);
    case Kind::kStruct: {
      uint64_t total = 0;
      for (const auto& child : a.children) {
        total += PayloadBytes(child);
      }
      return total;
    }
    default:
      return a.values.size();
  }
}

}  // namespace detail

// Serialized payload bytes of an array: value buffers plus offset entries.
inline uint64_t SerializedPayloadBytes(const LogicalArray& a) {
  return detail::PayloadBytes(a);
}

// Total serialized payload bytes divided by top-level row count.
inline double AvgValueWidth(const LogicalArray& a) {
  Check(a.length >= 1, ErrorCode::kInvalid,
        "undefined width for zero-length array");
  return static_cast<double>(detail::PayloadBytes(a)) /
         static_cast<double>(a.length);
}

}  // namespace array

}  // namespace zipcol
