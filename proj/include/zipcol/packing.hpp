// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zipcol/array.hpp"
#include "zipcol/common.hpp"
#include "zipcol/repdef.hpp"

namespace zipcol {

// Struct packing: the whole struct is stored as one zipped column instead of
// one column per field.  Fields are serialized individually and concatenated
// per row, so whole-struct random access costs one value lookup while
// single-field scans must fetch and discard the siblings.
//
// Field values appear in declaration order.  Fixed-width fields contribute
// their raw bytes; variable-width fields contribute a little-endian length
// prefix (per-field width, recorded in the column metadata) followed by the
// bytes.  Fields must be non-nullable leaf types; the struct itself may be
// nullable, which costs one definition level.
namespace packing {

inline bool IsPackableField(const DataType& t) {
  if (t.nullable) {
    return false;
  }
  if (IsPrimitive(t.kind) || t.kind == Kind::kUtf8 || t.kind == Kind::kBinary) {
    return true;
  }
  return t.kind == Kind::kFixedSizeList && IsFixedWidthLeafSubtree(t);
}

inline void CheckPackable(const DataType& dtype) {
  Check(dtype.kind == Kind::kStruct, ErrorCode::kInvalid,
        "packing applies to struct columns only");
  for (const auto& field : dtype.children) {
    Check(IsPackableField(field), ErrorCode::kUnsupported,
          "packed struct fields must be non-nullable leaf types; got " +
              field.ToString());
  }
}

struct PackedColumn {
  RepDefLevels levels;  // max_rep = 0; max_def = 1 when the struct is nullable
  std::vector<uint8_t> field_length_widths;  // variable-width fields, in order
};

namespace detail {

inline std::span<const uint8_t> FieldValue(const LogicalArray& field,
                                           uint64_t row) {
  if (field.dtype.kind == Kind::kUtf8 || field.dtype.kind == Kind::kBinary) {
    return std::span<const uint8_t>(field.values)
        .subspan(field.offsets[row], field.offsets[row + 1] -
                                         field.offsets[row]);
  }
  uint64_t width = FixedLeafWidth(field.dtype);
  const LogicalArray* node = &field;
  while (node->dtype.kind == Kind::kFixedSizeList) {
    node = &node->children[0];
  }
  return std::span<const uint8_t>(node->values).subspan(row * width, width);
}

}  // namespace detail

inline PackedColumn Pack(const LogicalArray& a) {
  CheckPackable(a.dtype);
  PackedColumn out;
  out.levels.max_rep = 0;
  out.levels.max_def = a.dtype.nullable ? 1 : 0;

  bool all_fixed = true;
  uint64_t fixed_width = 0;
  for (const auto& field : a.dtype.children) {
    if (field.kind == Kind::kUtf8 || field.kind == Kind::kBinary) {
      all_fixed = false;
    } else {
      fixed_width += FixedLeafWidth(field);
    }
  }
  for (size_t f = 0; f < a.children.size(); f++) {
    const DataType& field = a.dtype.children[f];
    if (field.kind == Kind::kUtf8 || field.kind == Kind::kBinary) {
      uint64_t max_length = 0;
      for (uint64_t row = 0; row < a.length; row++) {
        if (a.IsValid(row)) {
          max_length = std::max(max_length,
                                a.children[f].offsets[row + 1] -
                                    a.children[f].offsets[row]);
        }
      }
      out.field_length_widths.push_back(
          static_cast<uint8_t>(bit_util::MinByteWidth(max_length)));
    }
  }

  out.levels.leaf_values.fixed_width = all_fixed;
  out.levels.leaf_values.width = all_fixed ? fixed_width : 0;
  for (uint64_t row = 0; row < a.length; row++) {
    out.levels.rep.push_back(0);
    if (!a.IsValid(row)) {
      out.levels.def.push_back(1);
      continue;
    }
    out.levels.def.push_back(0);
    std::vector<uint8_t> value;
    size_t var_index = 0;
    for (size_t f = 0; f < a.children.size(); f++) {
      auto bytes = detail::FieldValue(a.children[f], row);
      if (a.dtype.children[f].kind == Kind::kUtf8 ||
          a.dtype.children[f].kind == Kind::kBinary) {
        le::AppendUnsigned(&value, bytes.size(),
                           out.field_length_widths[var_index++]);
      }
      value.insert(value.end(), bytes.begin(), bytes.end());
    }
    out.levels.leaf_values.Append(value);
  }
  return out;
}

inline LogicalArray Unpack(const RepDefLevels& levels, const DataType& dtype,
                           std::span<const uint8_t> field_length_widths) {
  CheckPackable(dtype);
  size_t n_fields = dtype.children.size();
  std::vector<std::vector<uint8_t>> field_bytes(n_fields);
  std::vector<std::vector<uint64_t>> field_offsets(n_fields,
                                                   std::vector<uint64_t>{0});
  uint64_t rows = levels.def.size();
  std::vector<bool> valid(rows, true);
  bool any_invalid = false;

  uint64_t next_value = 0;
  for (uint64_t row = 0; row < rows; row++) {
    if (levels.def[row] != 0) {
      valid[row] = false;
      any_invalid = true;
      size_t var_index = 0;
      for (size_t f = 0; f < n_fields; f++) {
        const DataType& field = dtype.children[f];
        if (field.kind == Kind::kUtf8 || field.kind == Kind::kBinary) {
          field_offsets[f].push_back(field_bytes[f].size());
          var_index++;
        } else {
          field_bytes[f].resize(field_bytes[f].size() + FixedLeafWidth(field),
                                0);
        }
      }
      continue;
    }
    auto value = levels.leaf_values.ValueAt(next_value++);
    uint64_t pos = 0;
    size_t var_index = 0;
    for (size_t f = 0; f < n_fields; f++) {
      const DataType& field = dtype.children[f];
      if (field.kind == Kind::kUtf8 || field.kind == Kind::kBinary) {
        Check(var_index < field_length_widths.size(), ErrorCode::kCorrupt,
              "missing packed field length width");
        uint8_t width = field_length_widths[var_index++];
        Check(pos + width <= value.size(), ErrorCode::kCorrupt,
              "packed value truncated at byte " + std::to_string(pos));
        uint64_t length = le::LoadUnsigned(value.data() + pos, width);
        pos += width;
        Check(pos + length <= value.size(), ErrorCode::kCorrupt,
              "packed value truncated at byte " + std::to_string(pos));
        field_bytes[f].insert(field_bytes[f].end(), value.data() + pos,
                              value.data() + pos + length);
        field_offsets[f].push_back(field_bytes[f].size());
        pos += length;
      } else {
        uint64_t width = FixedLeafWidth(field);
        Check(pos + width <= value.size(), ErrorCode::kCorrupt,
              "packed value truncated at byte " + std::to_string(pos));
        field_bytes[f].insert(field_bytes[f].end(), value.data() + pos,
                              value.data() + pos + width);
        pos += width;
      }
    }
    Check(pos == value.size(), ErrorCode::kCorrupt,
          "packed value has trailing bytes");
  }
  Check(next_value == levels.leaf_values.Count(), ErrorCode::kCorrupt,
        "packed value count mismatch");

  LogicalArray out;
  out.dtype = dtype;
  out.length = rows;
  if (dtype.nullable && any_invalid) {
    out.validity = MakeBitmap(valid);
  }
  for (size_t f = 0; f < n_fields; f++) {
    const DataType& field = dtype.children[f];
    if (field.kind == Kind::kUtf8 || field.kind == Kind::kBinary) {
      LogicalArray child;
      child.dtype = field;
      child.length = rows;
      child.values = std::move(field_bytes[f]);
      child.offsets = std::move(field_offsets[f]);
      out.children.push_back(std::move(child));
    } else {
      out.children.push_back(repdef::detail::BuildLeafArray(
          field, std::move(field_bytes[f]), {}, {}, rows, false));
    }
  }
  return out;
}

}  // namespace packing

}  // namespace zipcol
