// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zipcol/common.hpp"

namespace zipcol {

enum class Kind : uint8_t {
  kUInt8,
  kUInt16,
  kUInt32,
  kUInt64,
  kInt8,
  kInt16,
  kInt32,
  kInt64,
  kFloat32,
  kFloat64,
  kBinary,
  kUtf8,
  kFixedSizeList,
  kList,
  kStruct,
};

inline bool IsPrimitive(Kind kind) {
  return kind <= Kind::kFloat64;
}

inline bool IsVariableLength(Kind kind) {
  return kind == Kind::kBinary || kind == Kind::kUtf8 || kind == Kind::kList;
}

// Width in bytes of a primitive value.
inline uint64_t PrimitiveWidth(Kind kind) {
  switch (kind) {
    case Kind::kUInt8:
    case Kind::kInt8:
      return 1;
    case Kind::kUInt16:
    case Kind::kInt16:
      return 2;
    case Kind::kUInt32:
    case Kind::kInt32:
    case Kind::kFloat32:
      return 4;
    case Kind::kUInt64:
    case Kind::kInt64:
    case Kind::kFloat64:
      return 8;
    default:
      Raise(ErrorCode::kInvalid, "not a primitive kind");
  }
}

// A (possibly nested) logical type.  Every node carries its own nullability;
// non-nullable layers never store validity and consume no definition level.
struct DataType {
  Kind kind = Kind::kUInt64;
  bool nullable = false;
  uint64_t fsl_dimension = 0;           // FixedSizeList only
  std::vector<std::string> field_names; // Struct only
  std::vector<DataType> children;       // List/FixedSizeList: 1, Struct: n

  static DataType Primitive(Kind kind, bool nullable = false) {
    return {kind, nullable, 0, {}, {}};
  }
  static DataType Utf8(bool nullable = false) {
    return {Kind::kUtf8, nullable, 0, {}, {}};
  }
  static DataType Binary(bool nullable = false) {
    return {Kind::kBinary, nullable, 0, {}, {}};
  }
  static DataType List(DataType child, bool nullable = false) {
    return {Kind::kList, nullable, 0, {}, {std::move(child)}};
  }
  static DataType FixedSizeList(DataType child, uint64_t dimension,
                                bool nullable = false) {
    return {Kind::kFixedSizeList, nullable, dimension, {}, {std::move(child)}};
  }
  static DataType Struct(std::vector<std::pair<std::string, DataType>> fields,
                         bool nullable = false) {
    DataType type{Kind::kStruct, nullable, 0, {}, {}};
    for (auto& [name, child] : fields) {
      type.field_names.push_back(name);
      type.children.push_back(std::move(child));
    }
    return type;
  }

  bool operator==(const DataType& other) const {
    return kind == other.kind && nullable == other.nullable &&
           fsl_dimension == other.fsl_dimension &&
           field_names == other.field_names && children == other.children;
  }

  [[nodiscard]] std::string ToString() const {
    std::string s;
    switch (kind) {
      case Kind::kUInt8: s = "uint8"; break;
      case Kind::kUInt16: s = "uint16"; break;
      case Kind::kUInt32: s = "uint32"; break;
      case Kind::kUInt64: s = "uint64"; break;
      case Kind::kInt8: s = "int8"; break;
      case Kind::kInt16: s = "int16"; break;
      case Kind::kInt32: s = "int32"; break;
      case Kind::kInt64: s = "int64"; break;
      case Kind::kFloat32: s = "float32"; break;
      case Kind::kFloat64: s = "float64"; break;
      case Kind::kBinary: s = "binary"; break;
      case Kind::kUtf8: s = "utf8"; break;
      case Kind::kFixedSizeList:
        s = "fsl<" + children[0].ToString() + ", " +
            std::to_string(fsl_dimension) + ">";
        break;
      case Kind::kList:
        s = "list<" + children[0].ToString() + ">";
        break;
      case Kind::kStruct: {
        s = "struct<";
        for (size_t i = 0; i < children.size(); i++) {
          if (i > 0) s += ", ";
          s += field_names[i] + ": " + children[i].ToString();
        }
        s += ">";
        break;
      }
    }
    if (nullable) s += "?";
    return s;
  }
};

// A FixedSizeList is encoded as a single fixed-width leaf value, so its whole
// subtree must be fixed width and only the outermost FSL may be nullable.
inline bool IsFixedWidthLeafSubtree(const DataType& type) {
  if (IsPrimitive(type.kind)) {
    return true;
  }
  if (type.kind == Kind::kFixedSizeList) {
    return !type.children[0].nullable &&
           IsFixedWidthLeafSubtree(type.children[0]);
  }
  return false;
}

// Serialized width of one leaf value for fixed-width leaves (primitives and
// fixed-size lists of them).
inline uint64_t FixedLeafWidth(const DataType& type) {
  if (IsPrimitive(type.kind)) {
    return PrimitiveWidth(type.kind);
  }
  Check(type.kind == Kind::kFixedSizeList && IsFixedWidthLeafSubtree(type),
        ErrorCode::kInvalid, "not a fixed-width leaf: " + type.ToString());
  return type.fsl_dimension * FixedLeafWidth(type.children[0]);
}

namespace detail {

inline void SerializeDataType(const DataType& type, std::vector<uint8_t>* out) {
  out->push_back(static_cast<uint8_t>(type.kind));
  out->push_back(type.nullable ? 1 : 0);
  switch (type.kind) {
    case Kind::kFixedSizeList:
      le::Append<uint32_t>(out, static_cast<uint32_t>(type.fsl_dimension));
      SerializeDataType(type.children[0], out);
      break;
    case Kind::kList:
      SerializeDataType(type.children[0], out);
      break;
    case Kind::kStruct:
      le::Append<uint32_t>(out, static_cast<uint32_t>(type.children.size()));
      for (size_t i = 0; i < type.children.size(); i++) {
        le::AppendString(out, type.field_names[i]);
        SerializeDataType(type.children[i], out);
      }
      break;
    default:
      break;
  }
}

inline DataType ParseDataType(le::Reader* reader) {
  DataType type;
  auto kind = reader->Read<uint8_t>();
  Check(kind <= static_cast<uint8_t>(Kind::kStruct), ErrorCode::kCorrupt,
        "bad data type kind");
  type.kind = static_cast<Kind>(kind);
  type.nullable = reader->Read<uint8_t>() != 0;
  switch (type.kind) {
    case Kind::kFixedSizeList:
      type.fsl_dimension = reader->Read<uint32_t>();
      type.children.push_back(ParseDataType(reader));
      break;
    case Kind::kList:
      type.children.push_back(ParseDataType(reader));
      break;
    case Kind::kStruct: {
      auto count = reader->Read<uint32_t>();
      for (uint32_t i = 0; i < count; i++) {
        type.field_names.push_back(reader->ReadString());
        type.children.push_back(ParseDataType(reader));
      }
      break;
    }
    default:
      break;
  }
  return type;
}

}  // namespace detail

}  // namespace zipcol
