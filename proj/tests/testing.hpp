// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zipcol/array.hpp"
#include "zipcol/data_type.hpp"

namespace zipcol::testing {

using Rng = std::mt19937_64;

inline uint64_t RandomInt(Rng& rng, uint64_t lo, uint64_t hi) {
  return std::uniform_int_distribution<uint64_t>(lo, hi)(rng);
}

inline bool Chance(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline Kind RandomPrimitiveKind(Rng& rng) {
  static const Kind kKinds[] = {Kind::kUInt8,  Kind::kUInt16, Kind::kUInt32,
                                Kind::kUInt64, Kind::kInt8,   Kind::kInt16,
                                Kind::kInt32,  Kind::kInt64,  Kind::kFloat32,
                                Kind::kFloat64};
  return kKinds[RandomInt(rng, 0, std::size(kKinds) - 1)];
}

// Random nested dtype with depth at most `max_depth` below this node.
inline DataType RandomDataType(Rng& rng, int max_depth,
                               bool allow_nullable = true) {
  bool nullable = allow_nullable && Chance(rng, 0.5);
  uint64_t roll = RandomInt(rng, 0, 9);
  if (max_depth == 0 || roll < 4) {
    if (roll % 3 == 0) {
      return Chance(rng, 0.5) ? DataType::Utf8(nullable)
                              : DataType::Binary(nullable);
    }
    return DataType::Primitive(RandomPrimitiveKind(rng), nullable);
  }
  if (roll < 6) {
    return DataType::List(RandomDataType(rng, max_depth - 1), nullable);
  }
  if (roll < 8) {
    // FSL subtree must be a non-nullable fixed-width chain.
    DataType child = DataType::Primitive(RandomPrimitiveKind(rng), false);
    return DataType::FixedSizeList(child, RandomInt(rng, 1, 6), nullable);
  }
  std::vector<std::pair<std::string, DataType>> fields;
  uint64_t n = RandomInt(rng, 1, 3);
  for (uint64_t i = 0; i < n; i++) {
    fields.emplace_back("f" + std::to_string(i),
                        RandomDataType(rng, max_depth - 1));
  }
  return DataType::Struct(std::move(fields), nullable);
}

// Random array honoring the model invariants.  Invalid rows carry garbage
// payload with probability `garbage`, exercising the rule that logical
// equality ignores bytes under nulls.
inline LogicalArray RandomArray(const DataType& dtype, uint64_t length,
                                double null_density, Rng& rng,
                                double garbage = 0.3) {
  LogicalArray out;
  out.dtype = dtype;
  out.length = length;
  std::vector<bool> valid(length, true);
  if (dtype.nullable) {
    bool any = false;
    for (uint64_t i = 0; i < length; i++) {
      if (Chance(rng, null_density)) {
        valid[i] = false;
        any = true;
      }
    }
    if (any) {
      out.validity = MakeBitmap(valid);
    }
  }
  switch (dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary: {
      out.offsets.push_back(0);
      for (uint64_t i = 0; i < length; i++) {
        uint64_t n = valid[i] || Chance(rng, garbage) ? RandomInt(rng, 0, 12)
                                                      : 0;
        for (uint64_t j = 0; j < n; j++) {
          out.values.push_back(static_cast<uint8_t>(
              dtype.kind == Kind::kUtf8 ? 'a' + RandomInt(rng, 0, 25)
                                        : RandomInt(rng, 0, 255)));
        }
        out.offsets.push_back(out.values.size());
      }
      break;
    }
    case Kind::kList: {
      out.offsets.push_back(0);
      for (uint64_t i = 0; i < length; i++) {
        uint64_t n = 0;
        if (valid[i] || Chance(rng, garbage)) {
          n = RandomInt(rng, 0, 4);
        }
        out.offsets.push_back(out.offsets.back() + n);
      }
      out.children.push_back(RandomArray(dtype.children[0], out.offsets.back(),
                                         null_density, rng, garbage));
      break;
    }
    case Kind::kFixedSizeList:
      out.children.push_back(RandomArray(dtype.children[0],
                                         length * dtype.fsl_dimension,
                                         null_density, rng, garbage));
      break;
    case Kind::kStruct:
      for (const auto& child : dtype.children) {
        out.children.push_back(
            RandomArray(child, length, null_density, rng, garbage));
      }
      break;
    default: {
      uint64_t width = PrimitiveWidth(dtype.kind);
      out.values.resize(length * width);
      for (auto& b : out.values) {
        b = static_cast<uint8_t>(RandomInt(rng, 0, 255));
      }
      break;
    }
  }
  return out;
}

inline std::vector<uint64_t> RandomSortedUniqueIndices(Rng& rng, uint64_t k,
                                                       uint64_t n) {
  std::vector<uint64_t> indices;
  if (n == 0) {
    return indices;
  }
  k = std::min(k, n);
  std::vector<bool> seen(n, false);
  while (indices.size() < k) {
    uint64_t i = RandomInt(rng, 0, n - 1);
    if (!seen[i]) {
      seen[i] = true;
      indices.push_back(i);
    }
  }
  std::sort(indices.begin(), indices.end());
  return indices;
}

}  // namespace zipcol::testing
