// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "zipcol/array.hpp"
#include "zipcol/common.hpp"
#include "zipcol/io.hpp"
#include "zipcol/metadata.hpp"

namespace zipcol {

// Arrow-style structural encoding: dense flattened buffers, one validity
// bitmap per nullable layer and one offsets array per repetition layer, no
// pages, no chunking, no compression.  Offsets are stored as u64 entries.
// Random access resolves buffer addresses level by level, which is what
// makes the cost grow with nesting.
namespace arrow_baseline {

struct ExtentAppender {
  std::vector<uint8_t>* file;

  ExtentRef Append(std::span<const uint8_t> bytes) {
    file->resize(bit_util::AlignUp(file->size(), 8), 0);
    ExtentRef ref{file->size(), bytes.size()};
    file->insert(file->end(), bytes.begin(), bytes.end());
    return ref;
  }
};

namespace detail {

inline void WriteNode(const LogicalArray& a, uint8_t level,
                      ExtentAppender* appender,
                      std::vector<ArrowExtent>* out) {
  if (a.dtype.nullable) {
    // Nullable layers always materialize their bitmap so that the layout is
    // a pure function of the type.
    std::vector<uint8_t> bits;
    if (a.validity.has_value()) {
      bits = *a.validity;
    } else {
      bits.assign(bit_util::CeilDiv(a.length, 8), 0xFF);
    }
    out->push_back({ArrowRole::kValidity, level, appender->Append(bits)});
  }
  switch (a.dtype.kind) {
    case Kind::kUtf8:
    case Kind::kBinary: {
      std::vector<uint8_t> offsets;
      for (uint64_t o : a.offsets) {
        le::Append<uint64_t>(&offsets, o);
      }
      out->push_back({ArrowRole::kOffsets, level, appender->Append(offsets)});
      out->push_back({ArrowRole::kData, level, appender->Append(a.values)});
      break;
    }
    case Kind::kList: {
      std::vector<uint8_t> offsets;
      for (uint64_t o : a.offsets) {
        le::Append<uint64_t>(&offsets, o);
      }
      out->push_back({ArrowRole::kOffsets, level, appender->Append(offsets)});
      WriteNode(a.children[0], level + 1, appender, out);
      break;
    }
    case Kind::kFixedSizeList:
      WriteNode(a.children[0], level + 1, appender, out);
      break;
    case Kind::kStruct:
      for (const auto& child : a.children) {
        WriteNode(child, level + 1, appender, out);
      }
      break;
    default:
      out->push_back({ArrowRole::kData, level, appender->Append(a.values)});
      break;
  }
}

inline size_t CountExtents(const DataType& t) {
  size_t count = t.nullable ? 1 : 0;
  switch (t.kind) {
    case Kind::kUtf8:
    case Kind::kBinary:
      return count + 2;
    case Kind::kList:
      return count + 1 + CountExtents(t.children[0]);
    case Kind::kFixedSizeList:
      return count + CountExtents(t.children[0]);
    case Kind::kStruct: {
      for (const auto& child : t.children) {
        count += CountExtents(child);
      }
      return count;
    }
    default:
      return count + 1;
  }
}

}  // namespace detail

// Serializes one column slice into dense per-level extents.  Nulls occupy
// full-width placeholder bytes in fixed-width leaves; the array is written
// in canonical form.
inline std::vector<ArrowExtent> Write(const LogicalArray& a,
                                      std::vector<uint8_t>* file) {
  LogicalArray canonical = array::Normalize(a);
  ExtentAppender appender{file};
  std::vector<ArrowExtent> extents;
  detail::WriteNode(canonical, 0, &appender, &extents);
  return extents;
}

struct TraceEntry {
  int phase = 0;
  ReadRequest request;
};

struct ReadResult {
  LogicalArray rows;
  std::vector<TraceEntry> trace;
  int phases = 0;
  uint64_t planned_iops = 0;
  uint64_t useful_bytes = 0;  // exact bytes needed, before sector padding
};

namespace detail {

struct Walker {
  Storage* storage;
  const std::vector<ArrowExtent>* extents;
  size_t cursor = 0;
  ReadResult* result;

  std::vector<uint8_t> Issue(const ExtentRef& extent, uint64_t offset,
                             uint64_t length, int phase, IoTag tag,
                             uint64_t exact_need) {
    Check(offset + length <= extent.length, ErrorCode::kCorrupt,
          "arrow extent overrun");
    ReadRequest request{extent.offset + offset, length, tag};
    result->trace.push_back({phase, request});
    result->phases = std::max(result->phases, phase);
    result->planned_iops++;
    result->useful_bytes += exact_need;
    return storage->ReadOne(request.offset, request.length, tag);
  }

  const ExtentRef& Next(ArrowRole role) {
    Check(cursor < extents->size(), ErrorCode::kCorrupt,
          "arrow extent list exhausted");
    const ArrowExtent& e = (*extents)[cursor++];
    Check(e.role == role, ErrorCode::kCorrupt, "arrow extent role mismatch");
    return e.extent;
  }

  void Skip(const DataType& t) { cursor += CountExtents(t); }

  // Reads items [i, j) of the node and returns them with rebased offsets.
  LogicalArray Node(const DataType& t, uint64_t i, uint64_t j, int phase) {
    LogicalArray out;
    out.dtype = t;
    out.length = j - i;
    if (t.nullable) {
      // Only the sector-aligned slice holding the needed bits is fetched;
      // it still counts as one IOP.
      const ExtentRef& extent = Next(ArrowRole::kValidity);
      uint64_t byte_lo = i / 8;
      uint64_t byte_hi = j == i ? byte_lo : (j + 7) / 8;
      uint64_t sector_lo = (byte_lo / kSectorBytes) * kSectorBytes;
      uint64_t sector_hi =
          std::min<uint64_t>(extent.length,
                             bit_util::AlignUp(byte_hi, kSectorBytes));
      auto bytes = Issue(extent, sector_lo, sector_hi - sector_lo, phase,
                         IoTag::kData, byte_hi - byte_lo);
      std::vector<bool> bits(j - i);
      bool any = false;
      for (uint64_t b = i; b < j; b++) {
        uint64_t byte = b / 8 - sector_lo;
        bits[b - i] = (bytes[byte] >> (b % 8)) & 1;
        if (!bits[b - i]) any = true;
      }
      if (any) {
        out.validity = MakeBitmap(bits);
      }
    }
    switch (t.kind) {
      case Kind::kUtf8:
      case Kind::kBinary: {
        const ExtentRef& offsets = Next(ArrowRole::kOffsets);
        auto offset_bytes = Issue(offsets, i * 8, (j - i + 1) * 8, phase,
                                  IoTag::kData, (j - i + 1) * 8);
        std::vector<uint64_t> entries(j - i + 1);
        for (uint64_t e = 0; e <= j - i; e++) {
          entries[e] = le::Load<uint64_t>(offset_bytes.data() + e * 8);
        }
        const ExtentRef& data = Next(ArrowRole::kData);
        auto bytes = Issue(data, entries[0], entries[j - i] - entries[0],
                           phase + 1, IoTag::kData,
                           entries[j - i] - entries[0]);
        uint64_t base = entries[0];
        for (auto& entry : entries) {
          entry -= base;
        }
        out.offsets = std::move(entries);
        out.values = std::move(bytes);
        break;
      }
      case Kind::kList: {
        const ExtentRef& offsets = Next(ArrowRole::kOffsets);
        auto offset_bytes = Issue(offsets, i * 8, (j - i + 1) * 8, phase,
                                  IoTag::kData, (j - i + 1) * 8);
        std::vector<uint64_t> entries(j - i + 1);
        for (uint64_t e = 0; e <= j - i; e++) {
          entries[e] = le::Load<uint64_t>(offset_bytes.data() + e * 8);
        }
        uint64_t base = entries[0];
        LogicalArray child =
            Node(t.children[0], base, entries[j - i], phase + 1);
        for (auto& entry : entries) {
          entry -= base;
        }
        out.offsets = std::move(entries);
        out.children.push_back(std::move(child));
        break;
      }
      case Kind::kFixedSizeList:
        // Positionally addressed: same phase.
        out.children.push_back(Node(t.children[0], i * t.fsl_dimension,
                                    j * t.fsl_dimension, phase));
        break;
      case Kind::kStruct:
        for (const auto& child : t.children) {
          out.children.push_back(Node(child, i, j, phase));
        }
        break;
      default: {
        uint64_t width = PrimitiveWidth(t.kind);
        const ExtentRef& data = Next(ArrowRole::kData);
        out.values = Issue(data, i * width, (j - i) * width, phase,
                           IoTag::kData, (j - i) * width);
        break;
      }
    }
    return out;
  }

  // Walks down to a struct-field path without issuing reads, then reads the
  // selected subtree.
  LogicalArray Select(const DataType& t, std::span<const size_t> path,
                      uint64_t i, uint64_t j) {
    if (path.empty()) {
      return Node(t, i, j, 1);
    }
    Check(t.kind == Kind::kStruct, ErrorCode::kInvalid,
          "field selection through a non-struct type");
    if (t.nullable) {
      Next(ArrowRole::kValidity);
    }
    for (size_t c = 0; c < path[0]; c++) {
      Skip(t.children[c]);
    }
    return Select(t.children[path[0]], path.subspan(1), i, j);
  }
};

}  // namespace detail

// Reads rows [i, j), resolving buffer addresses phase by phase: validity and
// offsets first, then whatever they point at.  The trace records every
// request with the phase it was issued in.
inline ReadResult Read(Storage* storage,
                       const std::vector<ArrowExtent>& extents,
                       const DataType& dtype, uint64_t i, uint64_t j,
                       std::span<const size_t> field_path = {}) {
  ReadResult result;
  detail::Walker walker{storage, &extents, 0, &result};
  result.rows = walker.Select(dtype, field_path, i, j);
  return result;
}

}  // namespace arrow_baseline

}  // namespace zipcol
