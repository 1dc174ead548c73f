// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zipcol/codecs.hpp"
#include "zipcol/common.hpp"
#include "zipcol/data_type.hpp"

namespace zipcol {

// On-disk layout (all integers little-endian, every extent 8-byte aligned):
//
//   [page extents ...][column metadata block][footer]
//
// Footer (40 bytes, the last bytes of the file):
//   magic "ZCF1", meta offset u64, meta length u64, column count u32,
//   row count u64, version major u16, version minor u16, magic "ZCF1".
//
// The column metadata block is a self-describing tag-length-value region;
// the exact grammar is documented in docs/FORMAT.md.  Miniblock chunk words,
// per-chunk repetition-index integers, and codec auxiliary buffers (the
// search-cache payload) live inside this block so that one read warms a
// file's cache.

constexpr uint8_t kFooterMagic[4] = {'Z', 'C', 'F', '1'};
constexpr uint64_t kFooterBytes = 40;
constexpr uint16_t kVersionMajor = 1;
constexpr uint16_t kVersionMinor = 0;

enum class PageEncoding : uint8_t {
  kArrowBaseline = 0,
  kFullZip = 1,
  kMiniBlock = 2,
};

enum class StructPacking : uint8_t {
  kShredded = 0,
  kPackedStruct = 1,
};

struct ExtentRef {
  uint64_t offset = 0;
  uint64_t length = 0;
};

// Arrow-baseline buffer roles, listed in the canonical depth-first walk
// order of the column's type.
enum class ArrowRole : uint8_t { kValidity = 0, kOffsets = 1, kData = 2 };

struct ArrowExtent {
  ArrowRole role = ArrowRole::kData;
  uint8_t level = 0;
  ExtentRef extent;
};

struct FullZipPageMeta {
  uint16_t max_rep = 0;
  uint16_t max_def = 0;
  uint8_t values_fixed = 0;
  uint64_t value_width = 0;
  uint8_t length_prefix_width = 0;
  uint64_t fixed_record_width = 0;
  uint64_t value_count = 0;
  uint8_t rep_index_entry_width = 0;
  ExtentRef rep_index;
  ExtentRef data;
  CodecDescriptor codec;
};

struct MiniBlockPageMeta {
  uint16_t max_rep = 0;
  uint16_t max_def = 0;
  uint8_t lengths_width = 1;
  uint64_t total_values = 0;
  ExtentRef data;
  CodecDescriptor codec;
  std::vector<uint16_t> chunk_words;
  uint8_t rep_int_width = 0;  // 0 when the column has no lists
  std::vector<std::pair<uint64_t, uint64_t>> rep_index;  // (rows, trailing)
};

struct PageMeta {
  PageEncoding encoding = PageEncoding::kMiniBlock;
  uint64_t row_begin = 0;
  uint64_t row_end = 0;
  FullZipPageMeta fullzip;
  MiniBlockPageMeta miniblock;
  std::vector<ArrowExtent> arrow_extents;
};

struct LeafMeta {
  std::string path;  // dotted field path within the column; "" at the root
  std::vector<PageMeta> pages;
};

struct ColumnMeta {
  std::string name;
  DataType dtype;
  StructPacking packing = StructPacking::kShredded;
  std::vector<uint8_t> packed_length_widths;  // per variable-width field
  std::vector<LeafMeta> leaves;
};

struct FileFooter {
  uint64_t meta_offset = 0;
  uint64_t meta_length = 0;
  uint32_t column_count = 0;
  uint64_t row_count = 0;
  uint16_t version_major = kVersionMajor;
  uint16_t version_minor = kVersionMinor;
};

namespace meta {

inline void SerializeFooter(const FileFooter& footer,
                            std::vector<uint8_t>* out) {
  out->insert(out->end(), std::begin(kFooterMagic), std::end(kFooterMagic));
  le::Append<uint64_t>(out, footer.meta_offset);
  le::Append<uint64_t>(out, footer.meta_length);
  le::Append<uint32_t>(out, footer.column_count);
  le::Append<uint64_t>(out, footer.row_count);
  le::Append<uint16_t>(out, footer.version_major);
  le::Append<uint16_t>(out, footer.version_minor);
  out->insert(out->end(), std::begin(kFooterMagic), std::end(kFooterMagic));
}

inline FileFooter ParseFooter(std::span<const uint8_t> tail) {
  Check(tail.size() == kFooterBytes, ErrorCode::kCorrupt, "bad footer size");
  Check(std::equal(std::begin(kFooterMagic), std::end(kFooterMagic),
                   tail.begin()) &&
            std::equal(std::begin(kFooterMagic), std::end(kFooterMagic),
                       tail.end() - 4),
        ErrorCode::kCorrupt, "bad magic");
  le::Reader reader(tail.subspan(4));
  FileFooter footer;
  footer.meta_offset = reader.Read<uint64_t>();
  footer.meta_length = reader.Read<uint64_t>();
  footer.column_count = reader.Read<uint32_t>();
  footer.row_count = reader.Read<uint64_t>();
  footer.version_major = reader.Read<uint16_t>();
  footer.version_minor = reader.Read<uint16_t>();
  Check(footer.version_major == kVersionMajor, ErrorCode::kUnsupported,
        "unknown major version " + std::to_string(footer.version_major));
  return footer;
}

inline void SerializeExtent(const ExtentRef& extent,
                            std::vector<uint8_t>* out) {
  le::Append<uint64_t>(out, extent.offset);
  le::Append<uint64_t>(out, extent.length);
}

inline ExtentRef ParseExtent(le::Reader* reader) {
  ExtentRef extent;
  extent.offset = reader->Read<uint64_t>();
  extent.length = reader->Read<uint64_t>();
  return extent;
}

inline void SerializePage(const PageMeta& page, std::vector<uint8_t>* out) {
  out->push_back(static_cast<uint8_t>(page.encoding));
  le::Append<uint64_t>(out, page.row_begin);
  le::Append<uint64_t>(out, page.row_end);
  switch (page.encoding) {
    case PageEncoding::kArrowBaseline: {
      out->push_back(static_cast<uint8_t>(page.arrow_extents.size()));
      for (const auto& e : page.arrow_extents) {
        out->push_back(static_cast<uint8_t>(e.role));
        out->push_back(e.level);
        SerializeExtent(e.extent, out);
      }
      break;
    }
    case PageEncoding::kFullZip: {
      const auto& m = page.fullzip;
      le::Append<uint16_t>(out, m.max_rep);
      le::Append<uint16_t>(out, m.max_def);
      out->push_back(m.values_fixed);
      le::Append<uint64_t>(out, m.value_width);
      out->push_back(m.length_prefix_width);
      le::Append<uint64_t>(out, m.fixed_record_width);
      le::Append<uint64_t>(out, m.value_count);
      out->push_back(m.rep_index_entry_width);
      SerializeExtent(m.rep_index, out);
      SerializeExtent(m.data, out);
      codecs::SerializeDescriptor(m.codec, out);
      break;
    }
    case PageEncoding::kMiniBlock: {
      const auto& m = page.miniblock;
      le::Append<uint16_t>(out, m.max_rep);
      le::Append<uint16_t>(out, m.max_def);
      out->push_back(m.lengths_width);
      le::Append<uint64_t>(out, m.total_values);
      SerializeExtent(m.data, out);
      codecs::SerializeDescriptor(m.codec, out);
      le::Append<uint32_t>(out, static_cast<uint32_t>(m.chunk_words.size()));
      for (uint16_t word : m.chunk_words) {
        le::Append<uint16_t>(out, word);
      }
      out->push_back(m.rep_int_width);
      if (m.rep_int_width > 0) {
        for (const auto& [rows, trailing] : m.rep_index) {
          le::AppendUnsigned(out, rows, m.rep_int_width);
          le::AppendUnsigned(out, trailing, m.rep_int_width);
        }
      }
      break;
    }
  }
}

inline PageMeta ParsePage(le::Reader* reader) {
  PageMeta page;
  auto tag = reader->Read<uint8_t>();
  Check(tag <= 2, ErrorCode::kCorrupt, "bad page encoding tag");
  page.encoding = static_cast<PageEncoding>(tag);
  page.row_begin = reader->Read<uint64_t>();
  page.row_end = reader->Read<uint64_t>();
  switch (page.encoding) {
    case PageEncoding::kArrowBaseline: {
      auto count = reader->Read<uint8_t>();
      for (uint8_t i = 0; i < count; i++) {
        ArrowExtent e;
        auto role = reader->Read<uint8_t>();
        Check(role <= 2, ErrorCode::kCorrupt, "bad arrow buffer role");
        e.role = static_cast<ArrowRole>(role);
        e.level = reader->Read<uint8_t>();
        e.extent = ParseExtent(reader);
        page.arrow_extents.push_back(e);
      }
      break;
    }
    case PageEncoding::kFullZip: {
      auto& m = page.fullzip;
      m.max_rep = reader->Read<uint16_t>();
      m.max_def = reader->Read<uint16_t>();
      m.values_fixed = reader->Read<uint8_t>();
      m.value_width = reader->Read<uint64_t>();
      m.length_prefix_width = reader->Read<uint8_t>();
      m.fixed_record_width = reader->Read<uint64_t>();
      m.value_count = reader->Read<uint64_t>();
      m.rep_index_entry_width = reader->Read<uint8_t>();
      m.rep_index = ParseExtent(reader);
      m.data = ParseExtent(reader);
      m.codec = codecs::ParseDescriptor(reader);
      break;
    }
    case PageEncoding::kMiniBlock: {
      auto& m = page.miniblock;
      m.max_rep = reader->Read<uint16_t>();
      m.max_def = reader->Read<uint16_t>();
      m.lengths_width = reader->Read<uint8_t>();
      m.total_values = reader->Read<uint64_t>();
      m.data = ParseExtent(reader);
      m.codec = codecs::ParseDescriptor(reader);
      auto chunk_count = reader->Read<uint32_t>();
      m.chunk_words.reserve(chunk_count);
      for (uint32_t i = 0; i < chunk_count; i++) {
        m.chunk_words.push_back(reader->Read<uint16_t>());
      }
      m.rep_int_width = reader->Read<uint8_t>();
      if (m.rep_int_width > 0) {
        for (uint32_t i = 0; i < chunk_count; i++) {
          uint64_t rows = reader->ReadUnsigned(m.rep_int_width);
          uint64_t trailing = reader->ReadUnsigned(m.rep_int_width);
          m.rep_index.emplace_back(rows, trailing);
        }
      }
      break;
    }
  }
  return page;
}

inline std::vector<uint8_t> SerializeColumns(
    const std::vector<ColumnMeta>& columns) {
  std::vector<uint8_t> out;
  le::Append<uint32_t>(&out, static_cast<uint32_t>(columns.size()));
  for (const auto& column : columns) {
    le::AppendString(&out, column.name);
    detail::SerializeDataType(column.dtype, &out);
    out.push_back(static_cast<uint8_t>(column.packing));
    le::Append<uint32_t>(&out,
                         static_cast<uint32_t>(column.packed_length_widths.size()));
    out.insert(out.end(), column.packed_length_widths.begin(),
               column.packed_length_widths.end());
    le::Append<uint32_t>(&out, static_cast<uint32_t>(column.leaves.size()));
    for (const auto& leaf : column.leaves) {
      le::AppendString(&out, leaf.path);
      le::Append<uint32_t>(&out, static_cast<uint32_t>(leaf.pages.size()));
      for (const auto& page : leaf.pages) {
        SerializePage(page, &out);
      }
    }
  }
  return out;
}

inline std::vector<ColumnMeta> ParseColumns(std::span<const uint8_t> bytes) {
  le::Reader reader(bytes);
  auto column_count = reader.Read<uint32_t>();
  std::vector<ColumnMeta> columns;
  columns.reserve(column_count);
  for (uint32_t c = 0; c < column_count; c++) {
    ColumnMeta column;
    column.name = reader.ReadString();
    column.dtype = detail::ParseDataType(&reader);
    auto packing = reader.Read<uint8_t>();
    Check(packing <= 1, ErrorCode::kCorrupt, "bad packing tag");
    column.packing = static_cast<StructPacking>(packing);
    auto width_count = reader.Read<uint32_t>();
    auto widths = reader.ReadBytes(width_count);
    column.packed_length_widths.assign(widths.begin(), widths.end());
    auto leaf_count = reader.Read<uint32_t>();
    for (uint32_t l = 0; l < leaf_count; l++) {
      LeafMeta leaf;
      leaf.path = reader.ReadString();
      auto page_count = reader.Read<uint32_t>();
      for (uint32_t p = 0; p < page_count; p++) {
        leaf.pages.push_back(ParsePage(&reader));
      }
      column.leaves.push_back(std::move(leaf));
    }
    columns.push_back(std::move(column));
  }
  return columns;
}

}  // namespace meta

}  // namespace zipcol
