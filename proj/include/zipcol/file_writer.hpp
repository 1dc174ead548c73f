// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zipcol/array.hpp"
#include "zipcol/arrow_baseline.hpp"
#include "zipcol/codecs.hpp"
#include "zipcol/common.hpp"
#include "zipcol/fullzip.hpp"
#include "zipcol/metadata.hpp"
#include "zipcol/miniblock.hpp"
#include "zipcol/packing.hpp"
#include "zipcol/repdef.hpp"

namespace zipcol {

namespace file {

constexpr double kFullZipThresholdBytes = 128.0;

// width >= threshold routes to full-zip; the tie goes to full-zip since it
// is never worse for random access on disk.
inline PageEncoding SelectEncoding(double avg_width,
                                   double threshold = kFullZipThresholdBytes) {
  return avg_width >= threshold ? PageEncoding::kFullZip
                                : PageEncoding::kMiniBlock;
}

struct ColumnOptions {
  std::optional<PageEncoding> force_encoding;
  CodecRequest codec{CodecId::kPassthrough, 0};
  StructPacking packing = StructPacking::kShredded;
};

struct WriteOptions {
  uint64_t page_budget = uint64_t{8} << 20;  // one page per 8 MiB per column
  uint64_t miniblock_payload_target = miniblock::kDefaultPayloadTarget;
  double fullzip_threshold = kFullZipThresholdBytes;
  std::map<std::string, ColumnOptions> columns;

  [[nodiscard]] ColumnOptions For(const std::string& name) const {
    auto it = columns.find(name);
    return it == columns.end() ? ColumnOptions{} : it->second;
  }
};

struct PageReport {
  PageEncoding encoding = PageEncoding::kMiniBlock;
  uint64_t rows = 0;
  uint64_t values = 0;
  uint64_t encoded_bytes = 0;
  uint64_t chunk_count = 0;
  uint64_t cache_payload_bytes = 0;
  double avg_width = 0;
};

struct LeafReport {
  std::string path;
  std::vector<PageReport> pages;
};

struct ColumnReport {
  std::string name;
  StructPacking packing = StructPacking::kShredded;
  std::vector<LeafReport> leaves;
  uint64_t encoded_bytes = 0;
  uint64_t cache_payload_bytes = 0;
};

struct WriteReport {
  std::vector<ColumnReport> columns;
  uint64_t row_count = 0;
  uint64_t data_bytes = 0;
  uint64_t meta_bytes = 0;
  uint64_t file_bytes = 0;
  uint64_t cache_payload_bytes = 0;
};

struct WriteResult {
  std::vector<uint8_t> bytes;
  WriteReport report;
};

namespace detail {

inline ExtentRef AppendExtent(std::vector<uint8_t>* file,
                              std::span<const uint8_t> bytes) {
  file->resize(bit_util::AlignUp(file->size(), 8), 0);
  ExtentRef ref{file->size(), bytes.size()};
  file->insert(file->end(), bytes.begin(), bytes.end());
  return ref;
}

// Average serialized payload width per top-level row for one leaf (offset
// entries counted at 4 bytes, matching array::AvgValueWidth).
inline double LeafAvgWidth(const RepDefLevels& levels, uint64_t rows) {
  uint64_t payload = levels.leaf_values.bytes.size();
  if (!levels.leaf_values.fixed_width) {
    payload += 4 * (levels.leaf_values.Count() + 1);
  }
  return rows == 0 ? 0.0
                   : static_cast<double>(payload) / static_cast<double>(rows);
}

inline PageMeta EncodeFullZipPage(const RepDefLevels& levels,
                                  const CodecRequest& request,
                                  std::vector<uint8_t>* file,
                                  PageReport* report) {
  CompressedBuffer compressed = codecs::Encode(levels.leaf_values, request);
  FullZipPage page = fullzip::Encode(levels, compressed);
  PageMeta meta;
  meta.encoding = PageEncoding::kFullZip;
  auto& m = meta.fullzip;
  m.max_rep = page.max_rep;
  m.max_def = page.max_def;
  m.values_fixed = page.values_fixed ? 1 : 0;
  m.value_width = page.value_width;
  m.length_prefix_width = page.length_prefix_width;
  m.fixed_record_width = page.fixed_record_width;
  m.value_count = page.value_count;
  m.rep_index_entry_width = page.rep_index_entry_width;
  m.codec = compressed.descriptor;
  // The repetition index extent precedes the zipped data extent.
  if (!page.rep_index.empty()) {
    m.rep_index = AppendExtent(file, page.rep_index);
  }
  m.data = AppendExtent(file, page.zipped);
  report->encoded_bytes = page.rep_index.size() + page.zipped.size();
  report->cache_payload_bytes = m.codec.aux.size();
  return meta;
}

inline PageMeta EncodeMiniBlockPage(const RepDefLevels& levels,
                                    const CodecRequest& request,
                                    uint64_t payload_target,
                                    std::vector<uint8_t>* file,
                                    PageReport* report) {
  MiniBlockPage page = miniblock::Encode(levels, request, payload_target);
  PageMeta meta;
  meta.encoding = PageEncoding::kMiniBlock;
  auto& m = meta.miniblock;
  m.max_rep = page.max_rep;
  m.max_def = page.max_def;
  m.lengths_width = page.lengths_width;
  m.total_values = page.total_values;
  m.codec = page.codec;
  m.data = AppendExtent(file, page.data);
  for (const auto& chunk : page.chunks) {
    m.chunk_words.push_back(chunk.meta_word);
  }
  if (page.HasRepIndex()) {
    uint64_t max_int = 0;
    for (const auto& chunk : page.chunks) {
      max_int = std::max({max_int, chunk.rows_completed, chunk.trailing_items});
    }
    m.rep_int_width = static_cast<uint8_t>(bit_util::MinByteWidth(max_int));
    for (const auto& chunk : page.chunks) {
      m.rep_index.emplace_back(chunk.rows_completed, chunk.trailing_items);
    }
  }
  report->encoded_bytes = page.data.size();
  report->chunk_count = page.chunks.size();
  report->cache_payload_bytes = miniblock::CachePayloadBytes(
      page.chunks.size(), page.HasRepIndex(), m.rep_int_width,
      m.codec.aux.size());
  return meta;
}

}  // namespace detail

inline WriteResult WriteFile(
    const std::vector<std::pair<std::string, LogicalArray>>& columns,
    const WriteOptions& options = {}) {
  uint64_t row_count = columns.empty() ? 0 : columns[0].second.length;
  for (const auto& [name, array] : columns) {
    Check(array.length == row_count, ErrorCode::kInvalid,
          "column " + name + " length differs");
    auto violation = array::Validate(array);
    Check(!violation.has_value(), ErrorCode::kInvalid,
          "column " + name + " is invalid: " + violation.value_or(""));
  }

  WriteResult result;
  std::vector<uint8_t>& file = result.bytes;
  result.report.row_count = row_count;
  std::vector<ColumnMeta> metas;

  for (const auto& [name, array] : columns) {
    ColumnOptions opts = options.For(name);
    ColumnMeta meta;
    meta.name = name;
    meta.dtype = array.dtype;
    meta.packing = opts.packing;
    ColumnReport column_report;
    column_report.name = name;
    column_report.packing = opts.packing;

    // Row slabs: one page per leaf per ~page_budget of encoded column data.
    uint64_t slab_rows = row_count;
    if (row_count > 0) {
      double est = array::AvgValueWidth(array) * 1.05 + 2.0;
      slab_rows = std::max<uint64_t>(
          1, static_cast<uint64_t>(
                 static_cast<double>(options.page_budget) / est));
      slab_rows = std::min(slab_rows, row_count);
    }

    bool arrow = opts.force_encoding.has_value() &&
                 *opts.force_encoding == PageEncoding::kArrowBaseline;
    bool packed = opts.packing == StructPacking::kPackedStruct;
    if (packed) {
      packing::CheckPackable(array.dtype);
      Check(!arrow, ErrorCode::kInvalid,
            "packing is not defined for the arrow baseline");
    }

    std::vector<std::string> leaf_paths;
    if (arrow || packed) {
      leaf_paths.push_back("");
    } else {
      for (const auto& path : repdef::detail::BuildPaths(array.dtype)) {
        std::string joined;
        for (const auto& layer : path.layers) {
          if (layer.role == repdef::detail::LayerRole::kStruct) {
            if (!joined.empty()) joined += ".";
            joined += layer.field_name;
          }
        }
        leaf_paths.push_back(joined);
      }
    }
    meta.leaves.resize(leaf_paths.size());
    column_report.leaves.resize(leaf_paths.size());
    for (size_t l = 0; l < leaf_paths.size(); l++) {
      meta.leaves[l].path = leaf_paths[l];
      column_report.leaves[l].path = leaf_paths[l];
    }

    for (uint64_t begin = 0; begin < row_count; begin += slab_rows) {
      uint64_t end = std::min(row_count, begin + slab_rows);
      LogicalArray slab = array::Slice(array, begin, end - begin);
      if (arrow) {
        PageMeta page;
        page.encoding = PageEncoding::kArrowBaseline;
        page.row_begin = begin;
        page.row_end = end;
        page.arrow_extents = arrow_baseline::Write(slab, &file);
        PageReport page_report;
        page_report.encoding = page.encoding;
        page_report.rows = end - begin;
        for (const auto& e : page.arrow_extents) {
          page_report.encoded_bytes += e.extent.length;
        }
        meta.leaves[0].pages.push_back(std::move(page));
        column_report.leaves[0].pages.push_back(page_report);
        continue;
      }

      std::vector<RepDefLevels> leaf_levels;
      if (packed) {
        packing::PackedColumn packed_column = packing::Pack(slab);
        meta.packed_length_widths = packed_column.field_length_widths;
        leaf_levels.push_back(std::move(packed_column.levels));
      } else {
        leaf_levels = Shred(slab);
      }

      for (size_t l = 0; l < leaf_levels.size(); l++) {
        const RepDefLevels& levels = leaf_levels[l];
        double width = detail::LeafAvgWidth(levels, end - begin);
        PageEncoding encoding =
            opts.force_encoding.value_or(SelectEncoding(
                width, options.fullzip_threshold));
        PageReport page_report;
        page_report.rows = end - begin;
        page_report.values = levels.rep.size();
        page_report.avg_width = width;
        PageMeta page;
        if (encoding == PageEncoding::kFullZip) {
          page = detail::EncodeFullZipPage(levels, opts.codec, &file,
                                           &page_report);
        } else {
          page = detail::EncodeMiniBlockPage(levels, opts.codec,
                                             options.miniblock_payload_target,
                                             &file, &page_report);
        }
        page_report.encoding = page.encoding;
        page.row_begin = begin;
        page.row_end = end;
        meta.leaves[l].pages.push_back(std::move(page));
        column_report.leaves[l].pages.push_back(page_report);
      }
    }

    for (const auto& leaf : column_report.leaves) {
      for (const auto& page : leaf.pages) {
        column_report.encoded_bytes += page.encoded_bytes;
        column_report.cache_payload_bytes += page.cache_payload_bytes;
      }
    }
    result.report.data_bytes += column_report.encoded_bytes;
    result.report.cache_payload_bytes += column_report.cache_payload_bytes;
    result.report.columns.push_back(std::move(column_report));
    metas.push_back(std::move(meta));
  }

  std::vector<uint8_t> meta_block = meta::SerializeColumns(metas);
  file.resize(bit_util::AlignUp(file.size(), 8), 0);
  FileFooter footer;
  footer.meta_offset = file.size();
  footer.meta_length = meta_block.size();
  footer.column_count = static_cast<uint32_t>(columns.size());
  footer.row_count = row_count;
  file.insert(file.end(), meta_block.begin(), meta_block.end());
  file.resize(bit_util::AlignUp(file.size(), 8), 0);
  meta::SerializeFooter(footer, &file);

  result.report.meta_bytes = footer.meta_length;
  result.report.file_bytes = file.size();
  return result;
}

}  // namespace file

}  // namespace zipcol
