// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "zipcol/array.hpp"
#include "zipcol/arrow_baseline.hpp"
#include "zipcol/common.hpp"
#include "zipcol/file_writer.hpp"
#include "zipcol/fullzip.hpp"
#include "zipcol/io.hpp"
#include "zipcol/metadata.hpp"
#include "zipcol/miniblock.hpp"
#include "zipcol/packing.hpp"
#include "zipcol/repdef.hpp"

namespace zipcol {

namespace file {

struct Batch {
  uint64_t row_begin = 0;
  LogicalArray rows;
};

struct TakeResult {
  LogicalArray rows;
  uint64_t planned_iops = 0;   // data-path reads planned by the take
  uint64_t useful_bytes = 0;   // encoded bytes strictly required on disk
};

namespace detail {

struct TakeCounters {
  uint64_t planned_iops = 0;
  uint64_t useful_bytes = 0;
};

}  // namespace detail

// Read handle: immutable after open, safe for concurrent scans and takes.
// Opening reads the footer and the column metadata block; the miniblock
// chunk words, per-chunk repetition indices and codec auxiliary buffers
// parsed from that block form the warm search cache, so takes plan data
// reads without any metadata I/O.
class FileReader {
 public:
  static std::shared_ptr<FileReader> Open(std::shared_ptr<Storage> storage,
                                          CoalescePolicy policy = {}) {
    auto reader = std::make_shared<FileReader>();
    reader->storage_ = std::move(storage);
    reader->policy_ = policy;
    uint64_t size = reader->storage_->Size();
    Check(size >= kFooterBytes, ErrorCode::kCorrupt, "file truncated");
    auto tail = reader->storage_->ReadOne(size - kFooterBytes, kFooterBytes,
                                          IoTag::kMetadata);
    reader->footer_ = meta::ParseFooter(tail);
    Check(reader->footer_.meta_offset + reader->footer_.meta_length <= size,
          ErrorCode::kCorrupt, "metadata block out of bounds");
    auto block = reader->storage_->ReadOne(reader->footer_.meta_offset,
                                           reader->footer_.meta_length,
                                           IoTag::kMetadata);
    reader->columns_ = meta::ParseColumns(block);
    Check(reader->columns_.size() == reader->footer_.column_count,
          ErrorCode::kCorrupt, "column count mismatch");
    reader->BuildRuntime();
    return reader;
  }

  [[nodiscard]] uint64_t row_count() const { return footer_.row_count; }
  [[nodiscard]] const std::vector<ColumnMeta>& columns() const {
    return columns_;
  }
  [[nodiscard]] uint64_t cache_bytes() const { return cache_bytes_; }
  [[nodiscard]] IoStats stats() const { return storage_->stats(); }
  [[nodiscard]] Storage& storage() const { return *storage_; }

  // --- Scan ---

  std::vector<Batch> ScanColumn(const std::string& selection) {
    Selection sel = Resolve(selection);
    const ColumnMeta& column = columns_[sel.column_index];
    std::vector<Batch> batches;
    size_t page_count =
        column.leaves.empty() ? 0 : column.leaves[sel.leaf_indices[0]].pages.size();
    for (size_t p = 0; p < page_count; p++) {
      batches.push_back(ScanSlab(sel, p));
    }
    return batches;
  }

  LogicalArray ReadColumn(const std::string& selection) {
    Selection sel = Resolve(selection);
    auto batches = ScanColumn(selection);
    if (batches.empty()) {
      return array::Empty(sel.result_dtype);
    }
    std::vector<LogicalArray> pieces;
    pieces.reserve(batches.size());
    for (auto& batch : batches) {
      pieces.push_back(std::move(batch.rows));
    }
    return array::Concat(pieces);
  }

  // --- Take ---

  // Indices may be unsorted and may repeat; rows come back in the order
  // requested.  Planning is exact: one data read per full-zip fixed-width
  // run, a repetition-index read plus a data read per variable-width run,
  // and one read per distinct miniblock chunk.
  TakeResult Take(const std::string& selection,
                  const std::vector<uint64_t>& indices) {
    Selection sel = Resolve(selection);
    for (uint64_t index : indices) {
      Check(index < footer_.row_count, ErrorCode::kOutOfRange,
            "row " + std::to_string(index) + " out of range");
    }
    std::vector<uint64_t> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    TakeResult result;
    if (sorted.empty()) {
      result.rows = array::Empty(sel.result_dtype);
      return result;
    }

    const ColumnMeta& column = columns_[sel.column_index];
    const auto& slab_pages = column.leaves[sel.leaf_indices[0]].pages;
    std::vector<LogicalArray> slab_arrays;
    size_t cursor = 0;
    for (size_t p = 0; p < slab_pages.size() && cursor < sorted.size(); p++) {
      uint64_t row_begin = slab_pages[p].row_begin;
      uint64_t row_end = slab_pages[p].row_end;
      std::vector<uint64_t> local;
      while (cursor < sorted.size() && sorted[cursor] < row_end) {
        local.push_back(sorted[cursor] - row_begin);
        cursor++;
      }
      if (local.empty()) {
        continue;
      }
      detail::TakeCounters counters;
      slab_arrays.push_back(TakeSlab(sel, p, local, &counters));
      result.planned_iops += counters.planned_iops;
      result.useful_bytes += counters.useful_bytes;
    }
    LogicalArray sorted_rows = array::Concat(slab_arrays);

    // Restore the requested order, including duplicates.
    std::vector<uint64_t> positions;
    positions.reserve(indices.size());
    for (uint64_t index : indices) {
      positions.push_back(static_cast<uint64_t>(
          std::lower_bound(sorted.begin(), sorted.end(), index) -
          sorted.begin()));
    }
    bool identity = positions.size() == sorted.size();
    if (identity) {
      for (size_t i = 0; i < positions.size(); i++) {
        if (positions[i] != i) {
          identity = false;
          break;
        }
      }
    }
    result.rows = identity ? std::move(sorted_rows)
                           : array::GatherRows(sorted_rows, positions);
    return result;
  }

 private:
  struct Selection {
    size_t column_index = 0;
    std::vector<size_t> field_path;
    DataType narrowed;      // column dtype with structs narrowed to the path
    DataType result_dtype;  // dtype of the selected node
    std::vector<size_t> leaf_indices;
  };

  void BuildRuntime() {
    runtime_.resize(columns_.size());
    for (size_t c = 0; c < columns_.size(); c++) {
      const ColumnMeta& column = columns_[c];
      runtime_[c].resize(column.leaves.size());
      for (size_t l = 0; l < column.leaves.size(); l++) {
        for (const PageMeta& page : column.leaves[l].pages) {
          runtime_[c][l].push_back(BuildPageRuntime(page));
          const auto& rt = runtime_[c][l].back();
          if (page.encoding == PageEncoding::kMiniBlock) {
            cache_bytes_ += miniblock::CachePayloadBytes(
                rt.mb.chunks.size(), rt.mb.HasRepIndex(),
                page.miniblock.rep_int_width,
                page.miniblock.codec.aux.size());
          } else if (page.encoding == PageEncoding::kFullZip) {
            cache_bytes_ += page.fullzip.codec.aux.size();
          }
        }
      }
    }
  }

  struct PageRuntime {
    MiniBlockPage mb;  // populated for miniblock pages (data left empty)
  };

  static PageRuntime BuildPageRuntime(const PageMeta& page) {
    PageRuntime rt;
    if (page.encoding != PageEncoding::kMiniBlock) {
      return rt;
    }
    const MiniBlockPageMeta& m = page.miniblock;
    rt.mb.max_rep = m.max_rep;
    rt.mb.max_def = m.max_def;
    rt.mb.codec = m.codec;
    rt.mb.lengths_width = m.lengths_width;
    rt.mb.total_values = m.total_values;
    rt.mb.total_rows = page.row_end - page.row_begin;
    uint64_t offset = 0;
    uint64_t cum_values = 0;
    uint64_t cum_rows = 0;
    for (size_t i = 0; i < m.chunk_words.size(); i++) {
      miniblock::ChunkInfo info;
      info.offset = offset;
      info.meta_word = m.chunk_words[i];
      uint64_t rounded = 0;
      uint64_t body_bytes = 0;
      miniblock::DecodeChunkMeta(info.meta_word, &rounded, &body_bytes);
      offset += body_bytes;
      uint64_t count = rounded;
      if (i + 1 == m.chunk_words.size()) {
        count = m.total_values - cum_values;
        Check(count >= 1 && count <= rounded, ErrorCode::kCorrupt,
              "final chunk count out of range");
      }
      cum_values += count;
      info.value_count = count;
      info.cum_values = cum_values;
      if (m.rep_int_width > 0) {
        info.rows_completed = m.rep_index[i].first;
        info.trailing_items = m.rep_index[i].second;
        cum_rows += info.rows_completed;
        info.cum_rows = cum_rows;
      } else {
        info.cum_rows = cum_values;
      }
      rt.mb.chunks.push_back(info);
    }
    Check(offset == m.data.length, ErrorCode::kCorrupt,
          "chunk bodies disagree with the data extent");
    Check(cum_values == m.total_values, ErrorCode::kCorrupt,
          "chunk counts disagree with the page total");
    return rt;
  }

  static FullZipPage FullZipFromMeta(const PageMeta& page) {
    const FullZipPageMeta& m = page.fullzip;
    FullZipPage fz;
    fz.max_rep = m.max_rep;
    fz.max_def = m.max_def;
    fz.values_fixed = m.values_fixed != 0;
    fz.value_width = m.value_width;
    fz.length_prefix_width = m.length_prefix_width;
    fz.fixed_record_width = m.fixed_record_width;
    fz.rep_index_entry_width = m.rep_index_entry_width;
    fz.row_count = page.row_end - page.row_begin;
    fz.value_count = m.value_count;
    return fz;
  }

  Selection Resolve(const std::string& spec) const {
    Selection sel;
    std::string column_name = spec;
    std::vector<std::string> fields;
    auto find_column = [&](const std::string& name, size_t* out) {
      for (size_t c = 0; c < columns_.size(); c++) {
        if (columns_[c].name == name) {
          *out = c;
          return true;
        }
      }
      return false;
    };
    size_t index = 0;
    if (!find_column(spec, &index)) {
      auto dot = spec.find('.');
      Check(dot != std::string::npos, ErrorCode::kInvalid,
            "no such column: " + spec);
      column_name = spec.substr(0, dot);
      Check(find_column(column_name, &index), ErrorCode::kInvalid,
            "no such column: " + column_name);
      std::string rest = spec.substr(dot + 1);
      size_t start = 0;
      while (start <= rest.size()) {
        auto next = rest.find('.', start);
        if (next == std::string::npos) {
          fields.push_back(rest.substr(start));
          break;
        }
        fields.push_back(rest.substr(start, next - start));
        start = next + 1;
      }
    }
    sel.column_index = index;

    const DataType& dtype = columns_[index].dtype;
    const DataType* node = &dtype;
    for (const auto& field : fields) {
      Check(node->kind == Kind::kStruct, ErrorCode::kInvalid,
            "field selection through a non-struct type: " + field);
      bool found = false;
      for (size_t f = 0; f < node->field_names.size(); f++) {
        if (node->field_names[f] == field) {
          sel.field_path.push_back(f);
          node = &node->children[f];
          found = true;
          break;
        }
      }
      Check(found, ErrorCode::kInvalid, "no such field: " + field);
    }
    sel.result_dtype = *node;

    // Narrow each struct along the path to the single selected field.
    std::function<DataType(const DataType&, size_t)> narrow =
        [&](const DataType& t, size_t depth) -> DataType {
      if (depth == sel.field_path.size()) {
        return t;
      }
      size_t f = sel.field_path[depth];
      DataType out = t;
      out.field_names = {t.field_names[f]};
      out.children = {narrow(t.children[f], depth + 1)};
      return out;
    };
    sel.narrowed = narrow(dtype, 0);

    const ColumnMeta& column = columns_[index];
    if (column.packing == StructPacking::kPackedStruct ||
        (column.leaves.size() == 1 && column.leaves[0].pages.size() > 0 &&
         column.leaves[0].pages[0].encoding == PageEncoding::kArrowBaseline)) {
      sel.leaf_indices = {0};
      return sel;
    }
    std::string joined;
    for (size_t d = 0; d < fields.size(); d++) {
      if (d > 0) joined += ".";
      joined += fields[d];
    }
    for (size_t l = 0; l < column.leaves.size(); l++) {
      const std::string& path = column.leaves[l].path;
      if (joined.empty() || path == joined ||
          path.rfind(joined + ".", 0) == 0) {
        sel.leaf_indices.push_back(l);
      }
    }
    Check(!sel.leaf_indices.empty(), ErrorCode::kInvalid,
          "selection matches no leaf columns");
    return sel;
  }

  static LogicalArray StripStructLayers(LogicalArray a, size_t layers) {
    for (size_t i = 0; i < layers; i++) {
      LogicalArray child = std::move(a.children[0]);
      a = std::move(child);
    }
    return a;
  }

  // Whole-page decode used by scans: one sequential read per page data
  // extent; full-zip repetition indices are never read.
  RepDefLevels ScanLeafPage(const PageMeta& page, const PageRuntime& rt) {
    if (page.encoding == PageEncoding::kFullZip) {
      auto bytes = storage_->ReadOne(page.fullzip.data.offset,
                                     page.fullzip.data.length, IoTag::kData);
      FullZipPage fz = FullZipFromMeta(page);
      fz.zipped = std::move(bytes);
      return fullzip::DecodeScan(fz, page.fullzip.codec);
    }
    Check(page.encoding == PageEncoding::kMiniBlock, ErrorCode::kInvalid,
          "not a leaf page");
    auto bytes = storage_->ReadOne(page.miniblock.data.offset,
                                   page.miniblock.data.length, IoTag::kData);
    std::vector<RepDefLevels> decoded;
    for (size_t c = 0; c < rt.mb.chunks.size(); c++) {
      const auto& info = rt.mb.chunks[c];
      decoded.push_back(miniblock::DecodeChunk(
          rt.mb, c,
          std::span<const uint8_t>(bytes).subspan(info.offset,
                                                  info.BodyBytes())));
    }
    if (rt.mb.chunks.empty()) {
      RepDefLevels empty;
      empty.max_rep = rt.mb.max_rep;
      empty.max_def = rt.mb.max_def;
      empty.leaf_values.fixed_width = rt.mb.codec.values_fixed;
      empty.leaf_values.width = rt.mb.codec.value_width;
      return empty;
    }
    return miniblock::DecodeChunkSpan(rt.mb, 0, rt.mb.chunks.size() - 1,
                                      decoded);
  }

  Batch ScanSlab(const Selection& sel, size_t slab) {
    const ColumnMeta& column = columns_[sel.column_index];
    const PageMeta& first_page =
        column.leaves[sel.leaf_indices[0]].pages[slab];
    Batch batch;
    batch.row_begin = first_page.row_begin;
    if (first_page.encoding == PageEncoding::kArrowBaseline) {
      auto result = arrow_baseline::Read(
          storage_.get(), first_page.arrow_extents, column.dtype, 0,
          first_page.row_end - first_page.row_begin, sel.field_path);
      batch.rows = std::move(result.rows);
      return batch;
    }
    if (column.packing == StructPacking::kPackedStruct) {
      RepDefLevels levels = ScanLeafPage(
          first_page, runtime_[sel.column_index][0][slab]);
      LogicalArray rows =
          packing::Unpack(levels, column.dtype, column.packed_length_widths);
      batch.rows = DescendFields(std::move(rows), sel.field_path);
      return batch;
    }
    std::vector<RepDefLevels> levels;
    for (size_t leaf : sel.leaf_indices) {
      levels.push_back(ScanLeafPage(column.leaves[leaf].pages[slab],
                                    runtime_[sel.column_index][leaf][slab]));
    }
    LogicalArray merged = UnshredColumn(levels, sel.narrowed);
    batch.rows = StripStructLayers(std::move(merged), sel.field_path.size());
    return batch;
  }

  static LogicalArray DescendFields(LogicalArray a,
                                    std::span<const size_t> path) {
    for (size_t f : path) {
      LogicalArray child = std::move(a.children[f]);
      a = std::move(child);
    }
    return a;
  }

  // Random access into one leaf page: rows are page-local, sorted, unique.
  RepDefLevels TakeLeafRows(const PageMeta& page, const PageRuntime& rt,
                            const std::vector<uint64_t>& rows,
                            detail::TakeCounters* counters) {
    if (page.encoding == PageEncoding::kFullZip) {
      return TakeFullZip(page, rows, counters);
    }
    Check(page.encoding == PageEncoding::kMiniBlock, ErrorCode::kInvalid,
          "not a leaf page");
    return TakeMiniBlock(page, rt, rows, counters);
  }

  RepDefLevels TakeFullZip(const PageMeta& page,
                           const std::vector<uint64_t>& rows,
                           detail::TakeCounters* counters) {
    const FullZipPageMeta& m = page.fullzip;
    FullZipPage fz = FullZipFromMeta(page);
    std::vector<RepDefLevels> fragments;
    size_t i = 0;
    while (i < rows.size()) {
      size_t j = i + 1;
      while (j < rows.size() && rows[j] == rows[j - 1] + 1) {
        j++;
      }
      uint64_t begin = rows[i];
      uint64_t end = rows[j - 1] + 1;
      uint64_t data_from = 0;
      uint64_t data_len = 0;
      if (m.fixed_record_width != 0) {
        data_from = begin * m.fixed_record_width;
        data_len = (end - begin) * m.fixed_record_width;
        counters->planned_iops += 1;
      } else {
        // One read covers both bounding index entries; they are adjacent at
        // a fixed packed width.
        uint64_t w = m.rep_index_entry_width;
        auto slice = storage_->ReadOne(m.rep_index.offset + begin * w,
                                       (end - begin + 1) * w,
                                       IoTag::kRepIndex);
        uint64_t from = le::LoadUnsigned(slice.data(), static_cast<int>(w));
        uint64_t to = le::LoadUnsigned(
            slice.data() + (end - begin) * w, static_cast<int>(w));
        data_from = from;
        data_len = to - from;
        counters->planned_iops += 2;
      }
      counters->useful_bytes += data_len;
      auto bytes = storage_->ReadOne(m.data.offset + data_from, data_len,
                                     IoTag::kData);
      fragments.push_back(
          fullzip::DecodeRows(bytes, fz, m.codec, end - begin));
      i = j;
    }
    return ConcatLevels(fragments);
  }

  RepDefLevels TakeMiniBlock(const PageMeta& page, const PageRuntime& rt,
                             const std::vector<uint64_t>& rows,
                             detail::TakeCounters* counters) {
    const MiniBlockPage& mb = rt.mb;
    std::vector<miniblock::ChunkRange> ranges;
    std::vector<uint64_t> chunk_ids;
    for (uint64_t row : rows) {
      auto range = miniblock::LocateRow(mb, row);
      ranges.push_back(range);
      for (uint64_t c = range.first; c <= range.last; c++) {
        chunk_ids.push_back(c);
      }
    }
    std::sort(chunk_ids.begin(), chunk_ids.end());
    chunk_ids.erase(std::unique(chunk_ids.begin(), chunk_ids.end()),
                    chunk_ids.end());

    // One data read per distinct chunk; the io engine may coalesce
    // neighbors.
    std::vector<ReadRequest> requests;
    for (uint64_t c : chunk_ids) {
      const auto& info = mb.chunks[c];
      requests.push_back({page.miniblock.data.offset + info.offset,
                          info.BodyBytes(), IoTag::kData});
    }
    counters->planned_iops += requests.size();
    auto bodies = storage_->Submit(requests, policy_);
    std::map<uint64_t, RepDefLevels> decoded;
    for (size_t i = 0; i < chunk_ids.size(); i++) {
      decoded.emplace(chunk_ids[i],
                      miniblock::DecodeChunk(mb, chunk_ids[i], bodies[i]));
    }

    std::vector<RepDefLevels> fragments;
    for (size_t r = 0; r < rows.size(); r++) {
      const auto& range = ranges[r];
      std::vector<RepDefLevels> span_chunks;
      for (uint64_t c = range.first; c <= range.last; c++) {
        span_chunks.push_back(decoded.at(c));
      }
      RepDefLevels span =
          miniblock::DecodeChunkSpan(mb, range.first, range.last, span_chunks);
      fragments.push_back(miniblock::SliceRows(mb, range.first, span, rows[r],
                                               rows[r] + 1));
      counters->useful_bytes +=
          EncodedLevelBytes(rt.mb, fragments.back());
    }
    return ConcatLevels(fragments);
  }

  static RepDefLevels ConcatLevels(const std::vector<RepDefLevels>& pieces) {
    Check(!pieces.empty(), ErrorCode::kInvalid, "no level fragments");
    RepDefLevels out;
    out.max_rep = pieces[0].max_rep;
    out.max_def = pieces[0].max_def;
    out.leaf_values.fixed_width = pieces[0].leaf_values.fixed_width;
    out.leaf_values.width = pieces[0].leaf_values.width;
    for (const auto& piece : pieces) {
      out.rep.insert(out.rep.end(), piece.rep.begin(), piece.rep.end());
      out.def.insert(out.def.end(), piece.def.begin(), piece.def.end());
      out.leaf_values.bytes.insert(out.leaf_values.bytes.end(),
                                   piece.leaf_values.bytes.begin(),
                                   piece.leaf_values.bytes.end());
      if (!out.leaf_values.fixed_width) {
        out.leaf_values.lengths.insert(out.leaf_values.lengths.end(),
                                       piece.leaf_values.lengths.begin(),
                                       piece.leaf_values.lengths.end());
      }
    }
    return out;
  }

  // Encoded footprint of a level fragment: value bytes, length entries,
  // and the bit-packed level streams.
  static uint64_t EncodedLevelBytes(const MiniBlockPage& mb,
                                    const RepDefLevels& fragment) {
    uint64_t entries = fragment.rep.size();
    uint64_t bytes = fragment.leaf_values.bytes.size();
    if (!fragment.leaf_values.fixed_width) {
      bytes += fragment.leaf_values.Count() * mb.lengths_width;
    }
    bytes += bit_util::CeilDiv(entries * bit_util::BitLength(mb.max_rep), 8);
    bytes += bit_util::CeilDiv(entries * bit_util::BitLength(mb.max_def), 8);
    return bytes;
  }

  LogicalArray TakeSlab(const Selection& sel, size_t slab,
                        const std::vector<uint64_t>& local_rows,
                        detail::TakeCounters* counters) {
    const ColumnMeta& column = columns_[sel.column_index];
    const PageMeta& first_page =
        column.leaves[sel.leaf_indices[0]].pages[slab];
    if (first_page.encoding == PageEncoding::kArrowBaseline) {
      std::vector<LogicalArray> rows;
      for (uint64_t row : local_rows) {
        auto result =
            arrow_baseline::Read(storage_.get(), first_page.arrow_extents,
                                 column.dtype, row, row + 1, sel.field_path);
        counters->planned_iops += result.planned_iops;
        counters->useful_bytes += result.useful_bytes;
        rows.push_back(std::move(result.rows));
      }
      return array::Concat(rows);
    }
    if (column.packing == StructPacking::kPackedStruct) {
      RepDefLevels levels =
          TakeLeafRows(first_page, runtime_[sel.column_index][0][slab],
                       local_rows, counters);
      LogicalArray rows =
          packing::Unpack(levels, column.dtype, column.packed_length_widths);
      return DescendFields(std::move(rows), sel.field_path);
    }
    std::vector<RepDefLevels> levels;
    for (size_t leaf : sel.leaf_indices) {
      levels.push_back(TakeLeafRows(column.leaves[leaf].pages[slab],
                                    runtime_[sel.column_index][leaf][slab],
                                    local_rows, counters));
    }
    LogicalArray merged = UnshredColumn(levels, sel.narrowed);
    return StripStructLayers(std::move(merged), sel.field_path.size());
  }

  std::shared_ptr<Storage> storage_;
  CoalescePolicy policy_;
  FileFooter footer_;
  std::vector<ColumnMeta> columns_;
  std::vector<std::vector<std::vector<PageRuntime>>> runtime_;
  uint64_t cache_bytes_ = 0;
};

}  // namespace file

}  // namespace zipcol
