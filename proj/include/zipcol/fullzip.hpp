// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zipcol/codecs.hpp"
#include "zipcol/common.hpp"
#include "zipcol/repdef.hpp"

namespace zipcol {

// Per-value prefix holding the bit-packed repetition and definition levels.
// The definition level occupies the least significant def_bits; the
// repetition level sits directly above it.  Control words are byte aligned
// and never bit packed across values.
struct ControlWordSpec {
  int rep_bits = 0;
  int def_bits = 0;
  int width_bytes = 1;

  static ControlWordSpec For(uint16_t max_rep, uint16_t max_def) {
    ControlWordSpec spec;
    spec.rep_bits = bit_util::BitLength(max_rep);
    spec.def_bits = bit_util::BitLength(max_def);
    Check(spec.rep_bits + spec.def_bits <= 32, ErrorCode::kUnsupported,
          "combined level width exceeds 32 bits");
    spec.width_bytes = std::max(
        1, static_cast<int>(bit_util::CeilDiv(spec.rep_bits + spec.def_bits, 8)));
    return spec;
  }

  [[nodiscard]] uint32_t Pack(uint16_t rep, uint16_t def) const {
    return (static_cast<uint32_t>(rep) << def_bits) | def;
  }

  void Unpack(uint32_t word, uint16_t* rep, uint16_t* def) const {
    *def = static_cast<uint16_t>(word & ((uint32_t{1} << def_bits) - 1));
    *rep = static_cast<uint16_t>((word >> def_bits) &
                                 ((uint32_t{1} << rep_bits) - 1));
  }
};

// One full-zip encoded column chunk: every value is preceded by its control
// word, values are compressed before zipping, and variable-width rows are
// addressed through a byte-offset repetition index with one entry per
// top-level row plus a terminal end offset.
struct FullZipPage {
  std::vector<uint8_t> zipped;
  std::vector<uint8_t> rep_index;   // packed entries, absent for fixed layout
  uint8_t rep_index_entry_width = 0;
  uint64_t fixed_record_width = 0;  // nonzero only for the fixed layout
  bool values_fixed = false;
  uint64_t value_width = 0;         // encoded width when values_fixed
  uint8_t length_prefix_width = 0;  // variable-width values only
  uint16_t max_rep = 0;
  uint16_t max_def = 0;
  uint64_t row_count = 0;
  uint64_t value_count = 0;  // level entries, including null/empty markers

  [[nodiscard]] ControlWordSpec control_words() const {
    return ControlWordSpec::For(max_rep, max_def);
  }

  [[nodiscard]] uint64_t RepIndexEntry(uint64_t i) const {
    return le::LoadUnsigned(rep_index.data() + i * rep_index_entry_width,
                            rep_index_entry_width);
  }
};

namespace fullzip {

inline void CheckCodecLegal(const CodecDescriptor& desc) {
  Check(desc.transparency() == Transparency::kTransparent,
        ErrorCode::kIllegalCodec,
        "full-zip accepts only transparent codecs");
  if (desc.id == CodecId::kBitPack && desc.param % 8 != 0) {
    Raise(ErrorCode::kIllegalCodec,
          "full-zip needs byte-aligned value extents; bit width " +
              std::to_string(desc.param) + " is not byte aligned");
  }
}

inline FullZipPage Encode(const RepDefLevels& levels,
                          const CompressedBuffer& leaf) {
  CheckCodecLegal(leaf.descriptor);
  uint64_t valid_count = 0;
  for (uint16_t d : levels.def) {
    if (d == 0) valid_count++;
  }
  Check(valid_count == leaf.value_count, ErrorCode::kInvalid,
        "compressed buffer does not match level stream");

  FullZipPage page;
  page.max_rep = levels.max_rep;
  page.max_def = levels.max_def;
  page.value_count = levels.rep.size();
  ControlWordSpec spec = page.control_words();

  uint64_t fixed_value_width = leaf.descriptor.EncodedFixedWidth();
  page.values_fixed = fixed_value_width != 0;
  page.value_width = fixed_value_width;

  if (!page.values_fixed) {
    uint64_t max_length = 0;
    for (uint64_t i = 0; i < leaf.value_count; i++) {
      max_length = std::max(max_length, leaf.ExtentOf(i).length);
    }
    page.length_prefix_width =
        static_cast<uint8_t>(bit_util::MinByteWidth(max_length));
  }

  bool fixed_layout = page.values_fixed && levels.max_rep == 0;
  std::vector<uint64_t> row_offsets;
  uint64_t next_value = 0;
  for (uint64_t e = 0; e < page.value_count; e++) {
    bool new_row = levels.max_rep == 0 || levels.rep[e] == levels.max_rep;
    if (new_row) {
      row_offsets.push_back(page.zipped.size());
      page.row_count++;
    }
    le::AppendUnsigned(&page.zipped, spec.Pack(levels.rep[e], levels.def[e]),
                       spec.width_bytes);
    if (levels.def[e] == 0) {
      auto extent = leaf.ExtentOf(next_value++);
      if (!page.values_fixed) {
        le::AppendUnsigned(&page.zipped, extent.length,
                           page.length_prefix_width);
      }
      page.zipped.insert(
          page.zipped.end(), leaf.bytes.begin() + extent.offset,
          leaf.bytes.begin() + extent.offset + extent.length);
    } else if (page.values_fixed) {
      // Nulls in fixed-width data get full-width zero filler so offsets stay
      // computable.
      page.zipped.resize(page.zipped.size() + fixed_value_width, 0);
    }
  }

  if (fixed_layout) {
    page.fixed_record_width = spec.width_bytes + fixed_value_width;
  } else {
    row_offsets.push_back(page.zipped.size());
    page.rep_index_entry_width =
        static_cast<uint8_t>(bit_util::MinByteWidth(page.zipped.size()));
    for (uint64_t offset : row_offsets) {
      le::AppendUnsigned(&page.rep_index, offset, page.rep_index_entry_width);
    }
  }
  return page;
}

struct RecordCursor {
  std::span<const uint8_t> bytes;
  uint64_t pos = 0;
};

// Parses one record from the zipped stream, appending to `levels` and the
// compressed value stream.
inline void ParseRecord(RecordCursor* cursor, const FullZipPage& page,
                        const ControlWordSpec& spec, RepDefLevels* levels,
                        std::vector<uint8_t>* value_bytes,
                        std::vector<uint64_t>* value_lengths) {
  auto need = [&](uint64_t n) {
    Check(cursor->pos + n <= cursor->bytes.size(), ErrorCode::kCorrupt,
          "zipped record stream truncated at byte offset " +
              std::to_string(cursor->pos));
  };
  need(spec.width_bytes);
  auto word = static_cast<uint32_t>(le::LoadUnsigned(
      cursor->bytes.data() + cursor->pos, spec.width_bytes));
  cursor->pos += spec.width_bytes;
  uint16_t rep = 0;
  uint16_t def = 0;
  spec.Unpack(word, &rep, &def);
  Check(rep <= page.max_rep && def <= page.max_def, ErrorCode::kCorrupt,
        "corrupt control word at byte offset " +
            std::to_string(cursor->pos - spec.width_bytes));
  levels->rep.push_back(rep);
  levels->def.push_back(def);
  uint64_t body = 0;
  if (def == 0) {
    if (page.values_fixed) {
      body = page.value_width;
    } else {
      need(page.length_prefix_width);
      body = le::LoadUnsigned(cursor->bytes.data() + cursor->pos,
                              page.length_prefix_width);
      cursor->pos += page.length_prefix_width;
    }
    need(body);
    value_bytes->insert(value_bytes->end(),
                        cursor->bytes.begin() + cursor->pos,
                        cursor->bytes.begin() + cursor->pos + body);
    value_lengths->push_back(body);
    cursor->pos += body;
  } else if (page.values_fixed) {
    need(page.value_width);
    cursor->pos += page.value_width;  // skip filler
  }
}

// Sequentially unzips a byte range of whole records.  The repetition index is
// never consulted, so full scans skip reading it entirely.
inline RepDefLevels DecodeRange(std::span<const uint8_t> bytes,
                                const FullZipPage& page,
                                const CodecDescriptor& codec) {
  ControlWordSpec spec = page.control_words();
  RepDefLevels levels;
  levels.max_rep = page.max_rep;
  levels.max_def = page.max_def;
  CompressedBuffer compressed;
  compressed.descriptor = codec;
  std::vector<uint64_t> lengths;
  RecordCursor cursor{bytes, 0};
  while (cursor.pos < bytes.size()) {
    ParseRecord(&cursor, page, spec, &levels, &compressed.bytes, &lengths);
  }
  compressed.value_count = lengths.size();
  if (codec.EncodedFixedWidth() == 0) {
    compressed.extent_lengths = std::move(lengths);
  }
  levels.leaf_values = codecs::Decode(compressed);
  return levels;
}

inline RepDefLevels DecodeScan(const FullZipPage& page,
                               const CodecDescriptor& codec) {
  RepDefLevels levels = DecodeRange(page.zipped, page, codec);
  Check(levels.rep.size() == page.value_count, ErrorCode::kCorrupt,
        "scan produced wrong entry count");
  return levels;
}

struct ByteRange {
  uint64_t offset = 0;
  uint64_t length = 0;
};

// Planned reads for random access to rows [begin, end).  Fixed layout needs a
// single data read; the variable layout first reads the two bounding
// repetition-index entries (one contiguous slice, since entries are packed at
// a fixed width) and then the value bytes: two reads total, at any nesting
// depth.
struct RowLocation {
  std::optional<ByteRange> rep_index_read;
  ByteRange data_read;
  int planned_iops = 0;
};

inline RowLocation LocateRows(const FullZipPage& page, uint64_t begin,
                              uint64_t end) {
  Check(begin <= end && end <= page.row_count, ErrorCode::kOutOfRange,
        "row range out of bounds");
  RowLocation loc;
  if (page.fixed_record_width != 0) {
    loc.data_read = {begin * page.fixed_record_width,
                     (end - begin) * page.fixed_record_width};
    loc.planned_iops = 1;
    return loc;
  }
  uint64_t w = page.rep_index_entry_width;
  loc.rep_index_read = ByteRange{begin * w, (end - begin + 1) * w};
  uint64_t from = page.RepIndexEntry(begin);
  uint64_t to = page.RepIndexEntry(end);
  loc.data_read = {from, to - from};
  loc.planned_iops = 2;
  return loc;
}

// Decodes the bytes returned by LocateRows back into levels for the selected
// rows.  The fragment is self-contained: every row's records are complete.
inline RepDefLevels DecodeRows(std::span<const uint8_t> bytes,
                               const FullZipPage& page,
                               const CodecDescriptor& codec,
                               uint64_t expected_rows) {
  RepDefLevels levels = DecodeRange(bytes, page, codec);
  uint64_t rows = 0;
  for (uint16_t r : levels.rep) {
    if (page.max_rep == 0 || r == page.max_rep) rows++;
  }
  Check(rows == expected_rows, ErrorCode::kCorrupt,
        "decoded " + std::to_string(rows) + " rows, expected " +
            std::to_string(expected_rows));
  return levels;
}

}  // namespace fullzip

}  // namespace zipcol
