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

namespace miniblock {

constexpr uint64_t kMaxChunkValues = 4096;
constexpr uint64_t kMaxChunkWords = 4095;  // 12-bit field; 32,760 bytes
constexpr uint64_t kDefaultPayloadTarget = 8192;  // two disk sectors

// --- 2-byte chunk metadata word ---
// Low 12 bits: number of 8-byte words in the chunk body.  High 4 bits: log2
// of the value count.  Final chunks of a page may hold a non-power-of-two
// remainder; their word stores the rounded-up log2 and the true count is
// recovered from the page totals.

inline uint16_t EncodeChunkMeta(uint64_t value_count, uint64_t body_bytes) {
  Check(bit_util::IsPowerOfTwo(value_count) && value_count <= kMaxChunkValues,
        ErrorCode::kInvalid, "chunk value count must be a power of two <= 4096");
  Check(body_bytes % 8 == 0 && body_bytes / 8 >= 1 &&
            body_bytes / 8 <= kMaxChunkWords,
        ErrorCode::kInvalid, "chunk body must be 8..32,760 bytes in 8-byte words");
  auto log2 = static_cast<uint16_t>(bit_util::CeilLog2(value_count));
  return static_cast<uint16_t>((log2 << 12) | (body_bytes / 8));
}

inline void DecodeChunkMeta(uint16_t word, uint64_t* value_count,
                            uint64_t* body_bytes) {
  *value_count = uint64_t{1} << (word >> 12);
  *body_bytes = static_cast<uint64_t>(word & 0x0FFF) * 8;
  Check(*body_bytes != 0, ErrorCode::kCorrupt, "chunk meta has zero words");
}

inline uint16_t EncodeChunkMetaRounded(uint64_t value_count,
                                       uint64_t body_bytes) {
  auto log2 = static_cast<uint16_t>(bit_util::CeilLog2(value_count));
  Check(value_count >= 1 && value_count <= kMaxChunkValues &&
            body_bytes % 8 == 0 && body_bytes / 8 >= 1 &&
            body_bytes / 8 <= kMaxChunkWords,
        ErrorCode::kInvalid, "chunk out of range");
  return static_cast<uint16_t>((log2 << 12) | (body_bytes / 8));
}

// --- Chunk body: [u16 buffer count][u16 sizes][8-aligned buffers][pad] ---

inline std::vector<uint8_t> SerializeChunkBody(
    const std::vector<std::vector<uint8_t>>& buffers) {
  std::vector<uint8_t> out;
  le::Append<uint16_t>(&out, static_cast<uint16_t>(buffers.size()));
  for (const auto& buffer : buffers) {
    Check(buffer.size() <= 0xFFFF, ErrorCode::kInvalid, "buffer too large");
    le::Append<uint16_t>(&out, static_cast<uint16_t>(buffer.size()));
  }
  for (const auto& buffer : buffers) {
    out.resize(bit_util::AlignUp(out.size(), 8), 0);
    out.insert(out.end(), buffer.begin(), buffer.end());
  }
  out.resize(bit_util::AlignUp(out.size(), 8), 0);
  return out;
}

inline std::vector<std::span<const uint8_t>> ParseChunkBody(
    std::span<const uint8_t> body) {
  Check(body.size() >= 2, ErrorCode::kCorrupt, "chunk body truncated");
  uint16_t count = le::Load<uint16_t>(body.data());
  Check(body.size() >= 2 + 2 * static_cast<size_t>(count), ErrorCode::kCorrupt,
        "chunk body header truncated");
  std::vector<std::span<const uint8_t>> buffers;
  uint64_t pos = 2 + 2 * static_cast<uint64_t>(count);
  for (uint16_t i = 0; i < count; i++) {
    uint16_t size = le::Load<uint16_t>(body.data() + 2 + 2 * i);
    pos = bit_util::AlignUp(pos, 8);
    Check(pos + size <= body.size(), ErrorCode::kCorrupt,
          "chunk buffer sizes inconsistent with body length");
    buffers.push_back(body.subspan(pos, size));
    pos += size;
  }
  Check(bit_util::AlignUp(pos, 8) == body.size(), ErrorCode::kCorrupt,
        "chunk buffer sizes inconsistent with body length");
  return buffers;
}

// --- Page ---

// Per-chunk search-cache entry.  The on-disk form is the 2-byte meta word
// plus the two repetition-index integers when lists are present; the
// in-memory form adds the chunk offset and cumulative counters.
struct ChunkInfo {
  uint64_t offset = 0;      // byte offset of the body within the page data
  uint16_t meta_word = 0;
  uint64_t value_count = 0;
  uint64_t cum_values = 0;  // entries through this chunk, inclusive
  // Repetition index (lists only): rows completed within this chunk and
  // flattened items since the end of the last completed row.
  uint64_t rows_completed = 0;
  uint64_t cum_rows = 0;
  uint64_t trailing_items = 0;

  [[nodiscard]] uint64_t BodyBytes() const {
    uint64_t values = 0;
    uint64_t bytes = 0;
    DecodeChunkMeta(meta_word, &values, &bytes);
    return bytes;
  }
};

struct MiniBlockPage {
  uint16_t max_rep = 0;
  uint16_t max_def = 0;
  CodecDescriptor codec;      // data codec, configured page-level
  uint8_t lengths_width = 1;  // width of per-value length entries
  uint64_t total_rows = 0;
  uint64_t total_values = 0;
  std::vector<ChunkInfo> chunks;
  std::vector<uint8_t> data;  // concatenated chunk bodies

  [[nodiscard]] bool HasRepIndex() const { return max_rep > 0; }
};

namespace detail {

struct LevelBits {
  int rep_bits;
  int def_bits;
};

inline LevelBits BitsOf(const RepDefLevels& levels) {
  return {bit_util::BitLength(levels.max_rep),
          bit_util::BitLength(levels.max_def)};
}

inline std::vector<uint8_t> PackLevels(std::span<const uint16_t> values,
                                       int bits) {
  BitWriter writer(bits);
  for (uint16_t v : values) {
    writer.Write(v);
  }
  return writer.TakeBytes();
}

// Number of data buffers a codec contributes to a chunk, and whether a
// per-value length buffer precedes the bytes.
inline bool NeedsLengthBuffer(const CodecDescriptor& desc) {
  return desc.EncodedFixedWidth() == 0 && desc.id != CodecId::kChunkedBlock;
}

struct SliceView {
  const RepDefLevels* levels;
  std::vector<uint64_t> value_prefix;  // valid values before entry i
  std::vector<uint64_t> byte_prefix;   // leaf bytes before valid value v

  explicit SliceView(const RepDefLevels& l) : levels(&l) {
    value_prefix.resize(l.def.size() + 1, 0);
    for (size_t i = 0; i < l.def.size(); i++) {
      value_prefix[i + 1] = value_prefix[i] + (l.def[i] == 0 ? 1 : 0);
    }
    uint64_t count = l.leaf_values.Count();
    byte_prefix.resize(count + 1, 0);
    for (uint64_t v = 0; v < count; v++) {
      byte_prefix[v + 1] = byte_prefix[v] + l.leaf_values.LengthOf(v);
    }
  }

  [[nodiscard]] ValueStream Values(uint64_t entry_begin,
                                   uint64_t entry_end) const {
    uint64_t vb = value_prefix[entry_begin];
    uint64_t ve = value_prefix[entry_end];
    ValueStream out;
    out.fixed_width = levels->leaf_values.fixed_width;
    out.width = levels->leaf_values.width;
    out.bytes.assign(levels->leaf_values.bytes.begin() + byte_prefix[vb],
                     levels->leaf_values.bytes.begin() + byte_prefix[ve]);
    if (!out.fixed_width) {
      out.lengths.assign(levels->leaf_values.lengths.begin() + vb,
                         levels->leaf_values.lengths.begin() + ve);
    }
    return out;
  }
};

inline std::vector<std::vector<uint8_t>> ChunkBuffers(
    const RepDefLevels& levels, const SliceView& view,
    const CodecDescriptor& desc, uint8_t lengths_width, uint64_t begin,
    uint64_t end) {
  std::vector<std::vector<uint8_t>> buffers;
  LevelBits bits = BitsOf(levels);
  if (bits.rep_bits > 0) {
    buffers.push_back(PackLevels(
        std::span<const uint16_t>(levels.rep).subspan(begin, end - begin),
        bits.rep_bits));
  }
  if (bits.def_bits > 0) {
    buffers.push_back(PackLevels(
        std::span<const uint16_t>(levels.def).subspan(begin, end - begin),
        bits.def_bits));
  }
  ValueStream slice = view.Values(begin, end);
  CompressedBuffer encoded = codecs::EncodeWith(slice, desc);
  if (NeedsLengthBuffer(desc)) {
    std::vector<uint8_t> lengths;
    for (uint64_t v = 0; v < encoded.value_count; v++) {
      le::AppendUnsigned(&lengths, encoded.ExtentOf(v).length, lengths_width);
    }
    buffers.push_back(std::move(lengths));
  }
  buffers.push_back(std::move(encoded.bytes));
  return buffers;
}

inline uint64_t PayloadBytes(const std::vector<std::vector<uint8_t>>& buffers) {
  uint64_t total = 0;
  for (const auto& buffer : buffers) {
    total += buffer.size();
  }
  return total;
}

}  // namespace detail

// Splits a level stream into chunks: each chunk holds the largest
// power-of-two value count (at most 4096) whose unpadded buffer payload fits
// the target, except that a final remainder that fits is kept whole.  Rows
// may split across chunks.
inline MiniBlockPage Encode(const RepDefLevels& levels,
                            const CodecRequest& request,
                            uint64_t payload_target = kDefaultPayloadTarget) {
  MiniBlockPage page;
  page.max_rep = levels.max_rep;
  page.max_def = levels.max_def;
  page.total_values = levels.rep.size();
  page.codec = codecs::Configure(levels.leaf_values, request);

  detail::SliceView view(levels);
  if (detail::NeedsLengthBuffer(page.codec)) {
    CompressedBuffer whole = codecs::EncodeWith(levels.leaf_values, page.codec);
    uint64_t max_length = 0;
    for (uint64_t v = 0; v < whole.value_count; v++) {
      max_length = std::max(max_length, whole.ExtentOf(v).length);
    }
    page.lengths_width =
        static_cast<uint8_t>(bit_util::MinByteWidth(max_length));
  }

  uint64_t total = page.total_values;
  // Entry index of every row start.
  std::vector<uint64_t> marks;
  for (uint64_t e = 0; e < total; e++) {
    if (page.max_rep == 0 || levels.rep[e] == page.max_rep) {
      marks.push_back(e);
    }
  }
  Check(total == 0 || (!marks.empty() && marks[0] == 0), ErrorCode::kInvalid,
        "level stream does not begin with a row start");
  page.total_rows = marks.size();

  uint64_t pos = 0;
  size_t next_mark = 1;  // marks[0] starts row 0 and completes nothing
  uint64_t rows_done = 0;
  uint64_t last_boundary = 0;
  while (pos < total) {
    uint64_t remaining = total - pos;
    std::vector<std::vector<uint8_t>> buffers;
    uint64_t take = 0;
    auto try_count = [&](uint64_t count) {
      auto candidate = detail::ChunkBuffers(levels, view, page.codec,
                                            page.lengths_width, pos,
                                            pos + count);
      uint64_t body = 2 + 2 * candidate.size();
      for (const auto& buffer : candidate) {
        body = bit_util::AlignUp(body, 8) + buffer.size();
      }
      body = bit_util::AlignUp(body, 8);
      if (body / 8 > kMaxChunkWords) {
        return false;
      }
      if (count > 1 && detail::PayloadBytes(candidate) > payload_target) {
        return false;
      }
      buffers = std::move(candidate);
      take = count;
      return true;
    };

    bool placed = false;
    if (remaining <= kMaxChunkValues) {
      // Final-chunk exemption: a remainder that fits is kept whole even when
      // it is not a power of two.
      auto candidate = detail::ChunkBuffers(levels, view, page.codec,
                                            page.lengths_width, pos,
                                            pos + remaining);
      uint64_t body = 2 + 2 * candidate.size();
      for (const auto& buffer : candidate) {
        body = bit_util::AlignUp(body, 8) + buffer.size();
      }
      body = bit_util::AlignUp(body, 8);
      if (body / 8 <= kMaxChunkWords &&
          detail::PayloadBytes(candidate) <= payload_target) {
        buffers = std::move(candidate);
        take = remaining;
        placed = true;
      }
    }
    if (!placed) {
      for (uint64_t count = kMaxChunkValues; count >= 1; count /= 2) {
        if (count > remaining) {
          continue;
        }
        if (try_count(count)) {
          placed = true;
          break;
        }
      }
    }
    Check(placed, ErrorCode::kRouting,
          "a single value exceeds the miniblock chunk budget; the column "
          "should have been routed to full-zip");

    std::vector<uint8_t> body = SerializeChunkBody(buffers);
    ChunkInfo info;
    info.offset = page.data.size();
    info.meta_word = EncodeChunkMetaRounded(take, body.size());
    info.value_count = take;
    uint64_t end = pos + take;
    // A row completes in this chunk when its last entry lies here, i.e. the
    // next row's mark falls in (pos, end]; the final row completes at stream
    // end.
    while (next_mark < marks.size() && marks[next_mark] <= end) {
      info.rows_completed++;
      rows_done++;
      last_boundary = marks[next_mark];
      next_mark++;
    }
    if (end == total) {
      info.rows_completed++;
      rows_done++;
      info.trailing_items = 0;
    } else {
      info.trailing_items = end - last_boundary;
    }
    info.cum_values = end;
    info.cum_rows = rows_done;
    page.data.insert(page.data.end(), body.begin(), body.end());
    page.chunks.push_back(info);
    pos = end;
  }
  return page;
}

// Decodes one chunk body back into its slice of the level stream.
inline RepDefLevels DecodeChunk(const MiniBlockPage& page, uint64_t chunk_index,
                                std::span<const uint8_t> body) {
  const ChunkInfo& info = page.chunks[chunk_index];
  uint64_t meta_values = 0;
  uint64_t meta_bytes = 0;
  DecodeChunkMeta(info.meta_word, &meta_values, &meta_bytes);
  Check(meta_bytes == body.size(), ErrorCode::kCorrupt,
        "chunk body length disagrees with meta word");
  auto buffers = ParseChunkBody(body);

  RepDefLevels out;
  out.max_rep = page.max_rep;
  out.max_def = page.max_def;
  int rep_bits = bit_util::BitLength(page.max_rep);
  int def_bits = bit_util::BitLength(page.max_def);
  size_t expected =
      (rep_bits > 0 ? 1 : 0) + (def_bits > 0 ? 1 : 0) +
      (detail::NeedsLengthBuffer(page.codec) ? 2 : 1);
  Check(buffers.size() == expected, ErrorCode::kCorrupt,
        "chunk buffer count inconsistent with page codec");

  uint64_t count = info.value_count;
  size_t next = 0;
  if (rep_bits > 0) {
    auto rep_buffer = buffers[next++];
    Check(rep_buffer.size() == bit_util::CeilDiv(count * rep_bits, 8),
          ErrorCode::kCorrupt, "repetition buffer size mismatch");
    for (uint64_t i = 0; i < count; i++) {
      out.rep.push_back(
          static_cast<uint16_t>(ReadPackedBits(rep_buffer, rep_bits, i)));
    }
  } else {
    out.rep.assign(count, 0);
  }
  if (def_bits > 0) {
    auto def_buffer = buffers[next++];
    Check(def_buffer.size() == bit_util::CeilDiv(count * def_bits, 8),
          ErrorCode::kCorrupt, "definition buffer size mismatch");
    for (uint64_t i = 0; i < count; i++) {
      out.def.push_back(
          static_cast<uint16_t>(ReadPackedBits(def_buffer, def_bits, i)));
    }
  } else {
    out.def.assign(count, 0);
  }
  uint64_t valid = 0;
  for (uint16_t d : out.def) {
    if (d == 0) valid++;
  }

  CompressedBuffer compressed;
  compressed.descriptor = page.codec;
  compressed.value_count = valid;
  if (detail::NeedsLengthBuffer(page.codec)) {
    auto lengths = buffers[next++];
    Check(lengths.size() == valid * page.lengths_width, ErrorCode::kCorrupt,
          "length buffer size mismatch");
    for (uint64_t v = 0; v < valid; v++) {
      compressed.extent_lengths.push_back(le::LoadUnsigned(
          lengths.data() + v * page.lengths_width, page.lengths_width));
    }
  }
  auto data = buffers[next++];
  compressed.bytes.assign(data.begin(), data.end());
  out.leaf_values = codecs::Decode(compressed);
  return out;
}

inline std::span<const uint8_t> ChunkBody(const MiniBlockPage& page,
                                          uint64_t chunk_index) {
  const ChunkInfo& info = page.chunks[chunk_index];
  return std::span<const uint8_t>(page.data)
      .subspan(info.offset, info.BodyBytes());
}

// --- Random access through the warm cache (no I/O) ---

struct ChunkRange {
  uint64_t first = 0;
  uint64_t last = 0;  // inclusive
};

// Maps a row to the chunks holding its entries.  Flat columns binary-search
// the cumulative value counts; list columns walk the per-chunk repetition
// index, returning both chunks when a row splits across a boundary.
inline ChunkRange LocateRow(const MiniBlockPage& page, uint64_t row) {
  Check(row < page.total_rows, ErrorCode::kOutOfRange, "row out of range");
  const auto& chunks = page.chunks;
  if (!page.HasRepIndex()) {
    uint64_t lo = 0;
    uint64_t hi = chunks.size() - 1;
    while (lo < hi) {
      uint64_t mid = (lo + hi) / 2;
      if (chunks[mid].cum_values >= row + 1) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return {lo, lo};
  }
  auto first_with_rows = [&](uint64_t target) {
    uint64_t lo = 0;
    uint64_t hi = chunks.size() - 1;
    while (lo < hi) {
      uint64_t mid = (lo + hi) / 2;
      if (chunks[mid].cum_rows >= target) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  };
  uint64_t complete_chunk = first_with_rows(row + 1);
  uint64_t start_chunk = 0;
  if (row > 0) {
    uint64_t c0 = first_with_rows(row);
    if (chunks[c0].cum_rows >= row + 1) {
      start_chunk = c0;
    } else {
      start_chunk = chunks[c0].trailing_items > 0 ? c0 : c0 + 1;
    }
  }
  return {start_chunk, complete_chunk};
}

// Index of the row started by the first row boundary inside chunk `c`.
inline uint64_t FirstBoundaryRow(const MiniBlockPage& page, uint64_t c) {
  if (c == 0) {
    return 0;
  }
  const ChunkInfo& prev = page.chunks[c - 1];
  return prev.cum_rows + (prev.trailing_items > 0 ? 1 : 0);
}

// Concatenates decoded chunks [first, last].
inline RepDefLevels DecodeChunkSpan(
    const MiniBlockPage& page, uint64_t first, uint64_t last,
    const std::vector<RepDefLevels>& decoded_chunks) {
  RepDefLevels out;
  out.max_rep = page.max_rep;
  out.max_def = page.max_def;
  out.leaf_values.fixed_width = page.codec.values_fixed;
  out.leaf_values.width = page.codec.value_width;
  for (uint64_t c = first; c <= last; c++) {
    const RepDefLevels& chunk = decoded_chunks[c - first];
    out.rep.insert(out.rep.end(), chunk.rep.begin(), chunk.rep.end());
    out.def.insert(out.def.end(), chunk.def.begin(), chunk.def.end());
    out.leaf_values.bytes.insert(out.leaf_values.bytes.end(),
                                 chunk.leaf_values.bytes.begin(),
                                 chunk.leaf_values.bytes.end());
    if (!out.leaf_values.fixed_width) {
      out.leaf_values.lengths.insert(out.leaf_values.lengths.end(),
                                     chunk.leaf_values.lengths.begin(),
                                     chunk.leaf_values.lengths.end());
    }
  }
  return out;
}

// Cuts rows [row_begin, row_end) out of a fragment decoded from chunks
// [first_chunk, ...]; the fragment may begin and end mid-row.
inline RepDefLevels SliceRows(const MiniBlockPage& page, uint64_t first_chunk,
                              const RepDefLevels& fragment, uint64_t row_begin,
                              uint64_t row_end) {
  uint64_t entry_begin = 0;
  uint64_t entry_end = fragment.rep.size();
  if (!page.HasRepIndex()) {
    uint64_t base =
        first_chunk == 0 ? 0 : page.chunks[first_chunk - 1].cum_values;
    entry_begin = row_begin - base;
    entry_end = row_end - base;
  } else {
    uint64_t first_row = FirstBoundaryRow(page, first_chunk);
    Check(row_begin >= first_row, ErrorCode::kCorrupt,
          "fragment does not cover requested rows");
    uint64_t boundary = 0;
    std::optional<uint64_t> begin_at;
    std::optional<uint64_t> end_at;
    for (uint64_t e = 0; e < fragment.rep.size(); e++) {
      if (fragment.rep[e] == page.max_rep) {
        uint64_t row = first_row + boundary;
        if (row == row_begin && !begin_at.has_value()) {
          begin_at = e;
        }
        if (row == row_end) {
          end_at = e;
          break;
        }
        boundary++;
      }
    }
    Check(begin_at.has_value(), ErrorCode::kCorrupt,
          "row start not present in decoded fragment");
    entry_begin = *begin_at;
    entry_end = end_at.value_or(fragment.rep.size());
  }

  RepDefLevels out;
  out.max_rep = fragment.max_rep;
  out.max_def = fragment.max_def;
  out.rep.assign(fragment.rep.begin() + entry_begin,
                 fragment.rep.begin() + entry_end);
  out.def.assign(fragment.def.begin() + entry_begin,
                 fragment.def.begin() + entry_end);
  out.leaf_values.fixed_width = fragment.leaf_values.fixed_width;
  out.leaf_values.width = fragment.leaf_values.width;
  uint64_t skip = 0;
  for (uint64_t e = 0; e < entry_begin; e++) {
    if (fragment.def[e] == 0) skip++;
  }
  uint64_t take = 0;
  for (uint64_t e = entry_begin; e < entry_end; e++) {
    if (fragment.def[e] == 0) take++;
  }
  uint64_t byte_from = fragment.leaf_values.OffsetOf(skip);
  uint64_t byte_to = byte_from;
  for (uint64_t v = 0; v < take; v++) {
    byte_to += fragment.leaf_values.LengthOf(skip + v);
  }
  out.leaf_values.bytes.assign(fragment.leaf_values.bytes.begin() + byte_from,
                               fragment.leaf_values.bytes.begin() + byte_to);
  if (!fragment.leaf_values.fixed_width) {
    out.leaf_values.lengths.assign(
        fragment.leaf_values.lengths.begin() + skip,
        fragment.leaf_values.lengths.begin() + skip + take);
  }
  return out;
}

// --- Search cache accounting ---

// In-memory bytes per chunk entry: offset (8) + meta word (2) + cumulative
// item count (8), plus the two repetition-index integers when present.
inline uint64_t InMemoryCacheBytesPerChunk(bool has_rep_index) {
  return 8 + 2 + 8 + (has_rep_index ? 16 : 0);
}

// On-disk search-cache payload: what open_file reads to warm the cache.
inline uint64_t CachePayloadBytes(uint64_t chunk_count, bool has_rep_index,
                                  uint8_t rep_int_width,
                                  uint64_t codec_aux_bytes) {
  uint64_t per_chunk = 2 + (has_rep_index ? 2ULL * rep_int_width : 0);
  return chunk_count * per_chunk + codec_aux_bytes;
}

}  // namespace miniblock

using MiniBlockPage = miniblock::MiniBlockPage;
using MiniBlockChunkInfo = miniblock::ChunkInfo;

}  // namespace zipcol
