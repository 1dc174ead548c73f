// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zipcol/common.hpp"
#include "zipcol/value_stream.hpp"

namespace zipcol {

// Compressive encodings, classified by whether a single value can be
// extracted given its extent (transparent) or whether neighboring values
// must be decompressed too (opaque).  All codecs operate on streams with
// nulls already removed; null slots are restored by the structural layer.
enum class CodecId : uint8_t {
  kPassthrough = 0,
  kBitPack = 1,
  kByteAlignedLengths = 2,
  kDictionary = 3,
  kPerValueBlock = 4,
  kChunkedBlock = 5,
};

enum class Transparency : uint8_t { kTransparent, kOpaque };
enum class Sparsity : uint8_t { kSparse, kDense };

// Block algorithms for PerValueBlock / ChunkedBlock.  Tags 2..255 are
// reserved for production algorithms.
enum BlockAlgorithm : uint8_t {
  kBlockRaw = 0,
  kBlockRle = 1,
};

inline Transparency TransparencyOf(CodecId id) {
  return id == CodecId::kChunkedBlock ? Transparency::kOpaque
                                      : Transparency::kTransparent;
}

inline Sparsity SparsityOf(CodecId /*id*/) {
  // Value streams reach codecs with nulls stripped.
  return Sparsity::kSparse;
}

struct CodecRequest {
  CodecId id = CodecId::kPassthrough;
  uint8_t param = 0;  // bit width / byte width / block algorithm; 0 = auto
};

// Fully configured codec: enough to re-encode any slice of the stream it was
// configured on and to decode buffers produced with it.
struct CodecDescriptor {
  CodecId id = CodecId::kPassthrough;
  uint8_t param = 0;
  bool values_fixed = true;   // shape of the decoded stream
  uint64_t value_width = 0;   // decoded width when fixed
  std::vector<uint8_t> aux;   // dictionary payload (page metadata resident)

  [[nodiscard]] Transparency transparency() const {
    return TransparencyOf(id);
  }
  [[nodiscard]] Sparsity sparsity() const { return SparsityOf(id); }

  // Byte width of each encoded value when uniform (0 when per-value extents
  // must be recorded).
  [[nodiscard]] uint64_t EncodedFixedWidth() const {
    switch (id) {
      case CodecId::kPassthrough:
        return values_fixed ? value_width : 0;
      case CodecId::kBitPack:
        return param % 8 == 0 ? param / 8 : 0;
      case CodecId::kByteAlignedLengths:
      case CodecId::kDictionary:
        return param;
      default:
        return 0;
    }
  }

  bool operator==(const CodecDescriptor& other) const {
    return id == other.id && param == other.param &&
           values_fixed == other.values_fixed &&
           value_width == other.value_width && aux == other.aux;
  }
};

struct CompressedBuffer {
  std::vector<uint8_t> bytes;
  uint64_t value_count = 0;
  CodecDescriptor descriptor;
  // Per-value encoded byte lengths for transparent codecs whose extents are
  // not computable from the descriptor alone.
  std::vector<uint64_t> extent_lengths;

  struct Extent {
    uint64_t offset;
    uint64_t length;
  };

  [[nodiscard]] Extent ExtentOf(uint64_t i) const {
    Check(descriptor.transparency() == Transparency::kTransparent,
          ErrorCode::kUnsupported,
          "per-value extents are undefined for opaque codecs");
    Check(i < value_count, ErrorCode::kOutOfRange, "value index out of range");
    if (descriptor.id == CodecId::kBitPack) {
      uint64_t bit_lo = i * descriptor.param;
      uint64_t bit_hi = (i + 1) * descriptor.param;
      uint64_t byte_lo = bit_lo / 8;
      uint64_t byte_hi = bit_util::CeilDiv(std::max(bit_hi, uint64_t{1}), 8);
      return {byte_lo, byte_hi - byte_lo};
    }
    uint64_t fixed = descriptor.EncodedFixedWidth();
    if (fixed != 0 || extent_lengths.empty()) {
      return {i * fixed, fixed};
    }
    uint64_t offset = 0;
    for (uint64_t j = 0; j < i; j++) {
      offset += extent_lengths[j];
    }
    return {offset, extent_lengths[i]};
  }
};

namespace codecs {

namespace detail {

// --- Block algorithms ---

// Byte-oriented run collapsing: control byte c < 128 starts a literal run of
// c+1 bytes; c >= 128 repeats the following byte (c - 128 + 3) times.
inline void RleCompress(std::span<const uint8_t> in,
                        std::vector<uint8_t>* out) {
  size_t i = 0;
  size_t literal_start = 0;
  size_t literal_len = 0;
  auto flush_literal = [&] {
    while (literal_len > 0) {
      size_t take = std::min<size_t>(literal_len, 128);
      out->push_back(static_cast<uint8_t>(take - 1));
      out->insert(out->end(), in.begin() + literal_start,
                  in.begin() + literal_start + take);
      literal_start += take;
      literal_len -= take;
    }
  };
  while (i < in.size()) {
    size_t run = 1;
    while (i + run < in.size() && in[i + run] == in[i] && run < 130) {
      run++;
    }
    if (run >= 3) {
      flush_literal();
      out->push_back(static_cast<uint8_t>(128 + run - 3));
      out->push_back(in[i]);
      i += run;
      literal_start = i;
    } else {
      literal_len += run;
      i += run;
    }
  }
  flush_literal();
}

inline void RleDecompress(std::span<const uint8_t> in,
                          std::vector<uint8_t>* out) {
  size_t i = 0;
  while (i < in.size()) {
    uint8_t control = in[i++];
    if (control < 128) {
      size_t take = control + 1;
      Check(i + take <= in.size(), ErrorCode::kCorrupt,
            "rle block truncated at offset " + std::to_string(i));
      out->insert(out->end(), in.begin() + i, in.begin() + i + take);
      i += take;
    } else {
      Check(i < in.size(), ErrorCode::kCorrupt,
            "rle block truncated at offset " + std::to_string(i));
      out->insert(out->end(), control - 128 + 3, in[i++]);
    }
  }
}

inline std::vector<uint8_t> BlockCompress(uint8_t algorithm,
                                          std::span<const uint8_t> in) {
  switch (algorithm) {
    case kBlockRaw:
      return {in.begin(), in.end()};
    case kBlockRle: {
      std::vector<uint8_t> out;
      RleCompress(in, &out);
      return out;
    }
    default:
      Raise(ErrorCode::kUnsupported,
            "reserved block algorithm tag " + std::to_string(algorithm));
  }
}

inline std::vector<uint8_t> BlockDecompress(uint8_t algorithm,
                                            std::span<const uint8_t> in) {
  switch (algorithm) {
    case kBlockRaw:
      return {in.begin(), in.end()};
    case kBlockRle: {
      std::vector<uint8_t> out;
      RleDecompress(in, &out);
      return out;
    }
    default:
      Raise(ErrorCode::kUnsupported,
            "reserved block algorithm tag " + std::to_string(algorithm));
  }
}

// --- Fixed-width integer view ---

inline uint64_t ValueAsUnsigned(const ValueStream& values, uint64_t i) {
  Check(values.fixed_width && (values.width == 1 || values.width == 2 ||
                               values.width == 4 || values.width == 8),
        ErrorCode::kInvalid, "codec requires fixed-width integer values");
  return le::LoadUnsigned(values.bytes.data() + i * values.width,
                          static_cast<int>(values.width));
}

// --- Dictionary aux payload ---

inline std::vector<uint8_t> SerializeDictionary(
    const std::vector<std::vector<uint8_t>>& entries) {
  std::vector<uint8_t> out;
  le::Append<uint32_t>(&out, static_cast<uint32_t>(entries.size()));
  for (const auto& entry : entries) {
    le::Append<uint32_t>(&out, static_cast<uint32_t>(entry.size()));
    out.insert(out.end(), entry.begin(), entry.end());
  }
  return out;
}

inline std::vector<std::vector<uint8_t>> ParseDictionary(
    std::span<const uint8_t> aux) {
  le::Reader reader(aux);
  auto count = reader.Read<uint32_t>();
  std::vector<std::vector<uint8_t>> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; i++) {
    auto length = reader.Read<uint32_t>();
    auto bytes = reader.ReadBytes(length);
    entries.emplace_back(bytes.begin(), bytes.end());
  }
  return entries;
}

// Self-contained serialization of a value stream, used as the input of
// chunked (opaque) block compression.
inline std::vector<uint8_t> SerializeStream(const ValueStream& values) {
  std::vector<uint8_t> out;
  out.push_back(values.fixed_width ? 1 : 0);
  if (values.fixed_width) {
    le::Append<uint64_t>(&out, values.width);
  } else {
    le::Append<uint64_t>(&out, values.lengths.size());
    for (uint64_t length : values.lengths) {
      le::Append<uint32_t>(&out, static_cast<uint32_t>(length));
    }
  }
  out.insert(out.end(), values.bytes.begin(), values.bytes.end());
  return out;
}

inline ValueStream ParseStream(std::span<const uint8_t> bytes) {
  le::Reader reader(bytes);
  ValueStream values;
  values.fixed_width = reader.Read<uint8_t>() != 0;
  if (values.fixed_width) {
    values.width = reader.Read<uint64_t>();
  } else {
    auto count = reader.Read<uint64_t>();
    values.lengths.reserve(count);
    for (uint64_t i = 0; i < count; i++) {
      values.lengths.push_back(reader.Read<uint32_t>());
    }
  }
  auto data = reader.ReadBytes(reader.remaining());
  values.bytes.assign(data.begin(), data.end());
  return values;
}

}  // namespace detail

// Computes the page-level codec configuration for a stream (bit widths,
// byte widths, dictionaries).  Re-encoding any slice of the same stream with
// the returned descriptor is stable.
inline CodecDescriptor Configure(const ValueStream& values,
                                 const CodecRequest& request) {
  CodecDescriptor desc;
  desc.id = request.id;
  desc.param = request.param;
  desc.values_fixed = values.fixed_width;
  desc.value_width = values.width;
  switch (request.id) {
    case CodecId::kPassthrough:
      break;
    case CodecId::kBitPack: {
      Check(values.fixed_width, ErrorCode::kInvalid,
            "bit packing requires fixed-width values");
      if (desc.param == 0) {
        uint64_t max_value = 0;
        for (uint64_t i = 0; i < values.Count(); i++) {
          max_value = std::max(max_value, detail::ValueAsUnsigned(values, i));
        }
        desc.param = static_cast<uint8_t>(
            std::max(1, bit_util::BitLength(max_value)));
      }
      break;
    }
    case CodecId::kByteAlignedLengths: {
      if (desc.param == 0) {
        uint64_t max_value = 0;
        for (uint64_t i = 0; i < values.Count(); i++) {
          max_value = std::max(max_value, detail::ValueAsUnsigned(values, i));
        }
        desc.param = static_cast<uint8_t>(bit_util::MinByteWidth(max_value));
      }
      Check(desc.param >= 1 && desc.param <= 8, ErrorCode::kInvalid,
            "byte-aligned width must be 1..8");
      break;
    }
    case CodecId::kDictionary: {
      std::vector<std::vector<uint8_t>> entries;
      std::map<std::vector<uint8_t>, uint64_t> seen;
      for (uint64_t i = 0; i < values.Count(); i++) {
        auto value = values.ValueAt(i);
        std::vector<uint8_t> key(value.begin(), value.end());
        if (seen.emplace(key, entries.size()).second) {
          entries.push_back(std::move(key));
        }
      }
      desc.aux = detail::SerializeDictionary(entries);
      uint64_t max_index = entries.empty() ? 0 : entries.size() - 1;
      desc.param = static_cast<uint8_t>(bit_util::MinByteWidth(max_index));
      break;
    }
    case CodecId::kPerValueBlock:
    case CodecId::kChunkedBlock:
      detail::BlockCompress(desc.param, {});  // validates the algorithm tag
      break;
  }
  return desc;
}

// Encodes a stream with an already configured descriptor.
inline CompressedBuffer EncodeWith(const ValueStream& values,
                                   const CodecDescriptor& desc) {
  CompressedBuffer out;
  out.descriptor = desc;
  out.value_count = values.Count();
  switch (desc.id) {
    case CodecId::kPassthrough: {
      out.bytes = values.bytes;
      if (!values.fixed_width) {
        out.extent_lengths = values.lengths;
      }
      break;
    }
    case CodecId::kBitPack: {
      BitWriter writer(desc.param);
      for (uint64_t i = 0; i < values.Count(); i++) {
        uint64_t v = detail::ValueAsUnsigned(values, i);
        Check(bit_util::BitLength(v) <= desc.param, ErrorCode::kInvalid,
              "value does not fit in configured bit width");
        writer.Write(v);
      }
      out.bytes = writer.TakeBytes();
      break;
    }
    case CodecId::kByteAlignedLengths: {
      for (uint64_t i = 0; i < values.Count(); i++) {
        uint64_t v = detail::ValueAsUnsigned(values, i);
        Check(bit_util::MinByteWidth(v) <= desc.param, ErrorCode::kInvalid,
              "length does not fit in configured byte width");
        le::AppendUnsigned(&out.bytes, v, desc.param);
      }
      break;
    }
    case CodecId::kDictionary: {
      auto entries = detail::ParseDictionary(desc.aux);
      std::map<std::vector<uint8_t>, uint64_t> index;
      for (size_t i = 0; i < entries.size(); i++) {
        index.emplace(entries[i], i);
      }
      for (uint64_t i = 0; i < values.Count(); i++) {
        auto value = values.ValueAt(i);
        auto it = index.find(std::vector<uint8_t>(value.begin(), value.end()));
        Check(it != index.end(), ErrorCode::kInvalid,
              "value missing from configured dictionary");
        le::AppendUnsigned(&out.bytes, it->second, desc.param);
      }
      break;
    }
    case CodecId::kPerValueBlock: {
      for (uint64_t i = 0; i < values.Count(); i++) {
        auto compressed = detail::BlockCompress(desc.param, values.ValueAt(i));
        out.extent_lengths.push_back(compressed.size());
        out.bytes.insert(out.bytes.end(), compressed.begin(),
                         compressed.end());
      }
      break;
    }
    case CodecId::kChunkedBlock: {
      auto serialized = detail::SerializeStream(values);
      le::Append<uint64_t>(&out.bytes, serialized.size());
      auto compressed = detail::BlockCompress(desc.param, serialized);
      out.bytes.insert(out.bytes.end(), compressed.begin(), compressed.end());
      break;
    }
  }
  return out;
}

inline CompressedBuffer Encode(const ValueStream& values,
                               const CodecRequest& request) {
  return EncodeWith(values, Configure(values, request));
}

inline ValueStream Decode(const CompressedBuffer& buf) {
  const CodecDescriptor& desc = buf.descriptor;
  ValueStream out;
  out.fixed_width = desc.values_fixed;
  out.width = desc.value_width;
  switch (desc.id) {
    case CodecId::kPassthrough: {
      out.bytes = buf.bytes;
      if (!desc.values_fixed) {
        out.lengths = buf.extent_lengths;
        uint64_t total = 0;
        for (uint64_t length : out.lengths) {
          total += length;
        }
        Check(total == out.bytes.size(), ErrorCode::kCorrupt,
              "passthrough extents disagree with buffer size");
      } else {
        Check(desc.value_width == 0 ||
                  buf.bytes.size() == buf.value_count * desc.value_width,
              ErrorCode::kCorrupt, "passthrough buffer size mismatch");
      }
      break;
    }
    case CodecId::kBitPack: {
      uint64_t need = bit_util::CeilDiv(buf.value_count * desc.param, 8);
      Check(buf.bytes.size() >= need, ErrorCode::kCorrupt,
            "bit-packed buffer truncated: need " + std::to_string(need) +
                " bytes at offset " + std::to_string(buf.bytes.size()));
      for (uint64_t i = 0; i < buf.value_count; i++) {
        uint64_t v = ReadPackedBits(buf.bytes, desc.param, i);
        le::AppendUnsigned(&out.bytes, v, static_cast<int>(desc.value_width));
      }
      break;
    }
    case CodecId::kByteAlignedLengths: {
      Check(buf.bytes.size() >= buf.value_count * desc.param,
            ErrorCode::kCorrupt, "length buffer truncated");
      for (uint64_t i = 0; i < buf.value_count; i++) {
        uint64_t v =
            le::LoadUnsigned(buf.bytes.data() + i * desc.param, desc.param);
        le::AppendUnsigned(&out.bytes, v, static_cast<int>(desc.value_width));
      }
      break;
    }
    case CodecId::kDictionary: {
      auto entries = detail::ParseDictionary(desc.aux);
      Check(buf.bytes.size() >= buf.value_count * desc.param,
            ErrorCode::kCorrupt, "dictionary index buffer truncated");
      for (uint64_t i = 0; i < buf.value_count; i++) {
        uint64_t index =
            le::LoadUnsigned(buf.bytes.data() + i * desc.param, desc.param);
        Check(index < entries.size(), ErrorCode::kCorrupt,
              "dictionary index out of range at offset " +
                  std::to_string(i * desc.param));
        out.Append(entries[index]);
      }
      break;
    }
    case CodecId::kPerValueBlock: {
      Check(buf.extent_lengths.size() == buf.value_count, ErrorCode::kCorrupt,
            "per-value block extents missing");
      uint64_t offset = 0;
      for (uint64_t i = 0; i < buf.value_count; i++) {
        uint64_t length = buf.extent_lengths[i];
        Check(offset + length <= buf.bytes.size(), ErrorCode::kCorrupt,
              "per-value block truncated at offset " + std::to_string(offset));
        auto value = detail::BlockDecompress(
            desc.param,
            std::span<const uint8_t>(buf.bytes).subspan(offset, length));
        if (desc.values_fixed) {
          Check(value.size() == desc.value_width, ErrorCode::kCorrupt,
                "per-value block decoded to wrong width");
        }
        out.Append(value);
        offset += length;
      }
      break;
    }
    case CodecId::kChunkedBlock: {
      Check(buf.bytes.size() >= 8, ErrorCode::kCorrupt,
            "chunked block truncated");
      uint64_t raw_length = le::Load<uint64_t>(buf.bytes.data());
      auto raw = detail::BlockDecompress(
          desc.param, std::span<const uint8_t>(buf.bytes).subspan(8));
      Check(raw.size() == raw_length, ErrorCode::kCorrupt,
            "chunked block decoded to wrong size");
      out = detail::ParseStream(raw);
      Check(out.Count() == buf.value_count, ErrorCode::kCorrupt,
            "chunked block value count mismatch");
      break;
    }
  }
  return out;
}

// Extracts a single value.  Only legal for transparent codecs; reads exactly
// the advertised extent of value i.
inline std::vector<uint8_t> DecodeOne(const CompressedBuffer& buf,
                                      uint64_t i) {
  Check(buf.descriptor.transparency() == Transparency::kTransparent,
        ErrorCode::kUnsupported,
        "decode of a single value is impossible for opaque codecs");
  auto extent = buf.ExtentOf(i);
  Check(extent.offset + extent.length <= buf.bytes.size(), ErrorCode::kCorrupt,
        "extent out of bounds");
  std::span<const uint8_t> slice =
      std::span<const uint8_t>(buf.bytes).subspan(extent.offset,
                                                  extent.length);
  const CodecDescriptor& desc = buf.descriptor;
  switch (desc.id) {
    case CodecId::kPassthrough:
      return {slice.begin(), slice.end()};
    case CodecId::kBitPack: {
      uint64_t bit_lo = i * desc.param - extent.offset * 8;
      uint64_t v = 0;
      for (int b = 0; b < desc.param; b++) {
        uint64_t pos = bit_lo + b;
        if ((slice[pos / 8] >> (pos % 8)) & 1) {
          v |= uint64_t{1} << b;
        }
      }
      std::vector<uint8_t> out;
      le::AppendUnsigned(&out, v, static_cast<int>(desc.value_width));
      return out;
    }
    case CodecId::kByteAlignedLengths: {
      uint64_t v = le::LoadUnsigned(slice.data(), desc.param);
      std::vector<uint8_t> out;
      le::AppendUnsigned(&out, v, static_cast<int>(desc.value_width));
      return out;
    }
    case CodecId::kDictionary: {
      auto entries = detail::ParseDictionary(desc.aux);
      uint64_t index = le::LoadUnsigned(slice.data(), desc.param);
      Check(index < entries.size(), ErrorCode::kCorrupt,
            "dictionary index out of range");
      return entries[index];
    }
    case CodecId::kPerValueBlock:
      return detail::BlockDecompress(desc.param, slice);
    case CodecId::kChunkedBlock:
      break;
  }
  Raise(ErrorCode::kUnsupported, "unreachable");
}

// --- Descriptor serialization (1 tag byte + parameter bytes) ---

inline void SerializeDescriptor(const CodecDescriptor& desc,
                                std::vector<uint8_t>* out) {
  out->push_back(static_cast<uint8_t>(desc.id));
  out->push_back(desc.param);
  out->push_back(desc.values_fixed ? 1 : 0);
  le::Append<uint64_t>(out, desc.value_width);
  le::Append<uint32_t>(out, static_cast<uint32_t>(desc.aux.size()));
  out->insert(out->end(), desc.aux.begin(), desc.aux.end());
}

inline CodecDescriptor ParseDescriptor(le::Reader* reader) {
  CodecDescriptor desc;
  auto id = reader->Read<uint8_t>();
  Check(id <= static_cast<uint8_t>(CodecId::kChunkedBlock),
        ErrorCode::kCorrupt, "bad codec tag");
  desc.id = static_cast<CodecId>(id);
  desc.param = reader->Read<uint8_t>();
  desc.values_fixed = reader->Read<uint8_t>() != 0;
  desc.value_width = reader->Read<uint64_t>();
  auto aux_length = reader->Read<uint32_t>();
  auto aux = reader->ReadBytes(aux_length);
  desc.aux.assign(aux.begin(), aux.end());
  return desc;
}

}  // namespace codecs

}  // namespace zipcol
