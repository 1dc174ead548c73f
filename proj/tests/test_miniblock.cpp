// SPDX-License-Identifier: Apache-2.0

#include "zipcol/miniblock.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "testing.hpp"

using namespace zipcol;

namespace {

MiniBlockPage EncodeArray(const LogicalArray& a, CodecRequest request,
                          uint64_t target, RepDefLevels* levels_out = nullptr) {
  auto levels = Shred(a);
  REQUIRE(levels.size() == 1);
  if (levels_out != nullptr) {
    *levels_out = levels[0];
  }
  return miniblock::Encode(levels[0], request, target);
}

RepDefLevels DecodeAll(const MiniBlockPage& page) {
  std::vector<RepDefLevels> decoded;
  for (uint64_t c = 0; c < page.chunks.size(); c++) {
    decoded.push_back(
        miniblock::DecodeChunk(page, c, miniblock::ChunkBody(page, c)));
  }
  if (page.chunks.empty()) {
    RepDefLevels empty;
    empty.max_rep = page.max_rep;
    empty.max_def = page.max_def;
    empty.leaf_values.fixed_width = page.codec.values_fixed;
    empty.leaf_values.width = page.codec.value_width;
    return empty;
  }
  return miniblock::DecodeChunkSpan(page, 0, page.chunks.size() - 1, decoded);
}

}  // namespace

TEST_CASE("chunk meta word layout", "[miniblock]") {
  CHECK(miniblock::EncodeChunkMeta(256, 2048) == 0x8100);
  CHECK(miniblock::EncodeChunkMeta(1, 8) == 0x0001);
  // 32,768 bytes would need a 13-bit word count; the valid maximum is 4095
  // words (32,760 bytes).
  CHECK_THROWS_AS(miniblock::EncodeChunkMeta(4096, 32768), Error);
  CHECK(miniblock::EncodeChunkMeta(4096, 32760) == 0xCFFF);
}

TEST_CASE("chunk meta word is bijective over the valid domain", "[miniblock]") {
  for (int log2 = 0; log2 <= 12; log2++) {
    uint64_t values = uint64_t{1} << log2;
    for (uint64_t words = 1; words <= 4095; words++) {
      uint16_t word = miniblock::EncodeChunkMeta(values, words * 8);
      uint64_t out_values = 0;
      uint64_t out_bytes = 0;
      miniblock::DecodeChunkMeta(word, &out_values, &out_bytes);
      REQUIRE(out_values == values);
      REQUIRE(out_bytes == words * 8);
    }
  }
}

TEST_CASE("the 248-string chunk lays out as three buffers", "[miniblock]") {
  // 248 nullable strings carrying 4,957 bytes of data: definition bitmap of
  // 31 bytes, one-byte lengths, then the data bytes.
  std::vector<std::string> strings;
  std::vector<bool> valid(248, true);
  for (int i = 0; i < 247; i++) {
    strings.push_back(std::string(20, static_cast<char>('a' + i % 26)));
  }
  strings.push_back(std::string(4957 - 247 * 20, 'z'));
  LogicalArray a = array::FromStrings(strings, valid);
  REQUIRE(a.values.size() == 4957);

  MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 8192);
  REQUIRE(page.chunks.size() == 1);
  CHECK(page.chunks[0].value_count == 248);
  CHECK(page.lengths_width == 1);

  auto body = miniblock::ChunkBody(page, 0);
  CHECK(le::Load<uint16_t>(body.data()) == 3);
  CHECK(le::Load<uint16_t>(body.data() + 2) == 31);    // def bitmap
  CHECK(le::Load<uint16_t>(body.data() + 4) == 248);   // lengths
  CHECK(le::Load<uint16_t>(body.data() + 6) == 4957);  // data
  CHECK(body.size() == 5248);
  CHECK(body.size() % 8 == 0);

  // Every buffer starts 8-byte aligned.
  auto buffers = miniblock::ParseChunkBody(body);
  for (const auto& buffer : buffers) {
    CHECK((buffer.data() - body.data()) % 8 == 0);
  }

  // Bit-exact round trip of the serialized body.
  auto reserialized = miniblock::SerializeChunkBody(
      {std::vector<uint8_t>(buffers[0].begin(), buffers[0].end()),
       std::vector<uint8_t>(buffers[1].begin(), buffers[1].end()),
       std::vector<uint8_t>(buffers[2].begin(), buffers[2].end())});
  CHECK(std::equal(reserialized.begin(), reserialized.end(), body.begin(),
                   body.end()));

  RepDefLevels back = DecodeAll(page);
  CHECK(array::Equals(Unshred(back, a.dtype), a));
}

TEST_CASE("chunking rule on 10,000 uint64 values with a 4 KiB target",
          "[miniblock]") {
  std::vector<uint64_t> values(10000);
  for (size_t i = 0; i < values.size(); i++) {
    values[i] = i * 31;
  }
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, values);
  MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 4096);
  REQUIRE(page.chunks.size() == 20);
  for (size_t c = 0; c + 1 < page.chunks.size(); c++) {
    CHECK(page.chunks[c].value_count == 512);
  }
  CHECK(page.chunks.back().value_count == 272);
  RepDefLevels back = DecodeAll(page);
  CHECK(array::Equals(Unshred(back, a.dtype), a));
}

TEST_CASE("zero values produce zero chunks", "[miniblock]") {
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, {});
  MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 8192);
  CHECK(page.chunks.empty());
  CHECK(page.data.empty());
}

TEST_CASE("flat locate is cumulative-count arithmetic", "[miniblock]") {
  std::vector<uint64_t> values(2000, 7);
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, values);
  MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 4096);
  REQUIRE(page.chunks[0].value_count == 512);
  auto range = miniblock::LocateRow(page, 1000);
  CHECK(range.first == 1);
  CHECK(range.last == 1);
  CHECK(1000 - page.chunks[0].cum_values == 488);
  CHECK_THROWS_AS(miniblock::LocateRow(page, 2000), Error);
}

TEST_CASE("list locate matches a brute-force entry scan", "[miniblock]") {
  testing::Rng rng(9401);
  for (int round = 0; round < 25; round++) {
    DataType dtype = DataType::List(DataType::Utf8(true), true);
    uint64_t n = testing::RandomInt(rng, 1, 400);
    LogicalArray a = testing::RandomArray(dtype, n, 0.2, rng);
    RepDefLevels levels;
    // Small target so rows frequently split across chunks.
    MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 96,
                                     &levels);
    REQUIRE(page.total_rows == n);

    // Brute force: row r covers entries [mark_r, mark_{r+1}).
    std::vector<uint64_t> marks;
    for (uint64_t e = 0; e < levels.rep.size(); e++) {
      if (levels.rep[e] == levels.max_rep) {
        marks.push_back(e);
      }
    }
    marks.push_back(levels.rep.size());
    auto chunk_of = [&](uint64_t entry) {
      uint64_t c = 0;
      while (page.chunks[c].cum_values <= entry) c++;
      return c;
    };
    for (uint64_t r = 0; r < n; r++) {
      auto range = miniblock::LocateRow(page, r);
      uint64_t expect_first = chunk_of(marks[r]);
      uint64_t expect_last = chunk_of(marks[r + 1] - 1);
      REQUIRE(range.first == expect_first);
      REQUIRE(range.last == expect_last);
    }
  }
}

TEST_CASE("rows split across chunks reassemble through the rep index",
          "[miniblock]") {
  testing::Rng rng(9402);
  for (int round = 0; round < 20; round++) {
    DataType dtype = DataType::List(DataType::Primitive(Kind::kUInt32, true),
                                    true);
    uint64_t n = testing::RandomInt(rng, 1, 200);
    LogicalArray a = testing::RandomArray(dtype, n, 0.25, rng);
    MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 64);
    for (uint64_t r = 0; r < n; r++) {
      auto range = miniblock::LocateRow(page, r);
      std::vector<RepDefLevels> decoded;
      for (uint64_t c = range.first; c <= range.last; c++) {
        decoded.push_back(
            miniblock::DecodeChunk(page, c, miniblock::ChunkBody(page, c)));
      }
      RepDefLevels fragment =
          miniblock::DecodeChunkSpan(page, range.first, range.last, decoded);
      RepDefLevels row =
          miniblock::SliceRows(page, range.first, fragment, r, r + 1);
      REQUIRE(array::Equals(Unshred(row, dtype), array::Slice(a, r, 1)));
    }
  }
}

TEST_CASE("round trips across codecs and shapes", "[miniblock]") {
  testing::Rng rng(9403);
  const std::vector<CodecRequest> requests = {
      {CodecId::kPassthrough, 0},
      {CodecId::kBitPack, 0},
      {CodecId::kDictionary, 0},
      {CodecId::kPerValueBlock, kBlockRle},
      {CodecId::kChunkedBlock, kBlockRle},
  };
  for (int round = 0; round < 50; round++) {
    const CodecRequest& request = requests[round % requests.size()];
    DataType dtype;
    if (request.id == CodecId::kBitPack) {
      dtype = DataType::Primitive(Kind::kUInt32, true);
    } else {
      dtype = round % 2 == 0
                  ? DataType::List(DataType::Utf8(true), true)
                  : DataType::Primitive(Kind::kUInt16, true);
    }
    uint64_t n = testing::RandomInt(rng, 0, 600);
    LogicalArray a = testing::RandomArray(dtype, n, 0.15, rng);
    MiniBlockPage page = EncodeArray(a, request, 1024);
    RepDefLevels back = DecodeAll(page);
    REQUIRE(array::Equals(Unshred(back, dtype), a));
  }
}

TEST_CASE("corrupt chunk bodies are rejected", "[miniblock]") {
  std::vector<uint64_t> values(100, 3);
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, values);
  MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 8192);
  auto body = miniblock::ChunkBody(page, 0);
  std::vector<uint8_t> bad(body.begin(), body.end());
  bad[0] = 9;  // claim nine buffers
  CHECK_THROWS_AS(miniblock::DecodeChunk(page, 0, bad), Error);
  CHECK_THROWS_AS(
      miniblock::DecodeChunk(page, 0, std::span<const uint8_t>(bad).first(4)),
      Error);
}

TEST_CASE("chunks keep at least 32 values for small value widths",
          "[miniblock]") {
  testing::Rng rng(9404);
  // Values at the 128-byte routing boundary and below.
  for (uint64_t width : {8, 32, 128}) {
    std::vector<std::string> strings;
    for (int i = 0; i < 2000; i++) {
      strings.push_back(std::string(width, static_cast<char>('a' + i % 26)));
    }
    LogicalArray a = array::FromStrings(strings);
    MiniBlockPage page = EncodeArray(a, {CodecId::kPassthrough, 0}, 8192);
    for (const auto& chunk : page.chunks) {
      if (&chunk != &page.chunks.back()) {
        CHECK(chunk.value_count >= 32);
      }
      CHECK(chunk.BodyBytes() <= 32760);
      CHECK(chunk.BodyBytes() / 8 <= 4095);
    }
  }
}

TEST_CASE("search cache accounting", "[miniblock]") {
  CHECK(miniblock::InMemoryCacheBytesPerChunk(false) == 18);
  CHECK(miniblock::InMemoryCacheBytesPerChunk(true) == 34);
  CHECK(miniblock::InMemoryCacheBytesPerChunk(true) <= 48);

  // A flat column of 2^30 rows at the 32-value chunk floor stays within the
  // 1.28 GiB bound of the 24-bytes-per-chunk model.
  uint64_t chunks = (uint64_t{1} << 30) / 32;
  uint64_t in_memory = chunks * 24;
  CHECK(in_memory <= static_cast<uint64_t>(1.28 * (uint64_t{1} << 30)));
  CHECK(chunks * miniblock::InMemoryCacheBytesPerChunk(false) <= in_memory);

  // On-disk payload is 2 bytes per chunk plus the rep-index integers.
  CHECK(miniblock::CachePayloadBytes(100, false, 0, 0) == 200);
  CHECK(miniblock::CachePayloadBytes(100, true, 2, 0) == 600);
}
