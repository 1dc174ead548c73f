// SPDX-License-Identifier: Apache-2.0

#include "zipcol/file_reader.hpp"
#include "zipcol/file_writer.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "testing.hpp"

using namespace zipcol;
using file::FileReader;
using file::WriteFile;
using file::WriteOptions;

namespace {

std::shared_ptr<FileReader> OpenBytes(std::vector<uint8_t> bytes,
                                      CoalescePolicy policy =
                                          CoalescePolicy::Disabled()) {
  auto storage = std::make_shared<Storage>(
      std::make_shared<MemorySource>(std::move(bytes)));
  return FileReader::Open(storage, policy);
}

LogicalArray VectorColumn(uint64_t rows, testing::Rng& rng) {
  std::vector<float> values(rows * 768);
  for (auto& v : values) {
    v = static_cast<float>(testing::RandomInt(rng, 0, 1000)) / 7.0F;
  }
  return array::FixedSizeListOf(
      array::FromValues<float>(Kind::kFloat32, values), 768);
}

}  // namespace

TEST_CASE("encoding selection threshold", "[file]") {
  CHECK(file::SelectEncoding(8.0) == PageEncoding::kMiniBlock);
  CHECK(file::SelectEncoding(3072.0) == PageEncoding::kFullZip);
  // The tie routes to full-zip.
  CHECK(file::SelectEncoding(128.0) == PageEncoding::kFullZip);
  CHECK(file::SelectEncoding(127.999) == PageEncoding::kMiniBlock);
}

TEST_CASE("single miniblock column round trips", "[file]") {
  testing::Rng rng(11001);
  std::vector<uint64_t> values(100000);
  for (auto& v : values) {
    v = testing::RandomInt(rng, 0, 1u << 30);
  }
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, values);
  auto result = WriteFile({{"ints", a}});
  REQUIRE(result.report.columns[0].leaves[0].pages[0].encoding ==
          PageEncoding::kMiniBlock);
  auto reader = OpenBytes(result.bytes);
  CHECK(reader->row_count() == a.length);
  CHECK(array::Equals(reader->ReadColumn("ints"), a));
}

TEST_CASE("empty file has a valid footer and zero pages", "[file]") {
  SECTION("no columns") {
    auto result = WriteFile({});
    auto reader = OpenBytes(result.bytes);
    CHECK(reader->row_count() == 0);
    CHECK(reader->columns().empty());
  }
  SECTION("zero-row column") {
    LogicalArray a = array::FromStrings({});
    a.dtype.nullable = true;
    auto result = WriteFile({{"s", a}});
    auto reader = OpenBytes(result.bytes);
    CHECK(reader->row_count() == 0);
    REQUIRE(reader->columns().size() == 1);
    CHECK(reader->columns()[0].leaves[0].pages.empty());
    CHECK(reader->ScanColumn("s").empty());
    CHECK(array::Equals(reader->ReadColumn("s"), array::Empty(a.dtype)));
    CHECK(reader->Take("s", {}).rows.length == 0);
  }
}

TEST_CASE("open rejects corrupt files", "[file]") {
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, {1, 2, 3});
  auto result = WriteFile({{"x", a}});
  SECTION("corrupt magic") {
    auto bytes = result.bytes;
    bytes.back() = 'X';
    CHECK_THROWS_MATCHES(OpenBytes(bytes), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("magic")));
  }
  SECTION("truncated") {
    std::vector<uint8_t> bytes(result.bytes.begin(),
                               result.bytes.begin() + 10);
    CHECK_THROWS_AS(OpenBytes(bytes), Error);
  }
  SECTION("unknown major version") {
    auto bytes = result.bytes;
    bytes[bytes.size() - 8] = 9;  // version major low byte
    CHECK_THROWS_MATCHES(OpenBytes(bytes), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("version")));
  }
}

TEST_CASE("deterministic output", "[file]") {
  testing::Rng rng(11002);
  DataType dtype = DataType::List(DataType::Utf8(true), true);
  LogicalArray a = testing::RandomArray(dtype, 500, 0.1, rng);
  LogicalArray b = VectorColumn(500, rng);
  auto first = WriteFile({{"lists", a}, {"vec", b}});
  auto second = WriteFile({{"lists", a}, {"vec", b}});
  CHECK(first.bytes == second.bytes);
}

TEST_CASE("take obeys full-zip IOP bounds", "[file]") {
  testing::Rng rng(11003);
  SECTION("fixed-width vector column: one data IOP per row") {
    LogicalArray a = VectorColumn(64, rng);
    auto result = WriteFile({{"vec", a}});
    REQUIRE(result.report.columns[0].leaves[0].pages[0].encoding ==
            PageEncoding::kFullZip);
    auto reader = OpenBytes(result.bytes);
    IoStats before = reader->stats();
    auto take = reader->Take("vec", {17});
    IoStats delta = reader->stats() - before;
    CHECK(take.planned_iops == 1);
    CHECK(delta.iops == 1);
    CHECK(delta.bytes_read == 3073);  // control word + 3072 value bytes
    CHECK(array::Equals(take.rows, array::Slice(a, 17, 1)));
  }
  SECTION("variable-width column: exactly two IOPS per row") {
    std::vector<std::string> strings;
    for (int i = 0; i < 300; i++) {
      strings.push_back(std::string(120 + i % 40, static_cast<char>('a' + i % 26)));
    }
    LogicalArray a = array::FromStrings(strings, std::vector<bool>(300, true),
                                        Kind::kBinary);
    auto result = WriteFile({{"blobs", a}});
    REQUIRE(result.report.columns[0].leaves[0].pages[0].encoding ==
            PageEncoding::kFullZip);
    auto reader = OpenBytes(result.bytes);
    IoStats before = reader->stats();
    auto take = reader->Take("blobs", {123});
    IoStats delta = reader->stats() - before;
    CHECK(take.planned_iops == 2);
    CHECK(delta.iops == 2);
    CHECK(array::Equals(take.rows, array::Slice(a, 123, 1)));
  }
  SECTION("nested variable-width columns still take two IOPS") {
    DataType dtype = DataType::List(
        DataType::List(DataType::Utf8(true), true), true);
    LogicalArray a = testing::RandomArray(dtype, 200, 0.1, rng);
    WriteOptions options;
    options.columns["deep"].force_encoding = PageEncoding::kFullZip;
    auto result = WriteFile({{"deep", a}}, options);
    auto reader = OpenBytes(result.bytes);
    IoStats before = reader->stats();
    auto take = reader->Take("deep", {57});
    IoStats delta = reader->stats() - before;
    CHECK(take.planned_iops == 2);
    CHECK(delta.iops == 2);
    CHECK(array::Equals(take.rows, array::Slice(a, 57, 1)));
  }
}

TEST_CASE("take obeys miniblock IOP bounds", "[file]") {
  testing::Rng rng(11004);
  std::vector<uint64_t> values(200000);
  for (auto& v : values) {
    v = testing::RandomInt(rng, 0, ~uint64_t{0});
  }
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, values);
  auto result = WriteFile({{"ints", a}});
  auto reader = OpenBytes(result.bytes);
  auto indices = testing::RandomSortedUniqueIndices(rng, 256, a.length);
  IoStats before = reader->stats();
  auto take = reader->Take("ints", indices);
  IoStats delta = reader->stats() - before;
  CHECK(delta.iops <= 256);
  CHECK(delta.iops == take.planned_iops);
  // Each chunk read stays within a sector pair plus its header.
  CHECK(delta.bytes_read <= delta.iops * (8192 + 64));
  for (size_t i = 0; i < indices.size(); i++) {
    REQUIRE(array::Equals(array::Slice(take.rows, i, 1),
                          array::Slice(a, indices[i], 1)));
  }
}

TEST_CASE("planned IOPS equal observed IOPS with coalescing disabled",
          "[file]") {
  testing::Rng rng(11005);
  const std::vector<DataType> dtypes = {
      DataType::Primitive(Kind::kUInt32, true),
      DataType::Utf8(true),
      DataType::List(DataType::Primitive(Kind::kUInt64, true), true),
  };
  for (const auto& dtype : dtypes) {
    LogicalArray a = testing::RandomArray(dtype, 5000, 0.1, rng);
    auto result = WriteFile({{"c", a}});
    auto reader = OpenBytes(result.bytes);
    auto indices = testing::RandomSortedUniqueIndices(rng, 64, a.length);
    IoStats before = reader->stats();
    auto take = reader->Take("c", indices);
    IoStats delta = reader->stats() - before;
    CHECK(take.planned_iops == delta.iops);
  }
}

TEST_CASE("scan reads data extents but never the repetition index", "[file]") {
  testing::Rng rng(11006);
  std::vector<std::string> strings;
  for (int i = 0; i < 400; i++) {
    strings.push_back(std::string(150, static_cast<char>('a' + i % 26)));
  }
  LogicalArray a = array::FromStrings(strings);
  auto result = WriteFile({{"text", a}});
  const auto& page =
      result.report.columns[0].leaves[0].pages[0];
  REQUIRE(page.encoding == PageEncoding::kFullZip);

  auto reader = OpenBytes(result.bytes);
  const auto& meta = reader->columns()[0].leaves[0].pages[0];
  REQUIRE(meta.fullzip.rep_index.length > 0);
  IoStats before = reader->stats();
  LogicalArray back = reader->ReadColumn("text");
  IoStats delta = reader->stats() - before;
  CHECK(array::Equals(back, a));
  CHECK(delta.iops == 1);
  CHECK(delta.bytes_read == meta.fullzip.data.length);
}

TEST_CASE("full-zip only files report zero cache bytes", "[file]") {
  testing::Rng rng(11007);
  LogicalArray a = VectorColumn(32, rng);
  auto result = WriteFile({{"vec", a}});
  auto reader = OpenBytes(result.bytes);
  CHECK(reader->cache_bytes() == 0);
  CHECK(result.report.cache_payload_bytes == 0);
}

TEST_CASE("miniblock cache stays under one part per thousand", "[file]") {
  testing::Rng rng(11008);
  std::vector<uint64_t> values(300000);
  for (auto& v : values) {
    v = testing::RandomInt(rng, 0, ~uint64_t{0});
  }
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, values);
  auto result = WriteFile({{"ints", a}});
  auto reader = OpenBytes(result.bytes);
  CHECK(reader->cache_bytes() == result.report.cache_payload_bytes);
  CHECK(static_cast<double>(reader->cache_bytes()) <=
        0.001 * static_cast<double>(result.report.data_bytes));
}

TEST_CASE("struct columns shred into independent leaves", "[file]") {
  testing::Rng rng(11009);
  LogicalArray x = testing::RandomArray(DataType::Primitive(Kind::kUInt64),
                                        20000, 0, rng);
  LogicalArray y = testing::RandomArray(DataType::Utf8(true), 20000, 0.1, rng);
  LogicalArray s = array::StructOf({{"x", x}, {"y", y}}, 20000);
  auto result = WriteFile({{"s", s}});
  REQUIRE(result.report.columns[0].leaves.size() == 2);
  auto reader = OpenBytes(result.bytes);

  SECTION("whole struct round trips") {
    CHECK(array::Equals(reader->ReadColumn("s"), s));
  }
  SECTION("single-field scan touches only that leaf") {
    const auto& meta = reader->columns()[0];
    uint64_t x_bytes = 0;
    for (const auto& page : meta.leaves[0].pages) {
      x_bytes += page.miniblock.data.length;
    }
    IoStats before = reader->stats();
    LogicalArray back = reader->ReadColumn("s.x");
    IoStats delta = reader->stats() - before;
    CHECK(array::Equals(back, x));
    CHECK(delta.bytes_read == x_bytes);
  }
  SECTION("take of one field matches the slice oracle") {
    auto indices = testing::RandomSortedUniqueIndices(rng, 40, 20000);
    auto take = reader->Take("s.y", indices);
    for (size_t i = 0; i < indices.size(); i++) {
      REQUIRE(array::Equals(array::Slice(take.rows, i, 1),
                            array::Slice(y, indices[i], 1)));
    }
  }
}

TEST_CASE("packed structs concatenate field values", "[file]") {
  SECTION("two uint32 fields pack little-endian") {
    LogicalArray a = array::FromValues<uint32_t>(Kind::kUInt32, {1});
    LogicalArray b = array::FromValues<uint32_t>(Kind::kUInt32, {2});
    LogicalArray s = array::StructOf({{"a", a}, {"b", b}}, 1);
    packing::PackedColumn packed = packing::Pack(s);
    REQUIRE(packed.levels.leaf_values.Count() == 1);
    auto value = packed.levels.leaf_values.ValueAt(0);
    CHECK(std::vector<uint8_t>(value.begin(), value.end()) ==
          std::vector<uint8_t>{1, 0, 0, 0, 2, 0, 0, 0});
  }
  SECTION("five uint64 fields stay in miniblock") {
    testing::Rng rng(11010);
    std::vector<std::pair<std::string, LogicalArray>> fields;
    for (int f = 0; f < 5; f++) {
      fields.emplace_back("f" + std::to_string(f),
                          testing::RandomArray(
                              DataType::Primitive(Kind::kUInt64), 4000, 0,
                              rng));
    }
    LogicalArray s = array::StructOf(fields, 4000);
    WriteOptions options;
    options.columns["s"].packing = StructPacking::kPackedStruct;
    auto result = WriteFile({{"s", s}}, options);
    REQUIRE(result.report.columns[0].leaves.size() == 1);
    CHECK(result.report.columns[0].leaves[0].pages[0].encoding ==
          PageEncoding::kMiniBlock);
    CHECK(result.report.columns[0].leaves[0].pages[0].avg_width == 40.0);
    auto reader = OpenBytes(result.bytes);
    CHECK(array::Equals(reader->ReadColumn("s"), s));
  }
  SECTION("whole-record packing round trips with variable fields") {
    testing::Rng rng(11011);
    LogicalArray id = testing::RandomArray(
        DataType::Primitive(Kind::kUInt64), 300, 0, rng);
    LogicalArray name = testing::RandomArray(DataType::Utf8(), 300, 0, rng);
    LogicalArray score = testing::RandomArray(
        DataType::Primitive(Kind::kFloat32), 300, 0, rng);
    LogicalArray record = array::StructOf(
        {{"id", id}, {"name", name}, {"score", score}}, 300,
        std::vector<bool>(300, true));
    // Row-major layout of the entire record.
    WriteOptions options;
    options.columns["r"].packing = StructPacking::kPackedStruct;
    auto result = WriteFile({{"r", record}}, options);
    auto reader = OpenBytes(result.bytes);
    CHECK(array::Equals(reader->ReadColumn("r"), record));
    auto take = reader->Take("r", {7, 100, 299});
    CHECK(take.planned_iops >= 1);
    CHECK(array::Equals(array::Slice(take.rows, 1, 1),
                        array::Slice(record, 100, 1)));
  }
  SECTION("nullable fields are rejected") {
    LogicalArray a = array::FromValues<uint32_t>(Kind::kUInt32, {1, 2},
                                                 {true, false});
    LogicalArray s = array::StructOf({{"a", a}}, 2);
    WriteOptions options;
    options.columns["s"].packing = StructPacking::kPackedStruct;
    CHECK_THROWS_AS(WriteFile({{"s", s}}, options), Error);
  }
}

TEST_CASE("packed struct trades scan bytes for take IOPS", "[file]") {
  testing::Rng rng(11012);
  for (size_t k : {2, 3, 4, 5}) {
    std::vector<std::pair<std::string, LogicalArray>> fields;
    for (size_t f = 0; f < k; f++) {
      fields.emplace_back("f" + std::to_string(f),
                          testing::RandomArray(
                              DataType::Primitive(Kind::kUInt64), 60000, 0,
                              rng));
    }
    LogicalArray s = array::StructOf(fields, 60000);
    WriteOptions packed_options;
    packed_options.columns["s"].packing = StructPacking::kPackedStruct;
    auto packed = WriteFile({{"s", s}}, packed_options);
    auto unpacked = WriteFile({{"s", s}});

    auto packed_reader = OpenBytes(packed.bytes);
    auto unpacked_reader = OpenBytes(unpacked.bytes);

    // All-field random access: one IOP packed, k IOPS unpacked.
    auto p_take = packed_reader->Take("s", {31337});
    auto u_take = unpacked_reader->Take("s", {31337});
    CHECK(p_take.planned_iops == 1);
    CHECK(u_take.planned_iops == k);
    CHECK(array::Equals(p_take.rows, u_take.rows));

    // Single-field scan: packed reads about k times the bytes.
    IoStats before = packed_reader->stats();
    packed_reader->ReadColumn("s.f0");
    uint64_t packed_bytes = (packed_reader->stats() - before).bytes_read;
    before = unpacked_reader->stats();
    unpacked_reader->ReadColumn("s.f0");
    uint64_t unpacked_bytes = (unpacked_reader->stats() - before).bytes_read;
    double ratio = static_cast<double>(packed_bytes) /
                   static_cast<double>(unpacked_bytes);
    CHECK(ratio > 0.9 * static_cast<double>(k));
    CHECK(ratio < 1.1 * static_cast<double>(k));
  }
}

TEST_CASE("multi-page columns split on row slabs", "[file]") {
  testing::Rng rng(11013);
  LogicalArray a = VectorColumn(6000, rng);  // ~18 MiB: several 8 MiB pages
  auto result = WriteFile({{"vec", a}});
  REQUIRE(result.report.columns[0].leaves[0].pages.size() >= 3);
  auto reader = OpenBytes(result.bytes);
  auto batches = reader->ScanColumn("vec");
  REQUIRE(batches.size() >= 3);
  for (const auto& batch : batches) {
    REQUIRE(array::Equals(batch.rows,
                          array::Slice(a, batch.row_begin, batch.rows.length)));
  }
  std::vector<uint64_t> indices = {0, 2999, 3000, 5999};
  auto take = reader->Take("vec", indices);
  for (size_t i = 0; i < indices.size(); i++) {
    REQUIRE(array::Equals(array::Slice(take.rows, i, 1),
                          array::Slice(a, indices[i], 1)));
  }
}

TEST_CASE("take accepts unsorted and duplicate indices", "[file]") {
  testing::Rng rng(11014);
  LogicalArray a = testing::RandomArray(DataType::Utf8(true), 2000, 0.1, rng);
  auto result = WriteFile({{"s", a}});
  auto reader = OpenBytes(result.bytes);
  std::vector<uint64_t> indices = {999, 3, 999, 0, 1500, 3};
  auto take = reader->Take("s", indices);
  REQUIRE(take.rows.length == indices.size());
  for (size_t i = 0; i < indices.size(); i++) {
    REQUIRE(array::Equals(array::Slice(take.rows, i, 1),
                          array::Slice(a, indices[i], 1)));
  }
}

TEST_CASE("routing matches the threshold on random widths", "[file]") {
  testing::Rng rng(11015);
  for (int round = 0; round < 20; round++) {
    uint64_t width = testing::RandomInt(rng, 100, 160);
    LogicalArray a = array::FixedSizeListOf(
        testing::RandomArray(DataType::Primitive(Kind::kUInt8), 500 * width, 0,
                             rng),
        width);
    auto result = WriteFile({{"c", a}});
    const auto& page = result.report.columns[0].leaves[0].pages[0];
    CHECK(page.encoding == file::SelectEncoding(page.avg_width));
    CHECK(page.avg_width == static_cast<double>(width));
  }
}

TEST_CASE("round trip across random schemas", "[file]") {
  testing::Rng rng(11016);
  for (int round = 0; round < 40; round++) {
    DataType dtype = testing::RandomDataType(rng, 3);
    uint64_t n = testing::RandomInt(rng, 0, 800);
    LogicalArray a = testing::RandomArray(dtype, n, 0.15, rng);
    auto result = WriteFile({{"c", a}});
    auto reader = OpenBytes(result.bytes);
    for (const auto& batch : reader->ScanColumn("c")) {
      REQUIRE(array::Equals(
          batch.rows, array::Slice(a, batch.row_begin, batch.rows.length)));
    }
    if (n > 0) {
      auto indices = testing::RandomSortedUniqueIndices(
          rng, testing::RandomInt(rng, 1, 16), n);
      auto take = reader->Take("c", indices);
      for (size_t i = 0; i < indices.size(); i++) {
        REQUIRE(array::Equals(array::Slice(take.rows, i, 1),
                              array::Slice(a, indices[i], 1)));
      }
    }
  }
}
