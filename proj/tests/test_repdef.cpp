// SPDX-License-Identifier: Apache-2.0

#include "zipcol/repdef.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "testing.hpp"

using namespace zipcol;

namespace {

// Struct<List<Utf8>>, all layers nullable, with the five worked rows:
// ["AB","C"], NULL LIST, NULL STRUCT, [NULL], [].
LogicalArray WorkedStructListUtf8() {
  LogicalArray strings = array::FromStrings(
      {"AB", "C", ""}, {true, true, false});
  LogicalArray list = array::ListOf(strings, {0, 2, 2, 2, 3, 3},
                                    {true, false, true, true, true});
  return array::StructOf({{"s", list}}, 5, {true, true, false, true, true});
}

std::vector<std::pair<uint16_t, uint16_t>> Entries(const RepDefLevels& l) {
  std::vector<std::pair<uint16_t, uint16_t>> out;
  for (size_t i = 0; i < l.rep.size(); i++) {
    out.emplace_back(l.rep[i], l.def[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("shred the worked struct-list-utf8 example", "[repdef]") {
  LogicalArray a = WorkedStructListUtf8();
  auto levels = Shred(a);
  REQUIRE(levels.size() == 1);
  const auto& l = levels[0];
  CHECK(l.max_rep == 1);
  CHECK(l.max_def == 4);
  std::vector<std::pair<uint16_t, uint16_t>> expected = {
      {1, 0}, {0, 0}, {1, 3}, {1, 4}, {1, 1}, {1, 2}};
  CHECK(Entries(l) == expected);
  REQUIRE(l.leaf_values.Count() == 2);
  std::string v0(l.leaf_values.ValueAt(0).begin(), l.leaf_values.ValueAt(0).end());
  std::string v1(l.leaf_values.ValueAt(1).begin(), l.leaf_values.ValueAt(1).end());
  CHECK(v0 == "AB");
  CHECK(v1 == "C");
}

TEST_CASE("shred flat non-nullable uint64", "[repdef]") {
  LogicalArray a = array::FromValues<uint64_t>(Kind::kUInt64, {7, 8});
  auto levels = Shred(a);
  REQUIRE(levels.size() == 1);
  const auto& l = levels[0];
  CHECK(l.max_rep == 0);
  CHECK(l.max_def == 0);
  CHECK(l.rep == std::vector<uint16_t>{0, 0});
  CHECK(l.def == std::vector<uint16_t>{0, 0});
  REQUIRE(l.leaf_values.Count() == 2);
  CHECK(le::Load<uint64_t>(l.leaf_values.ValueAt(0).data()) == 7);
  CHECK(le::Load<uint64_t>(l.leaf_values.ValueAt(1).data()) == 8);
}

TEST_CASE("shred nullable utf8 stores sparse leaf values", "[repdef]") {
  LogicalArray a = array::FromStrings({"x", "junk"}, {true, false});
  auto levels = Shred(a);
  const auto& l = levels[0];
  CHECK(l.max_def == 1);
  CHECK(l.def == std::vector<uint16_t>{0, 1});
  REQUIRE(l.leaf_values.Count() == 1);
  std::string v0(l.leaf_values.ValueAt(0).begin(), l.leaf_values.ValueAt(0).end());
  CHECK(v0 == "x");
}

TEST_CASE("level widths", "[repdef]") {
  SECTION("struct<list<utf8>> all nullable") {
    DataType t = DataType::Struct(
        {{"s", DataType::List(DataType::Utf8(true), true)}}, true);
    LevelWidths w = LevelWidthsFor(t);
    CHECK(w.rep_bits == 1);
    CHECK(w.def_bits == 3);
  }
  SECTION("non-nullable uint64") {
    LevelWidths w = LevelWidthsFor(DataType::Primitive(Kind::kUInt64));
    CHECK(w.rep_bits == 0);
    CHECK(w.def_bits == 0);
  }
  SECTION("list<list<utf8>> all nullable has six definition states") {
    DataType t =
        DataType::List(DataType::List(DataType::Utf8(true), true), true);
    auto paths = repdef::detail::BuildPaths(t);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].max_rep == 2);
    CHECK(paths[0].max_def == 5);
    LevelWidths w = LevelWidthsFor(t);
    CHECK(w.rep_bits == 2);
    CHECK(w.def_bits == 3);
  }
  SECTION("fixed-size-list is a leaf: one def level when nullable, no rep") {
    DataType t = DataType::FixedSizeList(
        DataType::Primitive(Kind::kFloat32), 4, true);
    LevelWidths w = LevelWidthsFor(t);
    CHECK(w.rep_bits == 0);
    CHECK(w.def_bits == 1);
  }
}

TEST_CASE("unshred inverts the worked example", "[repdef]") {
  LogicalArray a = WorkedStructListUtf8();
  auto levels = Shred(a);
  LogicalArray back = Unshred(levels[0], a.dtype);
  CHECK(!array::Validate(back).has_value());
  CHECK(array::Equals(back, a));
}

TEST_CASE("unshred of empty levels yields an empty array", "[repdef]") {
  RepDefLevels levels;
  levels.leaf_values.width = 8;
  LogicalArray out = Unshred(levels, DataType::Primitive(Kind::kUInt64));
  CHECK(out.length == 0);
  CHECK(out.values.empty());
}

TEST_CASE("unshred rejects out-of-range levels", "[repdef]") {
  RepDefLevels levels;
  levels.max_rep = 0;
  levels.max_def = 1;
  levels.rep = {0};
  levels.def = {7};
  levels.leaf_values.width = 8;
  CHECK_THROWS_AS(Unshred(levels, DataType::Primitive(Kind::kUInt64, true)),
                  Error);
}

TEST_CASE("shred/unshred round trip on random nested arrays", "[repdef]") {
  testing::Rng rng(8101);
  for (int round = 0; round < 120; round++) {
    DataType dtype = testing::RandomDataType(rng, 3);
    uint64_t n = testing::RandomInt(rng, 0, 1000);
    double density = 0.0;
    switch (round % 3) {
      case 0: density = 0.0; break;
      case 1: density = testing::RandomInt(rng, 1, 9) / 10.0; break;
      default: density = 1.0; break;
    }
    LogicalArray a = testing::RandomArray(dtype, n, density, rng);
    REQUIRE(!array::Validate(a).has_value());
    auto levels = Shred(a);

    // Sparse leaf storage: one stored value per fully-valid entry.
    for (const auto& l : levels) {
      uint64_t valid_entries = 0;
      for (uint16_t d : l.def) {
        if (d == 0) valid_entries++;
      }
      CHECK(valid_entries == l.leaf_values.Count());
      // One entry with the new-row marker per source row.
      uint64_t row_marks = 0;
      for (uint16_t r : l.rep) {
        if (r == l.max_rep) row_marks++;
      }
      if (l.max_rep > 0) {
        CHECK(row_marks == a.length);
      } else {
        CHECK(l.rep.size() == a.length);
      }
    }

    LogicalArray back = UnshredColumn(levels, dtype);
    CHECK(!array::Validate(back).has_value());
    CHECK(array::Equals(back, a));
  }
}
