// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "zipcol/array.hpp"
#include "zipcol/file_reader.hpp"
#include "zipcol/file_writer.hpp"

namespace zipcol {

namespace bench {

// The eight benchmark data types.  Sizes follow the production mix: 8-byte
// scalars up to ~100 KiB image lists.  The null fraction applies to the
// top-level type only.
enum class ScenarioKind {
  kScalar,      // UInt64, ~8 B/row
  kString,      // Utf8, ~16 B/row
  kScalarList,  // List<UInt64>, ~40 B/row
  kStringList,  // List<Utf8>, ~80 B/row
  kVector,      // FSL<Float32,768>, 3 KiB/row
  kVectorList,  // List<FSL<Float32,768>>, ~15 KiB/row
  kImage,       // Binary, ~20 KiB/row
  kImageList,   // List<Binary>, ~100 KiB/row
};

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::kScalar;
  uint64_t rows = 0;
  double null_fraction = 0.10;
  uint64_t seed = 42;
};

inline const std::vector<std::pair<std::string, ScenarioKind>>&
ScenarioNames() {
  static const std::vector<std::pair<std::string, ScenarioKind>> kNames = {
      {"scalar", ScenarioKind::kScalar},
      {"string", ScenarioKind::kString},
      {"scalar-list", ScenarioKind::kScalarList},
      {"string-list", ScenarioKind::kStringList},
      {"vector", ScenarioKind::kVector},
      {"vector-list", ScenarioKind::kVectorList},
      {"image", ScenarioKind::kImage},
      {"image-list", ScenarioKind::kImageList},
  };
  return kNames;
}

// Desk-scale defaults: a million rows for small types, ten thousand for
// vectors and images.
inline uint64_t DefaultRows(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kScalar:
    case ScenarioKind::kString:
    case ScenarioKind::kScalarList:
    case ScenarioKind::kStringList:
      return 1000000;
    default:
      return 10000;
  }
}

inline Scenario MakeScenario(const std::string& name, uint64_t rows = 0,
                             double null_fraction = 0.10, uint64_t seed = 42) {
  for (const auto& [n, kind] : ScenarioNames()) {
    if (n == name) {
      Scenario s;
      s.name = name;
      s.kind = kind;
      s.rows = rows == 0 ? DefaultRows(kind) : rows;
      s.null_fraction = null_fraction;
      s.seed = seed;
      return s;
    }
  }
  Raise(ErrorCode::kInvalid, "unknown scenario: " + name);
}

namespace detail {

using Rng = std::mt19937_64;

inline std::vector<bool> TopLevelValidity(uint64_t rows, double null_fraction,
                                          Rng* rng) {
  std::vector<bool> valid(rows, true);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (uint64_t i = 0; i < rows; i++) {
    if (coin(*rng) < null_fraction) {
      valid[i] = false;
    }
  }
  return valid;
}

inline void FillRandom(std::vector<uint8_t>* bytes, Rng* rng) {
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& b : *bytes) {
    b = static_cast<uint8_t>(byte(*rng));
  }
}

inline LogicalArray FlatUInt64(uint64_t rows, Rng* rng) {
  LogicalArray a;
  a.dtype = DataType::Primitive(Kind::kUInt64);
  a.length = rows;
  a.values.resize(rows * 8);
  FillRandom(&a.values, rng);
  return a;
}

inline LogicalArray FlatUtf8(uint64_t rows, uint64_t min_len, uint64_t max_len,
                             Rng* rng) {
  LogicalArray a;
  a.dtype = DataType::Utf8();
  a.length = rows;
  a.offsets.push_back(0);
  std::uniform_int_distribution<uint64_t> length(min_len, max_len);
  std::uniform_int_distribution<int> letter('a', 'z');
  for (uint64_t i = 0; i < rows; i++) {
    uint64_t n = length(*rng);
    for (uint64_t j = 0; j < n; j++) {
      a.values.push_back(static_cast<uint8_t>(letter(*rng)));
    }
    a.offsets.push_back(a.values.size());
  }
  return a;
}

inline LogicalArray FlatBinary(uint64_t rows, uint64_t min_len,
                               uint64_t max_len, Rng* rng) {
  LogicalArray a;
  a.dtype = DataType::Binary();
  a.length = rows;
  a.offsets.push_back(0);
  std::uniform_int_distribution<uint64_t> length(min_len, max_len);
  for (uint64_t i = 0; i < rows; i++) {
    uint64_t n = length(*rng);
    size_t start = a.values.size();
    a.values.resize(start + n);
    std::uniform_int_distribution<int> byte(0, 255);
    for (uint64_t j = 0; j < n; j++) {
      a.values[start + j] = static_cast<uint8_t>(byte(*rng));
    }
    a.offsets.push_back(a.values.size());
  }
  return a;
}

inline LogicalArray Vectors(uint64_t rows, Rng* rng) {
  LogicalArray prims;
  prims.dtype = DataType::Primitive(Kind::kFloat32);
  prims.length = rows * 768;
  prims.values.resize(prims.length * 4);
  FillRandom(&prims.values, rng);
  LogicalArray a;
  a.dtype = DataType::FixedSizeList(prims.dtype, 768);
  a.length = rows;
  a.children.push_back(std::move(prims));
  return a;
}

inline std::vector<uint64_t> ListOffsets(uint64_t rows, uint64_t min_items,
                                         uint64_t max_items, Rng* rng) {
  std::vector<uint64_t> offsets{0};
  std::uniform_int_distribution<uint64_t> items(min_items, max_items);
  for (uint64_t i = 0; i < rows; i++) {
    offsets.push_back(offsets.back() + items(*rng));
  }
  return offsets;
}

inline LogicalArray WrapList(LogicalArray child, std::vector<uint64_t> offsets,
                             const std::vector<bool>& valid) {
  LogicalArray a;
  a.dtype = DataType::List(child.dtype, true);
  a.length = offsets.size() - 1;
  a.offsets = std::move(offsets);
  a.children.push_back(std::move(child));
  a.validity = MakeBitmap(valid);
  return a;
}

}  // namespace detail

// Seeded synthetic data for one scenario; identical seeds produce identical
// arrays.
inline LogicalArray Generate(const Scenario& scenario) {
  detail::Rng rng(scenario.seed);
  uint64_t rows = scenario.rows;
  auto valid = detail::TopLevelValidity(rows, scenario.null_fraction, &rng);
  switch (scenario.kind) {
    case ScenarioKind::kScalar: {
      LogicalArray a = detail::FlatUInt64(rows, &rng);
      a.dtype.nullable = true;
      a.validity = MakeBitmap(valid);
      return a;
    }
    case ScenarioKind::kString: {
      LogicalArray a = detail::FlatUtf8(rows, 8, 16, &rng);
      a.dtype.nullable = true;
      a.validity = MakeBitmap(valid);
      return a;
    }
    case ScenarioKind::kScalarList: {
      auto offsets = detail::ListOffsets(rows, 3, 6, &rng);
      LogicalArray child = detail::FlatUInt64(offsets.back(), &rng);
      return detail::WrapList(std::move(child), std::move(offsets), valid);
    }
    case ScenarioKind::kStringList: {
      auto offsets = detail::ListOffsets(rows, 3, 6, &rng);
      LogicalArray child = detail::FlatUtf8(offsets.back(), 8, 16, &rng);
      return detail::WrapList(std::move(child), std::move(offsets), valid);
    }
    case ScenarioKind::kVector: {
      LogicalArray a = detail::Vectors(rows, &rng);
      a.dtype.nullable = true;
      a.validity = MakeBitmap(valid);
      return a;
    }
    case ScenarioKind::kVectorList: {
      auto offsets = detail::ListOffsets(rows, 4, 6, &rng);
      LogicalArray child = detail::Vectors(offsets.back(), &rng);
      return detail::WrapList(std::move(child), std::move(offsets), valid);
    }
    case ScenarioKind::kImage: {
      LogicalArray a = detail::FlatBinary(rows, 16 << 10, 24 << 10, &rng);
      a.dtype.nullable = true;
      a.validity = MakeBitmap(valid);
      return a;
    }
    case ScenarioKind::kImageList: {
      auto offsets = detail::ListOffsets(rows, 4, 6, &rng);
      LogicalArray child =
          detail::FlatBinary(offsets.back(), 16 << 10, 24 << 10, &rng);
      return detail::WrapList(std::move(child), std::move(offsets), valid);
    }
  }
  Raise(ErrorCode::kInvalid, "unreachable");
}

struct RunRecord {
  std::string scenario;
  std::string encoding;
  std::string workload;
  uint64_t rows = 0;
  uint64_t k = 0;
  uint64_t batches = 0;
  uint64_t workers = 0;
  uint64_t seed = 0;
  bool coalesce = false;
  uint64_t iops = 0;
  uint64_t bytes_read = 0;
  uint64_t useful_bytes = 0;
  double read_amplification = 0;
  double rows_per_second = 0;
  double elapsed_seconds = 0;
  uint64_t cache_bytes = 0;
};

inline std::string CsvHeader() {
  return "scenario,encoding,workload,rows,k,batches,workers,seed,coalesce,"
         "iops,bytes_read,useful_bytes,read_amplification,rows_per_second,"
         "elapsed_seconds,cache_bytes";
}

inline std::string ToCsv(const RunRecord& r) {
  std::ostringstream out;
  out << r.scenario << ',' << r.encoding << ',' << r.workload << ',' << r.rows
      << ',' << r.k << ',' << r.batches << ',' << r.workers << ',' << r.seed
      << ',' << (r.coalesce ? "on" : "off") << ',' << r.iops << ','
      << r.bytes_read << ',' << r.useful_bytes << ','
      << r.read_amplification << ',' << r.rows_per_second << ','
      << r.elapsed_seconds << ',' << r.cache_bytes;
  return out.str();
}

// Encoding label of a file: the page tag when uniform, "auto" when mixed.
inline std::string FileEncodingLabel(const file::FileReader& reader) {
  bool any = false;
  PageEncoding seen = PageEncoding::kMiniBlock;
  bool mixed = false;
  for (const auto& column : reader.columns()) {
    for (const auto& leaf : column.leaves) {
      for (const auto& page : leaf.pages) {
        if (!any) {
          seen = page.encoding;
          any = true;
        } else if (page.encoding != seen) {
          mixed = true;
        }
      }
    }
  }
  if (!any || mixed) {
    return "auto";
  }
  switch (seen) {
    case PageEncoding::kArrowBaseline:
      return "arrow-baseline";
    case PageEncoding::kFullZip:
      return "fullzip";
    case PageEncoding::kMiniBlock:
      return "miniblock";
  }
  return "auto";
}

struct TakeWorkload {
  uint64_t k = 256;
  uint64_t batches = 8;
  uint64_t workers = 0;  // 0 = logical cores
  uint64_t seed = 42;
};

// Runs parallel take batches of k random unique indices per batch and
// reports the totals.  Every metric comes straight from IoStats.
inline RunRecord RunTake(file::FileReader& reader, const std::string& column,
                         const TakeWorkload& workload, bool coalesce,
                         uint64_t* planned_iops_out = nullptr) {
  RunRecord record;
  record.workload = "take";
  record.k = workload.k;
  record.batches = workload.batches;
  record.workers = workload.workers == 0
                       ? std::max(1u, std::thread::hardware_concurrency())
                       : workload.workers;
  record.seed = workload.seed;
  record.coalesce = coalesce;
  record.rows = reader.row_count();
  record.encoding = FileEncodingLabel(reader);
  record.cache_bytes = reader.cache_bytes();

  Check(reader.row_count() > 0, ErrorCode::kInvalid, "empty file");
  std::atomic<uint64_t> planned{0};
  std::atomic<uint64_t> useful{0};  // encoded bytes strictly required
  IoStats before = reader.stats();
  auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  std::atomic<uint64_t> next_batch{0};
  for (uint64_t w = 0; w < record.workers; w++) {
    threads.emplace_back([&, w] {
      (void)w;
      while (true) {
        uint64_t batch = next_batch.fetch_add(1);
        if (batch >= workload.batches) {
          return;
        }
        detail::Rng rng(workload.seed + batch * 7919);
        std::vector<uint64_t> indices;
        std::uniform_int_distribution<uint64_t> row(0, reader.row_count() - 1);
        while (indices.size() < workload.k &&
               indices.size() < reader.row_count()) {
          uint64_t r = row(rng);
          if (std::find(indices.begin(), indices.end(), r) == indices.end()) {
            indices.push_back(r);
          }
        }
        std::sort(indices.begin(), indices.end());
        auto result = reader.Take(column, indices);
        planned.fetch_add(result.planned_iops);
        useful.fetch_add(result.useful_bytes);
      }
    });
  }
  for (auto& thread : threads) {
    thread.join();
  }
  auto elapsed = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  IoStats delta = reader.stats() - before;
  record.iops = delta.iops;
  record.bytes_read = delta.bytes_read;
  record.useful_bytes = useful.load();
  record.read_amplification =
      record.useful_bytes == 0
          ? 0
          : static_cast<double>(record.bytes_read) /
                static_cast<double>(record.useful_bytes);
  record.elapsed_seconds = elapsed;
  record.rows_per_second =
      elapsed == 0 ? 0
                   : static_cast<double>(workload.k * workload.batches) /
                         elapsed;
  if (planned_iops_out != nullptr) {
    *planned_iops_out = planned.load();
  }
  return record;
}

inline RunRecord RunScan(file::FileReader& reader, const std::string& column) {
  RunRecord record;
  record.workload = "scan";
  record.rows = reader.row_count();
  record.encoding = FileEncodingLabel(reader);
  record.cache_bytes = reader.cache_bytes();
  IoStats before = reader.stats();
  auto start = std::chrono::steady_clock::now();
  LogicalArray out = reader.ReadColumn(column);
  auto elapsed = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  IoStats delta = reader.stats() - before;
  record.iops = delta.iops;
  record.bytes_read = delta.bytes_read;
  // A scan reads whole data extents and nothing else, so the encoded
  // bytes it strictly needs equal the bytes it reads.
  record.useful_bytes = delta.bytes_read;
  (void)out;
  record.read_amplification =
      record.useful_bytes == 0
          ? 0
          : static_cast<double>(record.bytes_read) /
                static_cast<double>(record.useful_bytes);
  record.elapsed_seconds = elapsed;
  record.rows_per_second =
      elapsed == 0 ? 0 : static_cast<double>(out.length) / elapsed;
  return record;
}

// Sum of the scan extents the reader is expected to touch for one column:
// data extents only, never full-zip repetition indices.
inline uint64_t ExpectedScanBytes(const file::FileReader& reader,
                                  const std::string& column) {
  for (const auto& meta : reader.columns()) {
    if (meta.name != column) {
      continue;
    }
    uint64_t total = 0;
    for (const auto& leaf : meta.leaves) {
      for (const auto& page : leaf.pages) {
        switch (page.encoding) {
          case PageEncoding::kFullZip:
            total += page.fullzip.data.length;
            break;
          case PageEncoding::kMiniBlock:
            total += page.miniblock.data.length;
            break;
          case PageEncoding::kArrowBaseline:
            for (const auto& e : page.arrow_extents) {
              total += e.extent.length;
            }
            break;
        }
      }
    }
    return total;
  }
  Raise(ErrorCode::kInvalid, "no such column: " + column);
}

}  // namespace bench

}  // namespace zipcol
