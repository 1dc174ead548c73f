// SPDX-License-Identifier: Apache-2.0

#include "zipcol/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unordered_set>

#include <catch2/catch_amalgamated.hpp>

#include "testing.hpp"

using namespace zipcol;

namespace {

std::vector<uint8_t> PatternBytes(uint64_t n) {
  std::vector<uint8_t> bytes(n);
  for (uint64_t i = 0; i < n; i++) {
    bytes[i] = static_cast<uint8_t>(i * 7 + (i >> 8));
  }
  return bytes;
}

std::shared_ptr<Storage> PatternStorage(uint64_t n) {
  return std::make_shared<Storage>(
      std::make_shared<MemorySource>(PatternBytes(n)));
}

// Monte Carlo oracle: sample k distinct rows, count distinct pages, average
// over trials.
double McDistinctPages(uint64_t total_rows, uint64_t bytes_per_row,
                       uint64_t page_bytes, uint64_t k, int trials,
                       uint64_t seed) {
  testing::Rng rng(seed);
  uint64_t rows_per_page = page_bytes / bytes_per_row;
  double sum = 0;
  for (int t = 0; t < trials; t++) {
    std::unordered_set<uint64_t> rows;
    rows.reserve(k * 2);
    while (rows.size() < k) {
      rows.insert(testing::RandomInt(rng, 0, total_rows - 1));
    }
    std::unordered_set<uint64_t> pages;
    for (uint64_t row : rows) {
      pages.insert(row / rows_per_page);
    }
    sum += static_cast<double>(pages.size());
  }
  return sum / trials;
}

}  // namespace

TEST_CASE("adjacent requests coalesce into one IOP", "[io]") {
  auto storage = PatternStorage(4096);
  std::vector<ReadRequest> requests = {{0, 100, IoTag::kData},
                                       {100, 100, IoTag::kData}};
  auto results = storage->Submit(requests, CoalescePolicy{});
  IoStats stats = storage->stats();
  CHECK(stats.iops == 1);
  CHECK(stats.coalesced_merges == 1);
  CHECK(stats.bytes_read == 200);
  auto expected = PatternBytes(4096);
  CHECK(std::equal(results[0].begin(), results[0].end(), expected.begin()));
  CHECK(std::equal(results[1].begin(), results[1].end(),
                   expected.begin() + 100));
}

TEST_CASE("distant requests stay separate", "[io]") {
  auto storage = PatternStorage(4 << 20);
  std::vector<ReadRequest> requests = {{0, 64, IoTag::kData},
                                       {1 << 20, 64, IoTag::kData}};
  storage->Submit(requests, CoalescePolicy{});
  CHECK(storage->stats().iops == 2);
  CHECK(storage->stats().coalesced_merges == 0);
}

TEST_CASE("many requests within one 8 KiB page merge to one IOP", "[io]") {
  testing::Rng rng(4242);
  auto storage = PatternStorage(1 << 20);
  std::vector<ReadRequest> requests;
  for (int i = 0; i < 256; i++) {
    uint64_t offset = 4096 + testing::RandomInt(rng, 0, 8192 - 16);
    requests.push_back({offset, 16, IoTag::kData});
  }
  storage->Submit(requests, CoalescePolicy{});
  CHECK(storage->stats().iops == 1);
  CHECK(storage->stats().coalesced_merges == 255);
}

TEST_CASE("accounting is exact with coalescing disabled", "[io]") {
  testing::Rng rng(4243);
  auto storage = PatternStorage(1 << 16);
  std::vector<ReadRequest> requests;
  uint64_t total = 0;
  for (int i = 0; i < 97; i++) {
    uint64_t length = testing::RandomInt(rng, 0, 300);
    uint64_t offset = testing::RandomInt(rng, 0, (1 << 16) - 301);
    requests.push_back({offset, length, IoTag::kData});
    total += length;
  }
  storage->Submit(requests, CoalescePolicy::Disabled());
  IoStats stats = storage->stats();
  CHECK(stats.iops == requests.size());
  CHECK(stats.bytes_read == total);
  CHECK(stats.coalesced_merges == 0);
}

TEST_CASE("coalescing never changes returned data", "[io]") {
  testing::Rng rng(4244);
  for (int round = 0; round < 30; round++) {
    auto with = PatternStorage(1 << 16);
    auto without = PatternStorage(1 << 16);
    std::vector<ReadRequest> requests;
    uint64_t n = testing::RandomInt(rng, 1, 60);
    for (uint64_t i = 0; i < n; i++) {
      uint64_t length = testing::RandomInt(rng, 0, 500);
      uint64_t offset = testing::RandomInt(rng, 0, (1 << 16) - 501);
      requests.push_back({offset, length, IoTag::kData});
    }
    CoalescePolicy policy;
    policy.max_gap = testing::RandomInt(rng, 0, 8192);
    policy.max_merged = testing::RandomInt(rng, 512, 1 << 15);
    auto a = with->Submit(requests, policy);
    auto b = without->Submit(requests, CoalescePolicy::Disabled());
    REQUIRE(a == b);
    CHECK(with->stats().iops <= without->stats().iops);
  }
}

TEST_CASE("out of bounds requests are rejected", "[io]") {
  auto storage = PatternStorage(100);
  ReadRequest bad{90, 20, IoTag::kData};
  CHECK_THROWS_AS(
      storage->Submit(std::span<const ReadRequest>(&bad, 1), CoalescePolicy{}),
      Error);
}

TEST_CASE("sector accounting counts 4 KiB sectors", "[io]") {
  auto storage = PatternStorage(1 << 16);
  ReadRequest request{4000, 200, IoTag::kData};  // straddles one boundary
  storage->Submit(std::span<const ReadRequest>(&request, 1),
                  CoalescePolicy{});
  CHECK(storage->stats().sectors_touched == 2);
}

TEST_CASE("file backend matches the in-memory backend", "[io]") {
  auto bytes = PatternBytes(1 << 16);
  auto path = std::filesystem::temp_directory_path() / "zipcol_io_test.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  auto file_storage = OpenBackend(BackendKind::kFile, {}, path.string(), true);
  auto mem_storage = OpenBackend(BackendKind::kInMemory, bytes);
  CHECK(file_storage->Size() == mem_storage->Size());
  std::vector<ReadRequest> requests = {{10, 100, IoTag::kData},
                                       {5000, 3000, IoTag::kData},
                                       {0, 0, IoTag::kMetadata}};
  auto a = file_storage->Submit(requests, CoalescePolicy{});
  auto b = mem_storage->Submit(requests, CoalescePolicy{});
  CHECK(a == b);
  // Stats are isolated per handle.
  CHECK(file_storage->stats().iops == mem_storage->stats().iops);
  std::filesystem::remove(path);
}

TEST_CASE("concurrent submits return request-ordered results", "[io]") {
  auto storage = PatternStorage(1 << 18);
  auto expected = PatternBytes(1 << 18);
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; t++) {
    threads.emplace_back([&, t] {
      testing::Rng rng(5000 + t);
      for (int round = 0; round < 50; round++) {
        std::vector<ReadRequest> requests;
        for (int i = 0; i < 20; i++) {
          uint64_t length = testing::RandomInt(rng, 1, 400);
          uint64_t offset = testing::RandomInt(rng, 0, (1 << 18) - 401);
          requests.push_back({offset, length, IoTag::kData});
        }
        auto results = storage->Submit(requests, CoalescePolicy{});
        for (size_t i = 0; i < requests.size(); i++) {
          if (!std::equal(results[i].begin(), results[i].end(),
                          expected.begin() + requests[i].offset)) {
            failures.fetch_add(1);
          }
        }
      }
    });
  }
  for (auto& thread : threads) {
    thread.join();
  }
  CHECK(failures.load() == 0);
}

TEST_CASE("expected distinct pages: single sample touches one page", "[io]") {
  CHECK(ExpectedDistinctPages(1000, 4, 8192, 1) == Catch::Approx(1.0));
  CHECK(ExpectedDistinctPages(12345, 16, 4096, 1) == Catch::Approx(1.0));
}

TEST_CASE("expected distinct pages matches Monte Carlo", "[io]") {
  struct Case {
    uint64_t rows;
    uint64_t bytes_per_row;
    uint64_t page;
    uint64_t k;
  };
  const std::vector<Case> cases = {
      {100000, 4, 8192, 5000},
      {100000, 3072, 8192, 20000},
      {1 << 20, 16, 8192, 30000},
      {50000, 64, 4096, 50},
  };
  int index = 0;
  for (const auto& c : cases) {
    double closed = ExpectedDistinctPages(c.rows, c.bytes_per_row, c.page, c.k);
    double mc = McDistinctPages(c.rows, c.bytes_per_row, c.page, c.k, 12,
                                7100 + index++);
    CHECK(std::abs(closed - mc) / mc < 0.01);
  }
}

TEST_CASE("every page is touched when sampling the whole dataset", "[io]") {
  // 3 KiB rows, two per 8 KiB page, sampling all rows.
  double distinct = ExpectedDistinctPages(100000, 3072, 8192, 100000);
  CHECK(distinct == Catch::Approx(50000.0));
}
