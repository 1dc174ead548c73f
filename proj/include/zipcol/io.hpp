// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#if defined(_WIN32)
#include <fstream>
#include <mutex>
#else
#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#endif

#include "zipcol/common.hpp"

namespace zipcol {

enum class IoTag : uint8_t {
  kMetadata = 0,
  kSearchCache = 1,
  kRepIndex = 2,
  kData = 3,
};

struct ReadRequest {
  uint64_t offset = 0;
  uint64_t length = 0;
  IoTag tag = IoTag::kData;
};

constexpr uint64_t kSectorBytes = 4096;

// Counters over logical IOPS (requests after coalescing), not system calls.
struct IoStats {
  uint64_t iops = 0;
  uint64_t bytes_read = 0;
  uint64_t coalesced_merges = 0;
  uint64_t sectors_touched = 0;

  IoStats operator-(const IoStats& other) const {
    return {iops - other.iops, bytes_read - other.bytes_read,
            coalesced_merges - other.coalesced_merges,
            sectors_touched - other.sectors_touched};
  }
};

struct CoalescePolicy {
  bool enabled = true;
  uint64_t max_gap = 4096;          // merge requests separated by at most this
  uint64_t max_merged = 1 << 20;    // never grow a merged read beyond this

  static CoalescePolicy Disabled() { return {false, 0, 0}; }
};

// --- Storage backends ---

class Source {
 public:
  virtual ~Source() = default;
  [[nodiscard]] virtual uint64_t Size() const = 0;
  virtual void ReadAt(uint64_t offset, std::span<uint8_t> out) const = 0;
  [[nodiscard]] virtual bool cache_bypass_active() const { return false; }
};

class MemorySource : public Source {
 public:
  explicit MemorySource(std::vector<uint8_t> bytes)
      : bytes_(std::move(bytes)) {}

  [[nodiscard]] uint64_t Size() const override { return bytes_.size(); }

  void ReadAt(uint64_t offset, std::span<uint8_t> out) const override {
    Check(offset + out.size() <= bytes_.size(), ErrorCode::kOutOfRange,
          "read past end of source");
    std::memcpy(out.data(), bytes_.data() + offset, out.size());
  }

 private:
  std::vector<uint8_t> bytes_;
};

#if defined(_WIN32)

class FileSource : public Source {
 public:
  explicit FileSource(const std::string& path, bool /*bypass_cache*/ = false)
      : stream_(path, std::ios::binary) {
    Check(stream_.good(), ErrorCode::kIo, "cannot open " + path);
    stream_.seekg(0, std::ios::end);
    size_ = static_cast<uint64_t>(stream_.tellg());
  }

  [[nodiscard]] uint64_t Size() const override { return size_; }

  void ReadAt(uint64_t offset, std::span<uint8_t> out) const override {
    Check(offset + out.size() <= size_, ErrorCode::kOutOfRange,
          "read past end of file");
    std::lock_guard<std::mutex> lock(mutex_);
    stream_.seekg(static_cast<std::streamoff>(offset));
    stream_.read(reinterpret_cast<char*>(out.data()),
                 static_cast<std::streamsize>(out.size()));
    Check(stream_.good() || out.empty(), ErrorCode::kIo, "short read");
  }

 private:
  mutable std::ifstream stream_;
  mutable std::mutex mutex_;
  uint64_t size_ = 0;
};

#else

class FileSource : public Source {
 public:
  // `bypass_cache` drops any cached pages for the file at open time; reads
  // afterwards still go through the page cache, so repeated benchmark runs
  // should treat results as cache-warm.
  explicit FileSource(const std::string& path, bool bypass_cache = false) {
    fd_ = ::open(path.c_str(), O_RDONLY);
    Check(fd_ >= 0, ErrorCode::kIo, "cannot open " + path);
    struct stat st {};
    Check(::fstat(fd_, &st) == 0, ErrorCode::kIo, "cannot stat " + path);
    size_ = static_cast<uint64_t>(st.st_size);
#if defined(POSIX_FADV_DONTNEED)
    if (bypass_cache) {
      bypass_ = ::posix_fadvise(fd_, 0, 0, POSIX_FADV_DONTNEED) == 0;
    }
#else
    (void)bypass_cache;
#endif
  }

  ~FileSource() override {
    if (fd_ >= 0) {
      ::close(fd_);
    }
  }

  FileSource(const FileSource&) = delete;
  FileSource& operator=(const FileSource&) = delete;

  [[nodiscard]] uint64_t Size() const override { return size_; }

  void ReadAt(uint64_t offset, std::span<uint8_t> out) const override {
    Check(offset + out.size() <= size_, ErrorCode::kOutOfRange,
          "read past end of file");
    uint64_t done = 0;
    while (done < out.size()) {
      ssize_t n = ::pread(fd_, out.data() + done, out.size() - done,
                          static_cast<off_t>(offset + done));
      Check(n > 0, ErrorCode::kIo, "short read");
      done += static_cast<uint64_t>(n);
    }
  }

  [[nodiscard]] bool cache_bypass_active() const override { return bypass_; }

 private:
  int fd_ = -1;
  uint64_t size_ = 0;
  bool bypass_ = false;
};

#endif

enum class BackendKind { kInMemory, kFile };

// --- Request execution with accounting ---

// Wraps a source with IOP/byte accounting and request coalescing.  Results
// are returned in request order regardless of how requests were merged.
class Storage {
 public:
  explicit Storage(std::shared_ptr<Source> source)
      : source_(std::move(source)) {}

  [[nodiscard]] const Source& source() const { return *source_; }
  [[nodiscard]] uint64_t Size() const { return source_->Size(); }

  [[nodiscard]] IoStats stats() const {
    return {iops_.load(), bytes_read_.load(), coalesced_merges_.load(),
            sectors_touched_.load()};
  }

  std::vector<std::vector<uint8_t>> Submit(
      std::span<const ReadRequest> requests, const CoalescePolicy& policy) {
    for (const auto& request : requests) {
      Check(request.offset + request.length <= source_->Size(),
            ErrorCode::kOutOfRange,
            "request [" + std::to_string(request.offset) + ", +" +
                std::to_string(request.length) + ") out of bounds");
    }
    std::vector<size_t> order(requests.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return requests[a].offset < requests[b].offset;
    });

    struct Merged {
      uint64_t offset = 0;
      uint64_t length = 0;
      std::vector<uint8_t> data;
    };
    std::vector<Merged> merged;
    std::vector<size_t> request_to_merged(requests.size());
    uint64_t merges = 0;
    for (size_t index : order) {
      const ReadRequest& request = requests[index];
      bool can_merge = false;
      if (policy.enabled && !merged.empty() && request.length > 0) {
        Merged& last = merged.back();
        if (last.length > 0) {
          uint64_t last_end = last.offset + last.length;
          uint64_t new_end =
              std::max(last_end, request.offset + request.length);
          can_merge = request.offset <= last_end + policy.max_gap &&
                      new_end - last.offset <= policy.max_merged;
          if (can_merge) {
            last.length = new_end - last.offset;
            merges++;
          }
        }
      }
      if (!can_merge) {
        merged.push_back({request.offset, request.length, {}});
      }
      request_to_merged[index] = merged.size() - 1;
    }

    uint64_t bytes = 0;
    uint64_t sectors = 0;
    for (auto& read : merged) {
      read.data.resize(read.length);
      source_->ReadAt(read.offset, read.data);
      bytes += read.length;
      if (read.length > 0) {
        sectors += (read.offset + read.length - 1) / kSectorBytes -
                   read.offset / kSectorBytes + 1;
      }
    }
    iops_.fetch_add(merged.size());
    bytes_read_.fetch_add(bytes);
    coalesced_merges_.fetch_add(merges);
    sectors_touched_.fetch_add(sectors);

    std::vector<std::vector<uint8_t>> results(requests.size());
    for (size_t i = 0; i < requests.size(); i++) {
      const Merged& read = merged[request_to_merged[i]];
      const ReadRequest& request = requests[i];
      results[i].assign(
          read.data.begin() + (request.offset - read.offset),
          read.data.begin() + (request.offset - read.offset) + request.length);
    }
    return results;
  }

  // Convenience for a single read.
  std::vector<uint8_t> ReadOne(uint64_t offset, uint64_t length, IoTag tag) {
    ReadRequest request{offset, length, tag};
    return Submit(std::span<const ReadRequest>(&request, 1),
                  CoalescePolicy::Disabled())[0];
  }

 private:
  std::shared_ptr<Source> source_;
  std::atomic<uint64_t> iops_{0};
  std::atomic<uint64_t> bytes_read_{0};
  std::atomic<uint64_t> coalesced_merges_{0};
  std::atomic<uint64_t> sectors_touched_{0};
};

inline std::shared_ptr<Storage> OpenBackend(BackendKind kind,
                                            std::vector<uint8_t> bytes,
                                            const std::string& path = "",
                                            bool bypass_cache = false) {
  if (kind == BackendKind::kInMemory) {
    return std::make_shared<Storage>(
        std::make_shared<MemorySource>(std::move(bytes)));
  }
  return std::make_shared<Storage>(
      std::make_shared<FileSource>(path, bypass_cache));
}

// --- Coalesced-access occupancy model ---

namespace io_model {

// log(C(n, k)) via lgamma.
inline double LogChoose(double n, double k) {
  if (k < 0 || k > n) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

}  // namespace io_model

// Expected number of distinct pages touched when sampling `sample_k` distinct
// rows uniformly from a dataset of `total_rows` rows packed `page_bytes /
// bytes_per_row` to a page (row-to-page occupancy, sampling without
// replacement).
inline double ExpectedDistinctPages(uint64_t total_rows,
                                    uint64_t bytes_per_row,
                                    uint64_t page_bytes, uint64_t sample_k) {
  Check(total_rows > 0 && bytes_per_row > 0 && page_bytes >= bytes_per_row,
        ErrorCode::kInvalid, "page must hold at least one row");
  uint64_t rows_per_page = page_bytes / bytes_per_row;
  uint64_t pages = bit_util::CeilDiv(total_rows, rows_per_page);
  uint64_t k = std::min(sample_k, total_rows);
  auto untouched = [&](uint64_t rows_in_page) {
    double log_h = io_model::LogChoose(
                       static_cast<double>(total_rows - rows_in_page),
                       static_cast<double>(k)) -
                   io_model::LogChoose(static_cast<double>(total_rows),
                                       static_cast<double>(k));
    return std::exp(log_h);
  };
  uint64_t last_rows = total_rows - rows_per_page * (pages - 1);
  double expected = 0;
  if (pages > 1) {
    expected += static_cast<double>(pages - 1) * (1.0 - untouched(rows_per_page));
  }
  expected += 1.0 - untouched(last_rows);
  return expected;
}

// Expected number of pages receiving two or more samples, as a fraction of
// all pages.  This is the share of the dataset where coalescing can help at
// all; it tends to zero as datasets grow.
inline double ExpectedPageOverlapFraction(uint64_t total_rows,
                                          uint64_t bytes_per_row,
                                          uint64_t page_bytes,
                                          uint64_t sample_k) {
  Check(total_rows > 0 && bytes_per_row > 0 && page_bytes >= bytes_per_row,
        ErrorCode::kInvalid, "page must hold at least one row");
  uint64_t rows_per_page = page_bytes / bytes_per_row;
  uint64_t pages = bit_util::CeilDiv(total_rows, rows_per_page);
  uint64_t k = std::min(sample_k, total_rows);
  double n = static_cast<double>(total_rows);
  double log_total = io_model::LogChoose(n, static_cast<double>(k));
  auto multi_hit = [&](uint64_t rows_in_page) {
    double m = static_cast<double>(rows_in_page);
    // 1 - P(no hit) - P(exactly one hit) under sampling without replacement.
    double h0 = std::exp(io_model::LogChoose(n - m, static_cast<double>(k)) -
                         log_total);
    double h1 = k == 0 ? 0
                       : std::exp(std::log(m) +
                                  io_model::LogChoose(
                                      n - m, static_cast<double>(k - 1)) -
                                  log_total);
    return std::max(0.0, 1.0 - h0 - h1);
  };
  uint64_t last_rows = total_rows - rows_per_page * (pages - 1);
  double multi = multi_hit(last_rows);
  if (pages > 1) {
    multi += static_cast<double>(pages - 1) * multi_hit(rows_per_page);
  }
  return multi / static_cast<double>(pages);
}

}  // namespace zipcol
