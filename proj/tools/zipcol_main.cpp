// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zipcol/bench.hpp"
#include "zipcol/zipcol.hpp"

namespace {

using namespace zipcol;

int g_exit_code = 0;

void Require(bool condition, const std::string& message) {
  if (!condition) {
    std::cerr << "assertion failed: " << message << "\n";
    g_exit_code = 2;
  }
}

std::shared_ptr<file::FileReader> OpenReader(const std::string& path,
                                             bool coalesce, uint64_t max_gap) {
  auto storage = OpenBackend(BackendKind::kFile, {}, path);
  CoalescePolicy policy;
  policy.enabled = coalesce;
  policy.max_gap = max_gap;
  return file::FileReader::Open(storage, policy);
}

nlohmann::json RecordToJson(const bench::RunRecord& r) {
  return {
      {"scenario", r.scenario},
      {"encoding", r.encoding},
      {"workload", r.workload},
      {"rows", r.rows},
      {"k", r.k},
      {"batches", r.batches},
      {"workers", r.workers},
      {"seed", r.seed},
      {"coalesce", r.coalesce},
      {"iops", r.iops},
      {"bytes_read", r.bytes_read},
      {"useful_bytes", r.useful_bytes},
      {"read_amplification", r.read_amplification},
      {"rows_per_second", r.rows_per_second},
      {"elapsed_seconds", r.elapsed_seconds},
      {"cache_bytes", r.cache_bytes},
  };
}

void EmitRecord(const bench::RunRecord& record, const std::string& out) {
  if (out == "json") {
    std::cout << RecordToJson(record).dump() << "\n";
  } else {
    std::cout << bench::CsvHeader() << "\n" << bench::ToCsv(record) << "\n";
  }
}

int CmdGenerate(const std::string& path, const std::string& scenario_name,
                uint64_t rows, double null_fraction, uint64_t seed,
                const std::string& encoding, const std::string& codec) {
  bench::Scenario scenario =
      bench::MakeScenario(scenario_name, rows, null_fraction, seed);
  LogicalArray data = bench::Generate(scenario);

  file::WriteOptions options;
  file::ColumnOptions column;
  if (encoding == "fullzip") {
    column.force_encoding = PageEncoding::kFullZip;
  } else if (encoding == "miniblock") {
    column.force_encoding = PageEncoding::kMiniBlock;
  } else if (encoding == "arrow-baseline") {
    column.force_encoding = PageEncoding::kArrowBaseline;
  }
  if (codec == "bitpack") {
    column.codec = {CodecId::kBitPack, 0};
  } else if (codec == "dictionary") {
    column.codec = {CodecId::kDictionary, 0};
  } else if (codec == "per-value-rle") {
    column.codec = {CodecId::kPerValueBlock, kBlockRle};
  } else if (codec == "chunked-rle") {
    column.codec = {CodecId::kChunkedBlock, kBlockRle};
  }
  options.columns[scenario.name] = column;

  auto result = file::WriteFile({{scenario.name, data}}, options);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) {
    std::cerr << "cannot write " << path << "\n";
    return 1;
  }
  out.write(reinterpret_cast<const char*>(result.bytes.data()),
            static_cast<std::streamsize>(result.bytes.size()));
  out.close();

  std::cout << "wrote " << path << ": " << result.report.row_count
            << " rows, " << result.report.file_bytes << " bytes\n";
  for (const auto& column_report : result.report.columns) {
    for (const auto& leaf : column_report.leaves) {
      for (const auto& page : leaf.pages) {
        const char* name = page.encoding == PageEncoding::kFullZip
                               ? "fullzip"
                               : page.encoding == PageEncoding::kMiniBlock
                                     ? "miniblock"
                                     : "arrow-baseline";
        std::cout << "  " << column_report.name
                  << (leaf.path.empty() ? "" : "." + leaf.path) << " rows ["
                  << page.rows << "] encoding " << name << " bytes "
                  << page.encoded_bytes << " chunks " << page.chunk_count
                  << " avg_width " << page.avg_width << " cache "
                  << page.cache_payload_bytes << "\n";
      }
    }
  }
  return 0;
}

uint64_t MaxChunkBytes(const file::FileReader& reader) {
  uint64_t max_bytes = 0;
  for (const auto& column : reader.columns()) {
    for (const auto& leaf : column.leaves) {
      for (const auto& page : leaf.pages) {
        for (uint16_t word : page.miniblock.chunk_words) {
          uint64_t values = 0;
          uint64_t bytes = 0;
          miniblock::DecodeChunkMeta(word, &values, &bytes);
          max_bytes = std::max(max_bytes, bytes);
        }
      }
    }
  }
  return max_bytes;
}

int CmdTake(const std::string& path, std::string column, uint64_t k,
            uint64_t batches, uint64_t workers, uint64_t seed, bool coalesce,
            uint64_t max_gap, const std::string& out) {
  auto reader = OpenReader(path, coalesce, max_gap);
  if (column.empty()) {
    column = reader->columns().at(0).name;
  }
  bench::TakeWorkload workload{k, batches, workers, seed};
  uint64_t planned = 0;
  bench::RunRecord record = bench::RunTake(*reader, column, workload, coalesce,
                                           &planned);
  record.scenario = column;

  if (!coalesce) {
    Require(record.iops == planned,
            "planned IOPS (" + std::to_string(planned) +
                ") != observed IOPS (" + std::to_string(record.iops) + ")");
  }
  uint64_t taken = k * batches;
  if (record.encoding == "fullzip") {
    Require(record.iops <= 2 * taken, "full-zip take exceeded 2 IOPS per row");
  } else if (record.encoding == "miniblock") {
    Require(record.iops <= taken, "miniblock take exceeded one IOP per row");
    uint64_t max_chunk = MaxChunkBytes(*reader);
    Require(max_chunk <= 32760, "a miniblock chunk exceeds 32 KiB");
    if (!coalesce) {
      Require(record.bytes_read <= record.iops * max_chunk,
              "take read more than one chunk per IOP");
    }
  }
  EmitRecord(record, out);
  return g_exit_code;
}

int CmdScan(const std::string& path, std::string column, bool coalesce,
            uint64_t max_gap, const std::string& out) {
  auto reader = OpenReader(path, coalesce, max_gap);
  if (column.empty()) {
    column = reader->columns().at(0).name;
  }
  bench::RunRecord record = bench::RunScan(*reader, column);
  record.scenario = column;
  uint64_t expected = bench::ExpectedScanBytes(*reader, column);
  Require(record.bytes_read == expected,
          "scan bytes (" + std::to_string(record.bytes_read) +
              ") != sum of data extents (" + std::to_string(expected) +
              "); repetition indices must not be read");
  bool has_fullzip_index = false;
  for (const auto& meta : reader->columns()) {
    for (const auto& leaf : meta.leaves) {
      for (const auto& page : leaf.pages) {
        if (page.encoding == PageEncoding::kFullZip &&
            page.fullzip.rep_index.length > 0) {
          has_fullzip_index = true;
        }
      }
    }
  }
  if (has_fullzip_index) {
    std::cout << "# full scan skipped the repetition index extents\n";
  }
  EmitRecord(record, out);
  return g_exit_code;
}

int CmdCoalesceModel(const std::vector<uint64_t>& rows_list,
                     const std::vector<uint64_t>& value_sizes,
                     uint64_t page_bytes, uint64_t k,
                     const std::string& out) {
  nlohmann::json json_rows = nlohmann::json::array();
  if (out != "json") {
    std::cout << "rows,value_bytes,page_bytes,k,expected_distinct_pages,"
                 "multi_hit_page_fraction\n";
  }
  for (uint64_t value_bytes : value_sizes) {
    for (uint64_t rows : rows_list) {
      double distinct = ExpectedDistinctPages(rows, value_bytes, page_bytes, k);
      double overlap =
          ExpectedPageOverlapFraction(rows, value_bytes, page_bytes, k);
      if (out == "json") {
        json_rows.push_back({{"rows", rows},
                             {"value_bytes", value_bytes},
                             {"page_bytes", page_bytes},
                             {"k", k},
                             {"expected_distinct_pages", distinct},
                             {"multi_hit_page_fraction", overlap}});
      } else {
        std::cout << rows << ',' << value_bytes << ',' << page_bytes << ','
                  << k << ',' << distinct << ',' << overlap << "\n";
      }
    }
  }
  if (out == "json") {
    std::cout << json_rows.dump() << "\n";
  }
  return 0;
}

int CmdInspect(const std::string& path) {
  auto reader = OpenReader(path, false, 0);
  std::cout << "file: " << path << "\n";
  std::cout << "rows: " << reader->row_count() << "\n";
  std::cout << "columns: " << reader->columns().size() << "\n";
  std::cout << "search cache bytes: " << reader->cache_bytes() << "\n";
  for (const auto& column : reader->columns()) {
    std::cout << "column " << column.name << ": " << column.dtype.ToString()
              << (column.packing == StructPacking::kPackedStruct
                      ? " (packed)"
                      : "")
              << "\n";
    for (const auto& leaf : column.leaves) {
      std::cout << "  leaf '" << leaf.path << "': " << leaf.pages.size()
                << " page(s)\n";
      for (const auto& page : leaf.pages) {
        std::cout << "    rows [" << page.row_begin << ", " << page.row_end
                  << ") ";
        switch (page.encoding) {
          case PageEncoding::kFullZip: {
            const auto& m = page.fullzip;
            std::cout << "fullzip: data " << m.data.length << " B, rep index "
                      << m.rep_index.length << " B, control words "
                      << ControlWordSpec::For(m.max_rep, m.max_def).width_bytes
                      << " B";
            if (m.fixed_record_width != 0) {
              std::cout << ", fixed record " << m.fixed_record_width << " B";
            }
            std::cout << "\n";
            break;
          }
          case PageEncoding::kMiniBlock: {
            const auto& m = page.miniblock;
            std::cout << "miniblock: data " << m.data.length << " B, "
                      << m.chunk_words.size() << " chunk(s)";
            std::map<uint64_t, uint64_t> histogram;
            for (uint16_t word : m.chunk_words) {
              uint64_t values = 0;
              uint64_t bytes = 0;
              miniblock::DecodeChunkMeta(word, &values, &bytes);
              histogram[values]++;
            }
            std::cout << ", value-count histogram {";
            bool first = true;
            for (const auto& [values, count] : histogram) {
              if (!first) std::cout << ", ";
              std::cout << values << ": " << count;
              first = false;
            }
            std::cout << "}, cache "
                      << miniblock::CachePayloadBytes(
                             m.chunk_words.size(), m.rep_int_width > 0,
                             m.rep_int_width, m.codec.aux.size())
                      << " B\n";
            break;
          }
          case PageEncoding::kArrowBaseline: {
            std::cout << "arrow-baseline: " << page.arrow_extents.size()
                      << " extents [";
            for (size_t i = 0; i < page.arrow_extents.size(); i++) {
              const auto& e = page.arrow_extents[i];
              if (i > 0) std::cout << ", ";
              std::cout << (e.role == ArrowRole::kValidity
                                ? "validity"
                                : e.role == ArrowRole::kOffsets ? "offsets"
                                                                : "data")
                        << " " << e.extent.length << " B";
            }
            std::cout << "]\n";
            break;
          }
        }
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zipcol: adaptive structural encoding benchmark tool"};
  app.require_subcommand(1);

  std::string path;
  std::string scenario = "scalar";
  std::string column;
  std::string encoding = "auto";
  std::string codec = "passthrough";
  std::string out = "csv";
  uint64_t rows = 0;
  double null_fraction = 0.10;
  uint64_t seed = 42;
  uint64_t k = 256;
  uint64_t batches = 8;
  uint64_t workers = 0;
  std::string coalesce = "on";
  uint64_t max_gap = 4096;
  std::vector<uint64_t> model_rows = {100000,     1000000,    10000000,
                                      100000000,  1000000000, 4000000000};
  std::vector<uint64_t> model_sizes = {4, 16, 3072};
  uint64_t page_bytes = 8192;
  uint64_t model_k = 100000;

  auto* generate = app.add_subcommand("generate", "write a scenario file");
  generate->add_option("file", path)->required();
  generate->add_option("--scenario", scenario)
      ->check(CLI::IsMember({"scalar", "string", "scalar-list", "string-list",
                             "vector", "vector-list", "image", "image-list"}));
  generate->add_option("--rows", rows, "0 = desk-scale default");
  generate->add_option("--null-fraction", null_fraction);
  generate->add_option("--seed", seed);
  generate->add_option("--encoding", encoding)
      ->check(CLI::IsMember({"auto", "fullzip", "miniblock", "arrow-baseline"}));
  generate->add_option("--codec", codec)
      ->check(CLI::IsMember({"passthrough", "bitpack", "dictionary",
                             "per-value-rle", "chunked-rle"}));

  auto* take = app.add_subcommand("take", "random-access benchmark");
  take->add_option("file", path)->required();
  take->add_option("--column", column);
  take->add_option("--k", k);
  take->add_option("--batches", batches);
  take->add_option("--workers", workers, "0 = logical cores");
  take->add_option("--seed", seed);
  take->add_option("--coalesce", coalesce)->check(CLI::IsMember({"on", "off"}));
  take->add_option("--max-gap", max_gap);
  take->add_option("--out", out)->check(CLI::IsMember({"csv", "json"}));

  auto* scan = app.add_subcommand("scan", "sequential scan benchmark");
  scan->add_option("file", path)->required();
  scan->add_option("--column", column);
  scan->add_option("--coalesce", coalesce)->check(CLI::IsMember({"on", "off"}));
  scan->add_option("--max-gap", max_gap);
  scan->add_option("--out", out)->check(CLI::IsMember({"csv", "json"}));

  auto* model = app.add_subcommand("coalesce-model",
                                   "expected distinct pages vs dataset size");
  model->add_option("--rows", model_rows);
  model->add_option("--value-bytes", model_sizes);
  model->add_option("--page-bytes", page_bytes);
  model->add_option("--k", model_k);
  model->add_option("--out", out)->check(CLI::IsMember({"csv", "json"}));

  auto* inspect = app.add_subcommand("inspect", "dump file structure");
  inspect->add_option("file", path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      return CmdGenerate(path, scenario, rows, null_fraction, seed, encoding,
                         codec);
    }
    if (take->parsed()) {
      return CmdTake(path, column, k, batches, workers, seed,
                     coalesce == "on", max_gap, out);
    }
    if (scan->parsed()) {
      return CmdScan(path, column, coalesce == "on", max_gap, out);
    }
    if (model->parsed()) {
      return CmdCoalesceModel(model_rows, model_sizes, page_bytes, model_k,
                              out);
    }
    if (inspect->parsed()) {
      return CmdInspect(path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
