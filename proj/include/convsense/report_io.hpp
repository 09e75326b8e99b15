#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "convsense/diagnostics.hpp"
#include "convsense/errors.hpp"

// Report serialization. CSV files are UTF-8 with a header row, comma
// separated, floats printed with 17 significant digits so values round-trip
// exactly.

namespace convsense {

inline std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

inline nlohmann::json to_json(const RipParams& params) {
  nlohmann::json j;
  j["dims"] = params.dims;
  j["num_filters"] = params.num_filters;
  j["block_extent"] = params.block_extent;
  j["sparsity"] = params.sparsity;
  j["nonzero_fraction"] = params.nonzero_fraction;
  j["pooling"] = params.pooling;
  j["region_extent"] = params.region_extent;
  j["seed"] = params.seed;
  j["trials"] = params.trials;
  j["resampled"] = params.resampled;
  return j;
}

inline nlohmann::json to_json(const RipReport& report) {
  nlohmann::json j;
  j["ratios"] = report.ratios;
  j["mean"] = report.mean;
  j["stddev"] = report.stddev;
  j["min"] = report.min;
  j["max"] = report.max;
  j["delta_hat"] = report.delta_hat;
  j["params"] = to_json(report.params);
  return j;
}

inline RipReport rip_report_from_json(const nlohmann::json& j) {
  RipReport report;
  report.ratios = j.at("ratios").get<std::vector<double>>();
  report.mean = j.at("mean").get<double>();
  report.stddev = j.at("stddev").get<double>();
  report.min = j.at("min").get<double>();
  report.max = j.at("max").get<double>();
  report.delta_hat = j.at("delta_hat").get<double>();
  const auto& p = j.at("params");
  report.params.dims = p.at("dims").get<int>();
  report.params.num_filters = p.at("num_filters").get<int>();
  report.params.block_extent = p.at("block_extent").get<int>();
  report.params.sparsity = p.at("sparsity").get<int>();
  report.params.nonzero_fraction = p.at("nonzero_fraction").get<double>();
  report.params.pooling = p.at("pooling").get<std::string>();
  report.params.region_extent = p.at("region_extent").get<int>();
  report.params.seed = p.at("seed").get<std::uint64_t>();
  report.params.trials = p.at("trials").get<int>();
  report.params.resampled = p.at("resampled").get<int>();
  return report;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_json_file: cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write_json_file: write failed for " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_json_file: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

inline void write_histogram_csv(const std::string& path, const Histogram& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_histogram_csv: cannot open " + path);
  out << "bin_lo,bin_hi,count\n";
  const auto bins = static_cast<int>(h.counts.size());
  const double width = (h.hi - h.lo) / bins;
  for (int i = 0; i < bins; ++i) {
    out << format_double(h.lo + i * width) << ',' << format_double(h.lo + (i + 1) * width)
        << ',' << h.counts[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw IoError("write_histogram_csv: write failed for " + path);
}

// Generic CSV writer: one row of cells at a time, all pre-formatted.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("CsvWriter: cannot open " + path);
    write_row(header);
  }

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("CsvWriter: write failed for " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

// Minimal CSV reader used by the parse-back tests: splits on commas, no
// quoting (none of our writers quote).
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_csv: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace convsense
