#ifndef IGEN_DATASET_HPP_
#define IGEN_DATASET_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace igen {

// One JSONL line. traj is horizon x width; horizon-1 domains store a single
// row and no s0.
struct DatasetRecord {
  std::string domain;
  std::string label;
  std::optional<std::vector<double>> s0;
  std::vector<std::vector<double>> traj;
  uint64_t gen_seed = 0;
  int64_t index = 0;
};

// Canonical serialization: fixed key order, floats at full 17-significant-
// digit precision so parse -> serialize is byte-identical and values
// round-trip bit-exactly.
std::string record_to_jsonl(const DatasetRecord& rec);
DatasetRecord record_from_jsonl(const std::string& line);

void write_jsonl(const std::string& path, const std::vector<DatasetRecord>& recs);
std::vector<DatasetRecord> read_jsonl(const std::string& path);

// Writes to <path>.tmp then renames.
void atomic_write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);
uint64_t file_digest(const std::string& path);

std::string format_double_17(double v);

}  // namespace igen

#endif  // IGEN_DATASET_HPP_
