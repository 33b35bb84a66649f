#pragma once

#include <string>
#include <vector>

namespace live {

// One JSONL line: {"source": ..., "target": ...}.
struct Record {
  std::string source;
  std::string target;
};

std::vector<Record> load_dataset(const std::string& path);
void save_dataset(const std::vector<Record>& records, const std::string& path);

// References per record: its own target, or every target sharing its source
// when `group_by_source` is set (multi-reference corpora such as E2E).
std::vector<std::vector<std::string>> reference_lists(const std::vector<Record>& records, bool group_by_source);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::vector<std::string>& lines, const std::string& path);

}  // namespace live
