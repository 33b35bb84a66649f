#include "live/dataset.hpp"

#include "live/error.hpp"

#include "json.hpp"

#include <fstream>
#include <map>

namespace live {

std::vector<Record> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read dataset " + path);
  std::vector<Record> out;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("source").get<std::string>(), j.value("target", std::string())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyCorpus, "dataset " + path + " has no records");
  return out;
}

void save_dataset(const std::vector<Record>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write dataset " + path);
  for (const auto& r : records) out << nlohmann::json{{"source", r.source}, {"target", r.target}}.dump() << '\n';
}

std::vector<std::vector<std::string>> reference_lists(const std::vector<Record>& records, bool group_by_source) {
  std::vector<std::vector<std::string>> out;
  if (!group_by_source) {
    for (const auto& r : records) out.push_back({r.target});
    return out;
  }
  std::map<std::string, std::vector<std::string>> by_source;
  for (const auto& r : records) by_source[r.source].push_back(r.target);
  for (const auto& r : records) out.push_back(by_source[r.source]);
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace live
