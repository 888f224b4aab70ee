#include "igen/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "igen/digest.hpp"
#include "igen/error.hpp"

namespace igen {

std::string format_double_17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void append_array(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double_17(v[i]);
  }
  out += ']';
}

std::string escape_json(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (static_cast<unsigned char>(c) < 0x20) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\u%04x", c);
      out += buf;
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

std::string record_to_jsonl(const DatasetRecord& rec) {
  std::string out = "{\"domain\":\"" + escape_json(rec.domain) +
                    "\",\"label\":\"" + escape_json(rec.label) + "\",\"s0\":";
  if (rec.s0.has_value()) {
    append_array(out, *rec.s0);
  } else {
    out += "null";
  }
  out += ",\"traj\":[";
  for (size_t i = 0; i < rec.traj.size(); ++i) {
    if (i) out += ',';
    append_array(out, rec.traj[i]);
  }
  out += "],\"provenance\":{\"seed\":" + std::to_string(rec.gen_seed) +
         ",\"index\":" + std::to_string(rec.index) + "}}";
  return out;
}

DatasetRecord record_from_jsonl(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  DatasetRecord rec;
  rec.domain = j.at("domain").get<std::string>();
  rec.label = j.at("label").get<std::string>();
  if (!j.at("s0").is_null()) {
    rec.s0 = j.at("s0").get<std::vector<double>>();
  }
  rec.traj = j.at("traj").get<std::vector<std::vector<double>>>();
  rec.gen_seed = j.at("provenance").at("seed").get<uint64_t>();
  rec.index = j.at("provenance").at("index").get<int64_t>();
  return rec;
}

void write_jsonl(const std::string& path, const std::vector<DatasetRecord>& recs) {
  std::string out;
  for (const auto& rec : recs) {
    out += record_to_jsonl(rec);
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::vector<DatasetRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<DatasetRecord> recs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    recs.push_back(record_from_jsonl(line));
  }
  return recs;
}

void atomic_write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed for " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

uint64_t file_digest(const std::string& path) {
  std::string bytes = read_file(path);
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace igen
