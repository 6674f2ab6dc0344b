#include "kcc/csv.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kcc/errors.hpp"

namespace kcc {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = field.find_first_not_of(' ');
    out.push_back(start == std::string::npos ? std::string() : field.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw SchemaError("CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::column_values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \r\t") == std::string::npos) {
    throw SchemaError("'" + path + "' is empty (missing header)");
  }
  table.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    const auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw SchemaError("'" + path + "' line " + std::to_string(lineno) + ": expected " +
                        std::to_string(table.header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const char* b = fields[i].data();
      const char* e = b + fields[i].size();
      auto [ptr, ec] = std::from_chars(b, e, row[i]);
      if (ec != std::errc() || ptr != e) {
        // from_chars rejects "inf"/"nan" spellings produced by some writers.
        char* end = nullptr;
        row[i] = std::strtod(fields[i].c_str(), &end);
        if (fields[i].empty() || end != fields[i].c_str() + fields[i].size()) {
          throw SchemaError("'" + path + "' line " + std::to_string(lineno) +
                            ": non-numeric field '" + fields[i] + "'");
        }
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    const std::string& path) {
  if (table.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw SchemaError("'" + path + "' has an unexpected header, expected '" + want + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void require_parent_directory(const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw IoError("directory '" + parent.string() + "' does not exist");
  }
}

AtomicFile::AtomicFile(std::string path) : path_(std::move(path)), tmp_(path_ + ".tmp") {
  require_parent_directory(path_);
  f_ = std::fopen(tmp_.c_str(), "wb");
  if (!f_) throw IoError("cannot open '" + tmp_ + "' for writing: " + std::strerror(errno));
}

AtomicFile::~AtomicFile() {
  if (f_) std::fclose(f_);
  if (!committed_) std::remove(tmp_.c_str());
}

void AtomicFile::write(const std::string& text) {
  if (std::fwrite(text.data(), 1, text.size(), f_) != text.size()) {
    throw IoError("write to '" + tmp_ + "' failed");
  }
}

void AtomicFile::line(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += format_double(values[i]);
  }
  s += '\n';
  write(s);
}

void AtomicFile::commit() {
  if (std::fclose(f_) != 0) {
    f_ = nullptr;
    throw IoError("closing '" + tmp_ + "' failed");
  }
  f_ = nullptr;
  std::error_code ec;
  std::filesystem::rename(tmp_, path_, ec);
  if (ec) throw IoError("cannot move '" + tmp_ + "' to '" + path_ + "': " + ec.message());
  committed_ = true;
}

}  // namespace kcc
