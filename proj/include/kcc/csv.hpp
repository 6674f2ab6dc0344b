#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace kcc {

/// Numeric CSV table with a single header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of `name` in the header; throws SchemaError when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

/// Reads a numeric CSV. Throws IoError if the file cannot be opened and
/// SchemaError on an empty file, ragged rows or non-numeric fields.
CsvTable read_csv(const std::string& path);

/// Throws SchemaError unless `table.header` equals `expected`.
void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    const std::string& path);

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

/// Writes to `<path>.tmp` and renames on commit(). If the object dies
/// without commit() the temporary is removed and `path` is untouched.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path);
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile();

  void write(const std::string& text);
  void line(const std::vector<double>& values);
  void commit();

 private:
  std::string path_;
  std::string tmp_;
  std::FILE* f_ = nullptr;
  bool committed_ = false;
};

/// Throws IoError unless the parent directory of `path` exists.
void require_parent_directory(const std::string& path);

}  // namespace kcc
