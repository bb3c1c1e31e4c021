#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rsmp {

// Shortest representation that round-trips a double (17 significant digits,
// C locale, '.' decimal point), so artifacts are reproducible byte for byte.
std::string format_float(double v);

// Writes to <path>.tmp and renames over the target, so a failed run never
// leaves a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  const std::string& content() const { return content_; }
  void write(const std::filesystem::path& path) const { write_file_atomic(path, content_); }

 private:
  size_t columns_;
  std::string content_;
};

}  // namespace rsmp
