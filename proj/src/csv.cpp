#include "rsmp/csv.hpp"

#include <cstdio>
#include <fstream>

#include "rsmp/errors.hpp"

namespace rsmp {

std::string format_float(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

CsvBuilder::CsvBuilder(std::vector<std::string> header) : columns_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) content_ += ',';
    content_ += header[i];
  }
  content_ += '\n';
}

void CsvBuilder::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_) throw Error("csv row width does not match the header");
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) content_ += ',';
    content_ += cells[i];
  }
  content_ += '\n';
}

}  // namespace rsmp
