#pragma once

#include <string>
#include <vector>

namespace specemu {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

// 17 significant digits, round-trip safe
std::string format_double(double v);

// Write via temp file + rename so partially written outputs never land.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace specemu
