#pragma once

#include <string>
#include <vector>

namespace cardmatch {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, -1 if absent.
  int column(const std::string& name) const;
};

// Strict reader: UTF-8, comma separator, one header row, every row must have
// the same field count. Quoted fields with doubled-quote escapes are accepted.
CsvTable read_csv(const std::string& path);

std::string csv_escape(const std::string& field);

// Locale-independent shortest representation that round-trips the double.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
// Write via a temp file in the same directory, then rename into place.
void write_text_file_atomic(const std::string& path,
                            const std::string& content);

}  // namespace cardmatch
