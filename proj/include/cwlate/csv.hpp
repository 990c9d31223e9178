#pragma once

#include <map>
#include <string>
#include <vector>

namespace cwlate {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

// Minimal RFC-4180-style reader: quoted fields, escaped quotes, no embedded
// newlines. Throws std::runtime_error with a line number on malformed input.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const CsvTable& table);

}  // namespace cwlate
