#pragma once
#include <filesystem>
#include <string>
#include <vector>

// Deterministic CSV: shortest round-trip decimal for doubles, LF endings,
// no trailing whitespace. Same inputs give byte-identical files.
namespace iontrap {

std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace iontrap
