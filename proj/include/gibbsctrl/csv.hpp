#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace gibbsctrl {

using CsvValue = std::variant<double, long long, std::string>;

// RFC-4180-style writer: header row, '.' decimal separator, 17-significant-
// digit floats, LF line endings.
class CsvWriter {
  public:
    CsvWriter(std::string path, std::vector<std::string> columns);
    void write_row(const std::vector<CsvValue>& row);
    void close();  // flushes; also done by the destructor
    ~CsvWriter();

    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

  private:
    struct Impl;
    Impl* impl_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// bundled reader for round-trip checks and downstream tooling
CsvTable read_csv(const std::string& path);

std::string csv_escape(const std::string& field);

}  // namespace gibbsctrl
