#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bmt {

// Minimal CSV support for the interchange formats: comma separator, optional
// double-quote quoting with "" escapes, no embedded newlines. All files are
// UTF-8 with a required header row.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // 1-based line number of each data row in the source (header is line 1).
    std::vector<int> line_numbers;

    int column(const std::string& name) const;           // -1 when absent
    int require_column(const std::string& name, const std::string& stage) const;
};

CsvTable read_csv(std::istream& in, const std::string& stage);
CsvTable read_csv_file(const std::string& path, const std::string& stage);

std::string csv_quote(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

// Canonical number formatting for CSV output: shortest round-trip decimal.
std::string format_double(double v);

double parse_double_field(const std::string& field, const std::string& stage, int line,
                          const std::string& column);
long long parse_int_field(const std::string& field, const std::string& stage, int line,
                          const std::string& column);

}  // namespace bmt
