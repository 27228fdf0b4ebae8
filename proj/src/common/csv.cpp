#include "bmt/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bmt/errors.hpp"

namespace bmt {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& stage, int lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    i += 2;
                    continue;
                }
                quoted = false;
                ++i;
            } else {
                cur += c;
                ++i;
            }
        } else if (c == '"') {
            if (!cur.empty())
                throw ValidationError(stage, "malformed quoting at line " + std::to_string(lineno));
            quoted = true;
            ++i;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
            ++i;
        } else {
            cur += c;
            ++i;
        }
    }
    if (quoted)
        throw ValidationError(stage, "unterminated quote at line " + std::to_string(lineno));
    fields.push_back(cur);
    return fields;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return -1;
    return static_cast<int>(it - header.begin());
}

int CsvTable::require_column(const std::string& name, const std::string& stage) const {
    int c = column(name);
    if (c < 0) throw ValidationError(stage, "missing required column", name);
    return c;
}

CsvTable read_csv(std::istream& in, const std::string& stage) {
    CsvTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            t.header = split_line(line, stage, lineno);
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_line(line, stage, lineno);
        if (fields.size() != t.header.size())
            throw ValidationError(stage, "wrong field count at line " + std::to_string(lineno),
                                  std::to_string(fields.size()) + " fields, expected " +
                                      std::to_string(t.header.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(lineno);
    }
    if (lineno == 0) throw ValidationError(stage, "empty input, header required");
    return t;
}

CsvTable read_csv_file(const std::string& path, const std::string& stage) {
    std::ifstream in(path);
    if (!in) throw IoError(stage, "cannot open file", path);
    return read_csv(in, stage);
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_quote(fields[i]);
    }
    out << '\n';
}

std::string format_double(double v) {
    // Shortest representation that round-trips exactly.
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double_field(const std::string& field, const std::string& stage, int line,
                          const std::string& column) {
    double out = 0.0;
    const char* begin = field.c_str();
    const char* end = begin + field.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ValidationError(stage, "invalid number in column '" + column + "' at line " +
                                         std::to_string(line), field);
    return out;
}

long long parse_int_field(const std::string& field, const std::string& stage, int line,
                          const std::string& column) {
    long long out = 0;
    const char* begin = field.c_str();
    const char* end = begin + field.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ValidationError(stage, "invalid integer in column '" + column + "' at line " +
                                         std::to_string(line), field);
    return out;
}

}  // namespace bmt
