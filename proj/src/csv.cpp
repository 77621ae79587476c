#include "noems/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "noems/errors.hpp"

namespace noems::csv {

namespace {

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::size_t column_of(const Row& row, std::size_t column) {
    std::size_t col = 1;
    for (std::size_t k = 0; k < column && k < row.fields.size(); ++k) col += row.fields[k].size() + 1;
    return col;
}

}  // namespace

std::vector<Row> read(std::istream& in, std::string_view header) {
    std::string line;
    std::size_t number = 0;
    std::vector<Row> rows;
    bool seen_header = false;
    const std::size_t width = split(std::string(header)).size();
    while (std::getline(in, line)) {
        ++number;
        line = strip_cr(std::move(line));
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!seen_header) {
            if (line != header)
                throw ParseError("expected header '" + std::string(header) + "', found '" + line + "'", number, 1);
            seen_header = true;
            continue;
        }
        Row row{number, split(line)};
        if (row.fields.size() != width)
            throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(row.fields.size()),
                             number, 1);
        rows.push_back(std::move(row));
    }
    if (!seen_header) throw ParseError("empty file, expected header '" + std::string(header) + "'");
    return rows;
}

std::string peek_header(std::istream& in) {
    const auto pos = in.tellg();
    std::string line;
    while (std::getline(in, line)) {
        line = strip_cr(std::move(line));
        if (line.find_first_not_of(" \t") != std::string::npos) break;
    }
    in.clear();
    in.seekg(pos);
    return line;
}

double to_double(const Row& row, std::size_t column) {
    const std::string& f = row.fields.at(column);
    double value = 0.0;
    const auto* first = f.data();
    const auto* last = f.data() + f.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value))
        throw ParseError("not a finite number: '" + f + "'", row.line, column_of(row, column));
    return value;
}

long long to_int(const Row& row, std::size_t column) {
    const std::string& f = row.fields.at(column);
    long long value = 0;
    const auto* last = f.data() + f.size();
    auto [ptr, ec] = std::from_chars(f.data(), last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError("not an integer: '" + f + "'", row.line, column_of(row, column));
    return value;
}

std::string number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string number(long long value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

}  // namespace noems::csv
