#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace noems::csv {

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// Reads comma-separated rows, skipping blank lines. The first row must
/// equal `header` exactly (ParseError otherwise). CR line endings tolerated.
std::vector<Row> read(std::istream& in, std::string_view header);

/// Header line of a stream without consuming the data rows afterwards.
std::string peek_header(std::istream& in);

double to_double(const Row& row, std::size_t column);
long long to_int(const Row& row, std::size_t column);

/// Shortest round-trip decimal form, locale independent.
std::string number(double value);
std::string number(long long value);

}  // namespace noems::csv
