#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace iotw::csv {

using Row = std::vector<std::string>;

// RFC-4180 style: comma separated, optional double-quoting, "" escapes a
// quote, quoted fields may contain commas and newlines. CRLF and LF both
// accepted. A trailing newline does not produce an empty row.
std::vector<Row> parse(const std::string& text);
std::vector<Row> read_file(const std::filesystem::path& path);

std::string escape(const std::string& field);
void write_row(std::ostream& out, const Row& row);
void write_file(const std::filesystem::path& path,
                const std::vector<Row>& rows);

}  // namespace iotw::csv
