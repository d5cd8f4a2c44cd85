#include "iotw/csv.hpp"

#include <fstream>
#include <sstream>

#include "iotw/errors.hpp"

namespace iotw::csv {

std::vector<Row> parse(const std::string& text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;  // a separator implies a following field
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
        break;
    }
  }
  if (in_quotes) {
    throw ValueError("csv: unterminated quoted field");
  }
  if (!field.empty() || field_started || !row.empty()) {
    end_row();
  }
  return rows;
}

std::vector<Row> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValueError("csv: cannot open file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string escape(const std::string& field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

void write_file(const std::filesystem::path& path,
                const std::vector<Row>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw RuntimeFailure("csv: cannot write file: " + path.string());
  }
  for (const auto& row : rows) write_row(out, row);
}

}  // namespace iotw::csv
