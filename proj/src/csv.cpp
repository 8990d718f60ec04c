#include "csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <system_error>

#include "error.hpp"

namespace segsca {

namespace {

std::string trim_ws(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return s.substr(b, e - b);
}

} // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t CsvTable::require_column(const std::string& name,
                                     const std::string& file_label) const {
  if (auto idx = column(name)) return *idx;
  throw SchemaError(file_label + ": missing required column '" + name + "'");
}

// Streaming state machine rather than line-at-a-time parsing, because quoted
// fields may contain record separators (commas and newlines).
CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::string label = path.filename().string();
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());

  CsvTable table;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool record_has_content = false; // distinguishes data from blank lines
  std::size_t line_no = 1;
  std::size_t record_line = 1; // physical line where the record starts

  auto flush_field = [&] {
    fields.push_back(trim_ws(field));
    field.clear();
  };
  auto flush_record = [&] {
    if (!record_has_content) {
      fields.clear();
      field.clear();
      return;
    }
    flush_field();
    if (table.header.empty()) {
      table.header = std::move(fields);
    } else {
      if (fields.size() != table.header.size())
        throw ValidationError(label + " line " + std::to_string(record_line) +
                              ": expected " + std::to_string(table.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
      table.rows.push_back(std::move(fields));
      table.line_numbers.push_back(record_line);
    }
    fields = {};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
        field.push_back('\n');
        ++i;
        ++line_no;
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
      }
    } else if (c == '"') {
      if (!field.empty())
        throw ValidationError(label + " line " + std::to_string(line_no) +
                              ": stray quote inside unquoted field");
      quoted = true;
      record_has_content = true;
    } else if (c == ',') {
      flush_field();
      record_has_content = true;
    } else if (c == '\n' ||
               (c == '\r' && (i + 1 == text.size() || text[i + 1] == '\n'))) {
      if (c == '\r' && i + 1 < text.size()) ++i;
      flush_record();
      ++line_no;
      record_line = line_no;
    } else {
      field.push_back(c);
      record_has_content = true;
    }
  }
  if (quoted)
    throw ValidationError(label + " line " + std::to_string(record_line) +
                          ": unterminated quoted field");
  flush_record();

  if (table.header.empty())
    throw ValidationError(label + ": file has no header row");
  return table;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  auto needs_quotes = [](const std::string& f) {
    return f.find_first_of(",\"\n") != std::string::npos;
  };
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      if (needs_quotes(fields[i])) {
        out << '"';
        for (char c : fields[i]) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      } else {
        out << fields[i];
      }
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& cell, const std::string& context) {
  const std::string s = trim_ws(cell);
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end || s.empty())
    throw ValidationError(context + ": cannot parse number from '" + cell + "'");
  return v;
}

bool is_missing(const std::string& cell) {
  const std::string s = trim_ws(cell);
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

} // namespace segsca
