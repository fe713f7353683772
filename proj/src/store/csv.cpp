#include "store/csv.hpp"

#include "common/error.hpp"

namespace oope::store {

std::vector<CsvRecord> parse_csv(std::string_view text) {
  std::vector<CsvRecord> out;
  CsvRecord rec;
  std::string field;
  size_t line = 1;
  size_t i = 0;
  const size_t n = text.size();
  if (n >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  bool at_record_start = true;

  auto end_field = [&] {
    rec.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    out.push_back(std::move(rec));
    rec.clear();
    at_record_start = true;
    ++line;
  };

  while (i < n) {
    char c = text[i];
    if (c == '"' && field.empty()) {
      at_record_start = false;
      ++i;
      for (;;) {
        if (i >= n) fail(Errc::usage, "csv: unterminated quote starting on line " + std::to_string(line));
        if (text[i] == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field.push_back(text[i++]);
      }
      if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        fail(Errc::usage, "csv: text after closing quote on line " + std::to_string(line));
      }
      continue;
    }
    if (c == ',') {
      at_record_start = false;
      end_field();
      ++i;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < n && text[i + 1] == '\n') ++i;
      ++i;
      end_record();
    } else {
      at_record_start = false;
      field.push_back(c);
      ++i;
    }
  }
  if (!at_record_start) end_record();
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace oope::store
