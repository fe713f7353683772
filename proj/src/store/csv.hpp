#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace oope::store {

using CsvRecord = std::vector<std::string>;

// Comma-separated records with double-quoted fields ("" escapes a quote, quoted
// fields may hold commas and newlines). CRLF and LF line ends; a trailing newline
// does not start a record. Usage error on an unterminated quote or stray text after
// a closing quote.
std::vector<CsvRecord> parse_csv(std::string_view text);

// Quotes the field only when it holds a comma, quote or line break.
std::string csv_field(std::string_view s);

}  // namespace oope::store
