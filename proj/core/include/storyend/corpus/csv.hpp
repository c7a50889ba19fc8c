#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace storyend::corpus {

using CsvRow = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and line
/// breaks; CRLF and LF record separators; a leading UTF-8 BOM is skipped.
/// Throws CorpusError on an unterminated quoted field.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR/LF or edge spaces.
std::string csv_field(std::string_view field);
std::string csv_line(const CsvRow& row);

}  // namespace storyend::corpus
