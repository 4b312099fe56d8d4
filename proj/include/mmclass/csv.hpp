#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

/// Minimal CSV/TSV plumbing shared by corpus ingestion and report writers.
/// Reader handles quoted fields, escaped quotes ("" -> ") and embedded
/// commas/newlines; writer quotes whenever a field needs it, so write/read
/// round-trips.
namespace mmc::csv {

using Row = std::vector<std::string>;

/// Parse a whole CSV document. Rows separated by LF or CRLF.
/// Throws ParseError (with 1-based row number) on an unterminated quote.
std::vector<Row> parse(const std::string& content);

/// Read + parse. Throws IoError if the file cannot be read.
std::vector<Row> read_file(const std::filesystem::path& path);

/// Quote a field if it contains a comma, quote, CR or LF.
std::string escape_field(const std::string& field);

void write_row(std::ostream& os, const Row& row);
void write_file(const std::filesystem::path& path, const std::vector<Row>& rows);

/// Split one line on tabs. No quoting; used for manifests and mapping
/// tables.
Row split_tsv(const std::string& line);

/// Read a TSV file into rows, skipping empty lines and lines starting
/// with '#'.
std::vector<Row> read_tsv_file(const std::filesystem::path& path);

}  // namespace mmc::csv
