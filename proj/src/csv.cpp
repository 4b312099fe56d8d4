#include "mmclass/csv.hpp"

#include <fstream>
#include <sstream>

#include "mmclass/error.hpp"

namespace mmc::csv {

std::vector<Row> parse(const std::string& content) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t row_start_line = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_start_line = line;
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
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
                field_started = true;  // next field exists even if empty
                break;
            case '\r':
                if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
                ++line;
                end_row();
                break;
            case '\n':
                ++line;
                end_row();
                break;
            default:
                field += c;
                field_started = true;
                break;
        }
    }
    if (in_quotes) {
        throw ParseError("csv: unterminated quoted field starting near row " +
                         std::to_string(row_start_line));
    }
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::vector<Row> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string escape_field(const std::string& field) {
    const bool needs_quotes =
        field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream& os, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << escape_field(row[i]);
    }
    os << '\n';
}

void write_file(const std::filesystem::path& path, const std::vector<Row>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& row : rows) write_row(out, row);
    if (!out) throw IoError("write failed for " + path.string());
}

Row split_tsv(const std::string& line) {
    Row fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::vector<Row> read_tsv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        rows.push_back(split_tsv(line));
    }
    return rows;
}

}  // namespace mmc::csv
