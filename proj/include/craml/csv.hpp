#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "craml/util.hpp"

namespace craml::csv {

using Row = std::vector<std::string>;

/// Picks tab when the header line has tabs and no commas, else comma.
char detect_delimiter(std::string_view header_line);

/// Streaming RFC-4180 style reader. Quoted fields may contain the
/// delimiter, doubled quotes and newlines.
class Reader {
public:
    explicit Reader(std::istream& in, char delimiter = ',');

    /// False at end of input.
    bool next(Row& row);
    /// 1-based physical line where the last returned row started.
    std::size_t line() const { return row_line_; }

private:
    std::istream& in_;
    char delim_;
    std::size_t line_ = 1;
    std::size_t row_line_ = 0;
};

struct Table {
    Row header;
    std::vector<Row> rows;
    Provenance provenance;

    /// Index of a header column, if present.
    std::optional<std::size_t> column(std::string_view name) const;
    std::size_t require_column(std::string_view name) const;
};

struct ReadOptions {
    std::optional<char> delimiter;  // auto-detect when empty
    bool provenance = true;         // consume leading `#` lines
};

Table read_table(const std::filesystem::path& path, const ReadOptions& options = {});
Table parse_table(std::string_view text, const ReadOptions& options = {});

std::string escape_field(std::string_view field, char delimiter = ',');

class Writer {
public:
    explicit Writer(std::ostream& out, char delimiter = ',') : out_(out), delim_(delimiter) {}
    void write(const Row& row);
    void write(std::initializer_list<std::string_view> row);

private:
    std::ostream& out_;
    char delim_;
};

/// Opens `path` for writing (creating parent directories) and emits the
/// provenance block.
class FileWriter {
public:
    FileWriter(const std::filesystem::path& path, const Provenance* provenance);
    void write(const Row& row) { writer_.write(row); }
    void close();
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream file_;
    Writer writer_;
};

std::string to_string(const Table& table);
void write_table(const std::filesystem::path& path, const Table& table);

}  // namespace craml::csv
