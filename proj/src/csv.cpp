#include "craml/csv.hpp"

#include "craml/error.hpp"

#include <sstream>

namespace craml::csv {

char detect_delimiter(std::string_view header_line) {
    bool has_tab = header_line.find('\t') != std::string_view::npos;
    bool has_comma = header_line.find(',') != std::string_view::npos;
    return (has_tab && !has_comma) ? '\t' : ',';
}

Reader::Reader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

bool Reader::next(Row& row) {
    row.clear();
    int c = in_.peek();
    if (c == std::char_traits<char>::eof()) return false;
    row_line_ = line_;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (;;) {
        c = in_.get();
        if (c == std::char_traits<char>::eof()) {
            if (quoted) fail_data("unterminated quoted field starting on line " + std::to_string(row_line_));
            row.push_back(std::move(field));
            return true;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line_;
                field += ch;
            }
            continue;
        }
        if (ch == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (ch == delim_) {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (ch == '\r' && in_.peek() == '\n') {
            continue;
        } else if (ch == '\n') {
            ++line_;
            row.push_back(std::move(field));
            return true;
        } else {
            field += ch;
            field_started = true;
        }
    }
}

std::optional<std::size_t> Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
    auto c = column(name);
    if (!c) fail_data("missing column '" + std::string(name) + "'");
    return *c;
}

namespace {

Table parse_stream(std::istream& in, const ReadOptions& options) {
    Table table;
    if (options.provenance) table.provenance = Provenance::read(in);
    char delim = ',';
    if (options.delimiter) {
        delim = *options.delimiter;
    } else {
        std::streampos pos = in.tellg();
        std::string first;
        std::getline(in, first);
        delim = detect_delimiter(first);
        in.clear();
        in.seekg(pos);
    }
    Reader reader(in, delim);
    Row row;
    if (!reader.next(row)) return table;
    table.header = std::move(row);
    if (!table.header.empty() && table.header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        table.header[0].erase(0, 3);
    }
    while (reader.next(row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace

Table read_table(const std::filesystem::path& path, const ReadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_io("cannot open " + path.string());
    return parse_stream(in, options);
}

Table parse_table(std::string_view text, const ReadOptions& options) {
    std::istringstream in{std::string(text)};
    return parse_stream(in, options);
}

std::string escape_field(std::string_view field, char delimiter) {
    bool needs = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos;
    if (!needs && !field.empty() && field.front() == '#') needs = true;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void Writer::write(const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out_ << delim_;
        out_ << escape_field(row[i], delim_);
    }
    out_ << '\n';
}

void Writer::write(std::initializer_list<std::string_view> row) {
    bool first = true;
    for (auto field : row) {
        if (!first) out_ << delim_;
        first = false;
        out_ << escape_field(field, delim_);
    }
    out_ << '\n';
}

FileWriter::FileWriter(const std::filesystem::path& path, const Provenance* provenance)
    : path_(path), writer_(file_) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) fail_io("cannot write " + path.string());
    if (provenance) provenance->write(file_);
}

void FileWriter::close() {
    file_.flush();
    if (!file_) fail_io("write failed for " + path_.string());
    file_.close();
}

std::string to_string(const Table& table) {
    std::ostringstream out;
    if (!table.provenance.artifact.empty()) table.provenance.write(out);
    Writer w(out);
    w.write(table.header);
    for (const auto& r : table.rows) w.write(r);
    return std::move(out).str();
}

void write_table(const std::filesystem::path& path, const Table& table) {
    write_file(path, to_string(table));
}

}  // namespace craml::csv
