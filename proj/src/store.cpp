#include "craml/store.hpp"

#include "craml/error.hpp"
#include "craml/util.hpp"

#include <json.hpp>
#include <sqlite3.h>

#include <set>

namespace craml {

namespace {

class Db {
public:
    Db(const std::filesystem::path& path, bool create) : path_(path) {
        if (create && path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        int flags = create ? SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE : SQLITE_OPEN_READONLY;
        if (!create && !std::filesystem::exists(path)) fail_io(path.string() + ": database does not exist");
        if (sqlite3_open_v2(path.string().c_str(), &db_, flags, nullptr) != SQLITE_OK) {
            std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
            sqlite3_close(db_);
            fail_io(path.string() + ": cannot open database: " + msg);
        }
    }
    ~Db() { sqlite3_close(db_); }
    Db(const Db&) = delete;
    Db& operator=(const Db&) = delete;

    void exec(const std::string& sql) {
        char* err = nullptr;
        if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown error";
            sqlite3_free(err);
            fail_io(path_.string() + ": " + msg);
        }
    }
    sqlite3* get() { return db_; }
    [[noreturn]] void fail(std::string_view what) {
        fail_io(path_.string() + ": " + std::string(what) + ": " + sqlite3_errmsg(db_));
    }

private:
    std::filesystem::path path_;
    sqlite3* db_ = nullptr;
};

class Stmt {
public:
    Stmt(Db& db, const std::string& sql) : db_(db) {
        if (sqlite3_prepare_v2(db.get(), sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK) db.fail("prepare");
    }
    ~Stmt() { sqlite3_finalize(stmt_); }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    void bind(int i, std::string_view text) {
        sqlite3_bind_text(stmt_, i, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT);
    }
    void bind(int i, long long v) { sqlite3_bind_int64(stmt_, i, v); }
    void bind_null(int i) { sqlite3_bind_null(stmt_, i); }
    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        db_.fail("step");
    }
    void reset() {
        sqlite3_reset(stmt_);
        sqlite3_clear_bindings(stmt_);
    }
    std::string text(int i) {
        auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, i));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i))) : std::string();
    }
    long long integer(int i) { return sqlite3_column_int64(stmt_, i); }

private:
    Db& db_;
    sqlite3_stmt* stmt_ = nullptr;
};

std::string quote(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

const std::vector<std::string> kFixed = {"vendor", "effective-date", "type", "text"};

void ensure_meta(Db& db) {
    db.exec("CREATE TABLE IF NOT EXISTS craml_tables (name TEXT PRIMARY KEY, kind TEXT NOT NULL, level TEXT, "
            "columns TEXT NOT NULL, tags TEXT NOT NULL)");
}

}  // namespace

std::string store_column_name(std::string_view column) {
    if (column == "firm_name" || column == "vendor") return "vendor";
    if (column == "effective_date" || column == "effective-date") return "effective-date";
    return std::string(column);
}

void store_sqlite(const TagTable& table, const std::filesystem::path& db_path, std::string_view table_name) {
    std::vector<std::string> sql_names;
    std::set<std::string> used{"id"};
    for (const auto& c : table.columns) {
        std::string n = store_column_name(c);
        if (!used.insert(n).second) fail_data("store: column '" + c + "' collides with SQL column '" + n + "'");
        sql_names.push_back(n);
    }
    for (const auto& t : table.tags) {
        if (!used.insert(t).second) fail_data("store: tag '" + t + "' collides with a metadata column");
    }
    // fixed layout columns first, then the remaining metadata, then tags
    std::vector<std::string> layout{"id"};
    std::vector<int> source{-1};
    for (const auto& f : kFixed) {
        layout.push_back(f);
        auto it = std::find(sql_names.begin(), sql_names.end(), f);
        source.push_back(it == sql_names.end() ? -2 : static_cast<int>(it - sql_names.begin()));
    }
    for (std::size_t i = 0; i < sql_names.size(); ++i) {
        if (std::find(kFixed.begin(), kFixed.end(), sql_names[i]) != kFixed.end()) continue;
        layout.push_back(sql_names[i]);
        source.push_back(static_cast<int>(i));
    }

    Db db(db_path, true);
    db.exec("BEGIN");
    ensure_meta(db);
    db.exec("DROP TABLE IF EXISTS " + quote(table_name));
    std::string ddl = "CREATE TABLE " + quote(table_name) + " (id TEXT PRIMARY KEY";
    for (std::size_t i = 1; i < layout.size(); ++i) {
        ddl += ", " + quote(layout[i]) + (layout[i] == "effective-date" ? " DATE" : " TEXT");
    }
    for (const auto& t : table.tags) ddl += ", " + quote(t) + " INTEGER NOT NULL CHECK (" + quote(t) + " IN (0,1))";
    ddl += ")";
    db.exec(ddl);

    std::string insert = "INSERT INTO " + quote(table_name) + " VALUES (";
    for (std::size_t i = 0; i < layout.size() + table.tags.size(); ++i) insert += i ? ",?" : "?";
    insert += ")";
    Stmt st(db, insert);
    for (const auto& r : table.rows) {
        int k = 1;
        for (std::size_t i = 0; i < layout.size(); ++i, ++k) {
            if (source[i] == -1) st.bind(k, r.id);
            else if (source[i] == -2) st.bind_null(k);
            else st.bind(k, r.meta[static_cast<std::size_t>(source[i])]);
        }
        for (auto v : r.values) st.bind(k++, static_cast<long long>(v));
        st.step();
        st.reset();
    }
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t i = 0; i < table.columns.size(); ++i) cols.push_back({table.columns[i], sql_names[i]});
    Stmt meta(db, "INSERT OR REPLACE INTO craml_tables VALUES (?,?,?,?,?)");
    meta.bind(1, table_name);
    meta.bind(2, "tagtable");
    meta.bind(3, to_string(table.level));
    meta.bind(4, cols.dump());
    meta.bind(5, nlohmann::json(table.tags).dump());
    meta.step();
    db.exec("COMMIT");
}

TagTable load_sqlite(const std::filesystem::path& db_path, std::string_view table_name) {
    Db db(db_path, false);
    TagTable out;
    std::vector<std::string> sql_names;
    {
        Stmt st(db, "SELECT kind, level, columns, tags FROM craml_tables WHERE name = ?");
        st.bind(1, table_name);
        if (!st.step()) fail_data(db_path.string() + ": no table '" + std::string(table_name) + "'");
        if (st.text(0) != "tagtable") fail_data(db_path.string() + ": '" + std::string(table_name) + "' is not a tag table");
        out.level = parse_level(st.text(1));
        for (const auto& c : nlohmann::json::parse(st.text(2))) {
            out.columns.push_back(c.at(0).get<std::string>());
            sql_names.push_back(c.at(1).get<std::string>());
        }
        out.tags = nlohmann::json::parse(st.text(3)).get<std::vector<std::string>>();
    }
    std::string sql = "SELECT id";
    for (const auto& n : sql_names) sql += ", " + quote(n);
    for (const auto& t : out.tags) sql += ", " + quote(t);
    sql += " FROM " + quote(table_name) + " ORDER BY id";
    Stmt st(db, sql);
    while (st.step()) {
        TagRow r;
        r.id = st.text(0);
        int k = 1;
        for (std::size_t i = 0; i < sql_names.size(); ++i) r.meta.push_back(st.text(k++));
        for (std::size_t i = 0; i < out.tags.size(); ++i) r.values.push_back(st.integer(k++) ? 1 : 0);
        out.rows.push_back(std::move(r));
    }
    // SQLite orders by bytes, matching std::string comparison
    return out;
}

void store_predictions_sqlite(const Predictions& p, const std::filesystem::path& db_path, std::string_view table_name) {
    Db db(db_path, true);
    db.exec("BEGIN");
    ensure_meta(db);
    db.exec("DROP TABLE IF EXISTS " + quote(table_name));
    std::string ddl = "CREATE TABLE " + quote(table_name) + " (row INTEGER PRIMARY KEY, id TEXT NOT NULL, chunk TEXT NOT NULL";
    for (const auto& t : p.tags) ddl += ", " + quote(t) + " INTEGER NOT NULL";
    db.exec(ddl + ")");
    std::string insert = "INSERT INTO " + quote(table_name) + " VALUES (?,?,?";
    for (std::size_t i = 0; i < p.tags.size(); ++i) insert += ",?";
    Stmt st(db, insert + ")");
    long long n = 0;
    for (const auto& r : p.rows) {
        st.bind(1, ++n);
        st.bind(2, r.doc_id);
        st.bind(3, r.chunk);
        int k = 4;
        for (auto v : r.values) st.bind(k++, static_cast<long long>(v));
        st.step();
        st.reset();
    }
    Stmt meta(db, "INSERT OR REPLACE INTO craml_tables VALUES (?,?,NULL,?,?)");
    meta.bind(1, table_name);
    meta.bind(2, "predictions");
    meta.bind(3, "[]");
    meta.bind(4, nlohmann::json(p.tags).dump());
    meta.step();
    db.exec("COMMIT");
}

namespace {

bool is_sqlite(const std::filesystem::path& p) {
    auto e = p.extension().string();
    return e == ".db" || e == ".sqlite" || e == ".sqlite3";
}

}  // namespace

void store_table(const TagTable& table, const std::filesystem::path& target) {
    if (is_sqlite(target)) store_sqlite(table, target);
    else write_tag_table(table, target);
}

TagTable load_table(const std::filesystem::path& source) {
    return is_sqlite(source) ? load_sqlite(source) : read_tag_table(source);
}

std::vector<std::string> sqlite_tables(const std::filesystem::path& db_path) {
    Db db(db_path, false);
    Stmt st(db, "SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name");
    std::vector<std::string> out;
    while (st.step()) out.push_back(st.text(0));
    return out;
}

}  // namespace craml
