#include <gtest/gtest.h>

#include <sqlite3.h>

#include <algorithm>

#include "craml/error.hpp"
#include "craml/store.hpp"
#include "reference.hpp"

using namespace craml;
using craml::testing::TempDir;

namespace {

TagTable sample_table() {
    TagTable t;
    t.level = Level::record;
    t.columns = {"n_documents", "firm_name", "effective_date", "state"};
    t.tags = {"nopoach", "noncompete"};
    t.rows = {{"r1", {"2", "Acme, Inc.", "2014-03-01", "CA"}, {1, 0}},
              {"r2", {"1", "Bolt \"B\"", "2015-12-01", "CA"}, {0, 1}},
              {"r3", {"1", "", "", "WA"}, {0, 0}}};
    return t;
}

std::vector<std::string> sql_columns(const std::filesystem::path& db, const std::string& table) {
    sqlite3* h = nullptr;
    sqlite3_open_v2(db.string().c_str(), &h, SQLITE_OPEN_READONLY, nullptr);
    sqlite3_stmt* st = nullptr;
    std::string sql = "PRAGMA table_info(\"" + table + "\")";
    sqlite3_prepare_v2(h, sql.c_str(), -1, &st, nullptr);
    std::vector<std::string> out;
    while (sqlite3_step(st) == SQLITE_ROW) {
        out.push_back(reinterpret_cast<const char*>(sqlite3_column_text(st, 1)) + std::string(":") +
                      reinterpret_cast<const char*>(sqlite3_column_text(st, 2)));
    }
    sqlite3_finalize(st);
    sqlite3_close(h);
    return out;
}

}  // namespace

TEST(Store, ColumnNameMapping) {
    EXPECT_EQ(store_column_name("firm_name"), "vendor");
    EXPECT_EQ(store_column_name("effective_date"), "effective-date");
    EXPECT_EQ(store_column_name("state"), "state");
}

TEST(Store, SqliteLayoutAndRoundTrip) {
    TempDir dir;
    auto t = sample_table();
    store_sqlite(t, dir / "out.db");
    auto cols = sql_columns(dir / "out.db", "tags");
    std::vector<std::string> want{"id:TEXT",          "vendor:TEXT",        "effective-date:DATE", "type:TEXT",
                                  "text:TEXT",        "n_documents:TEXT",   "state:TEXT",          "nopoach:INTEGER",
                                  "noncompete:INTEGER"};
    EXPECT_EQ(cols, want);
    auto back = load_sqlite(dir / "out.db");
    EXPECT_TRUE(back == t);
    auto tables = sqlite_tables(dir / "out.db");
    EXPECT_NE(std::find(tables.begin(), tables.end(), "craml_tables"), tables.end());
}

TEST(Store, RewritingReplacesTheTable) {
    TempDir dir;
    auto t = sample_table();
    store_sqlite(t, dir / "out.db", "tags");
    t.rows.pop_back();
    store_sqlite(t, dir / "out.db", "tags");
    EXPECT_EQ(load_sqlite(dir / "out.db", "tags").rows.size(), 2u);
}

TEST(Store, DispatchesOnExtension) {
    TempDir dir;
    auto t = sample_table();
    store_table(t, dir / "t.csv");
    store_table(t, dir / "t.sqlite");
    EXPECT_TRUE(load_table(dir / "t.csv") == t);
    EXPECT_TRUE(load_table(dir / "t.sqlite") == t);
}

TEST(Store, PredictionsTable) {
    TempDir dir;
    Predictions p;
    p.tags = {"nopoach"};
    p.rows = {{"d1", "shall not hire", {1}}, {"d1", "we hire", {0}}};
    store_predictions_sqlite(p, dir / "p.db");
    auto cols = sql_columns(dir / "p.db", "predictions");
    EXPECT_EQ(cols, (std::vector<std::string>{"row:INTEGER", "id:TEXT", "chunk:TEXT", "nopoach:INTEGER"}));
    EXPECT_THROW(load_sqlite(dir / "p.db", "predictions"), Error);
}

TEST(Store, CollidingColumnsAreRejected) {
    TempDir dir;
    auto t = sample_table();
    t.columns[3] = "vendor";
    EXPECT_THROW(store_sqlite(t, dir / "x.db"), Error);
    EXPECT_THROW(load_sqlite(dir / "missing.db"), Error);
}
