#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "craml/dataset.hpp"

namespace craml {

/// SQL column name used for a tag-table metadata column. firm_name maps to
/// `vendor`, effective_date to `effective-date`; others keep their name.
std::string store_column_name(std::string_view column);

/// Writes (replacing) `table_name` in a SQLite file. Layout:
///   id TEXT PRIMARY KEY, vendor TEXT, "effective-date" DATE, type TEXT,
///   text TEXT, <other metadata> TEXT, <tags> INTEGER
/// plus a `craml_tables` row describing the column mapping.
void store_sqlite(const TagTable& table, const std::filesystem::path& db, std::string_view table_name = "tags");
TagTable load_sqlite(const std::filesystem::path& db, std::string_view table_name = "tags");

/// Chunk-level predictions: row INTEGER PRIMARY KEY, id, chunk, <tags>.
void store_predictions_sqlite(const Predictions& predictions, const std::filesystem::path& db,
                              std::string_view table_name = "predictions");

/// Dispatches on extension: .db/.sqlite/.sqlite3 use SQLite, anything else
/// delimited text.
void store_table(const TagTable& table, const std::filesystem::path& target);
TagTable load_table(const std::filesystem::path& source);

std::vector<std::string> sqlite_tables(const std::filesystem::path& db);

}  // namespace craml
