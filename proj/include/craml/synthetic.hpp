#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace craml {

struct SyntheticOptions {
    std::size_t documents = 2000;
    std::size_t docs_per_record = 2;
    int first_year = 2013;
    /// Planted share of positive records per year; its length sets the
    /// number of years.
    std::vector<double> prevalence = {0.50, 0.55, 0.60, 0.60, 0.60, 0.45, 0.35, 0.35, 0.35, 0.35};
    std::uint64_t seed = 1;
    /// Leave December out of the last year.
    bool partial_final_year = false;
};

struct PlantedYear {
    int year = 0;
    std::size_t records = 0;
    std::size_t positive = 0;
    double percent = 0.0;
};

struct SyntheticCorpus {
    std::filesystem::path corpus_dir;
    std::filesystem::path metadata;
    std::filesystem::path keywords;
    std::filesystem::path rules;
    std::filesystem::path planted;  // record_id,year,nopoach
    std::vector<PlantedYear> years;
    std::size_t documents = 0;
    std::size_t records = 0;
};

/// Franchise-style contracts with no-poach clauses planted into a chosen
/// share of records each year, plus keyword-bearing clauses that are not
/// no-poach (felony screening, vendor access, customer solicitation...).
/// Writes documents/, metadata.csv, keywords.json, rules/nopoach.csv and
/// planted.csv under `dir`.
SyntheticCorpus generate_synthetic(const std::filesystem::path& dir, const SyntheticOptions& options);

std::string synthetic_keywords_json();
std::string synthetic_rules_csv();

/// Project config (`craml.json`) for a corpus written by generate_synthetic,
/// with the project directory alongside the inputs.
std::string synthetic_project_config(std::uint64_t seed);

}  // namespace craml
