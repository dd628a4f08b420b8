#pragma once

#include <cstddef>
#include <span>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "craml/extrapolation.hpp"

namespace craml {

struct CoderRow {
    std::string sample_id;
    std::string chunk;
};

struct AnswerKeyRow {
    std::string sample_id;
    std::string doc_id;
    std::string rule;
    std::string chunk;
    std::vector<std::uint8_t> values;
};

/// Blind coding sample. The coder file carries only ids and chunks; the
/// answer key stays with the researcher.
struct ValidationSample {
    std::vector<std::string> tags;
    std::vector<CoderRow> coder_rows;
    std::vector<AnswerKeyRow> key_rows;
};

/// Draws min(per_rule_n, available) rows per catching rule (NEGATIVE counts
/// as a rule), weighting rows with any positive tag by `positive_boost`.
ValidationSample make_validation_sample(const TrainingSet& training, std::size_t per_rule_n,
                                        double positive_boost, std::uint64_t seed);

std::string coder_file_csv(const ValidationSample& sample);
std::string answer_key_csv(const ValidationSample& sample);
void write_validation_sample(const ValidationSample& sample, const std::filesystem::path& coder_path,
                             const std::filesystem::path& key_path);

struct CodedRow {
    std::string sample_id;
    std::vector<std::uint8_t> values;
};

struct CodedFile {
    std::vector<std::string> tags;
    std::vector<CodedRow> rows;
};

CodedFile parse_coded_file(std::string_view csv_text);
ValidationSample parse_answer_key(std::string_view csv_text);

struct TagAgreement {
    std::string tag;
    std::size_t rows = 0;
    std::size_t agreed = 0;
    double agreement = 0.0;  // fraction in [0,1]
    double kappa = 0.0;
    bool kappa_degenerate = false;  // both coders constant and identical; reported as 1.0
};

struct Disagreement {
    std::string sample_id;
    std::string rule;
    std::string chunk;
    std::string tag;
    int expected = 0;
    int coded = 0;
};

struct AgreementReport {
    std::vector<TagAgreement> tags;
    double chunk_agreement = 0.0;  // rows agreeing on every tag
    double rule_agreement = 0.0;   // mean of per-rule chunk agreement
    std::size_t rows = 0;
    std::vector<Disagreement> disagreements;

    std::string to_json() const;
};

/// Cohen's kappa for two binary raters. Sets `degenerate` and returns 1.0
/// when chance agreement is 1.
double cohen_kappa(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, bool* degenerate = nullptr);

/// Errors (ErrorKind::data) list every sample_id that fails to align.
AgreementReport score_validation(const CodedFile& coded, const ValidationSample& key);

}  // namespace craml
