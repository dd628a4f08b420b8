#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "craml/extrapolation.hpp"

namespace craml {

struct TrimConfig {
    std::size_t trim = 0;
    std::vector<std::string> qualifiers;  // lowercased; multi-word entries allowed
    std::vector<std::string> keeps;
    std::vector<std::string> keywords;  // used to find the window centre

    nlohmann::ordered_json to_json() const;
    static TrimConfig from_json(const nlohmann::json& j);
};

/// Qualifiers found anywhere, then keep words found anywhere, then the
/// tokens [k - trim, k + trim] around the keyword. nullopt when no keyword
/// is present.
std::optional<std::string> trim_chunk(std::string_view chunk, const TrimConfig& config);

/// Rows without a keyword pass through untrimmed and add a warning.
TrainingSet trim_preprocess(const TrainingSet& training, const TrimConfig& config);

}  // namespace craml
