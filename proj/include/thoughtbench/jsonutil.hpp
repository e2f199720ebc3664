#pragma once
// Lenient JSON handling for model replies: direct parse first, then one repair
// pass that extracts the first balanced object/array substring.

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace thoughtbench::jsonutil {

// First balanced {...} or [...] substring, honoring string literals and
// escapes. nullopt when none closes.
std::optional<std::string> first_balanced_json(std::string_view text);

// Parse `reply`; on failure retry on the extracted balanced substring; on a
// second failure throw Error("StageParseFailure") naming `stage`.
nlohmann::json parse_with_repair(const std::string& reply, const std::string& stage);

// Field accessors that throw Error("StageParseFailure") naming stage + field.
std::string require_string(const nlohmann::json& j, const char* field,
                           const std::string& stage);
const nlohmann::json& require_array(const nlohmann::json& j, const char* field,
                                    const std::string& stage);
const nlohmann::json& require_object(const nlohmann::json& j, const char* field,
                                     const std::string& stage);

}  // namespace thoughtbench::jsonutil
