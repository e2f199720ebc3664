#include "thoughtbench/jsonutil.hpp"

#include "thoughtbench/common.hpp"

namespace thoughtbench::jsonutil {

std::optional<std::string> first_balanced_json(std::string_view text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    char open = text[start];
    if (open != '{' && open != '[') continue;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{' || c == '[') {
        ++depth;
      } else if (c == '}' || c == ']') {
        --depth;
        if (depth == 0) {
          return std::string(text.substr(start, i - start + 1));
        }
        if (depth < 0) break;  // mismatched; try the next opener
      }
    }
  }
  return std::nullopt;
}

nlohmann::json parse_with_repair(const std::string& reply, const std::string& stage) {
  nlohmann::json direct = nlohmann::json::parse(reply, nullptr, false);
  if (!direct.is_discarded()) return direct;
  if (auto extracted = first_balanced_json(reply)) {
    nlohmann::json repaired = nlohmann::json::parse(*extracted, nullptr, false);
    if (!repaired.is_discarded()) return repaired;
  }
  raise("StageParseFailure", stage + ": reply is not valid JSON");
}

std::string require_string(const nlohmann::json& j, const char* field,
                           const std::string& stage) {
  if (!j.is_object() || !j.contains(field) || !j.at(field).is_string()) {
    raise("StageParseFailure", stage + ": missing field '" + field + "'");
  }
  return j.at(field).get<std::string>();
}

const nlohmann::json& require_array(const nlohmann::json& j, const char* field,
                                    const std::string& stage) {
  if (!j.is_object() || !j.contains(field) || !j.at(field).is_array()) {
    raise("StageParseFailure", stage + ": missing array '" + field + "'");
  }
  return j.at(field);
}

const nlohmann::json& require_object(const nlohmann::json& j, const char* field,
                                     const std::string& stage) {
  if (!j.is_object() || !j.contains(field) || !j.at(field).is_object()) {
    raise("StageParseFailure", stage + ": missing object '" + field + "'");
  }
  return j.at(field);
}

}  // namespace thoughtbench::jsonutil
