#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace lcva {

// Validator for the JSON Schema subset used by the in-repo report schema:
// type (single or list), required, properties, additionalProperties (bool),
// items (single schema), minimum. Returns human-readable violations.
inline void validate_json_schema(const nlohmann::json& instance, const nlohmann::json& schema,
                                 const std::string& path, std::vector<std::string>& errors) {
    auto type_matches = [&](const std::string& type) {
        if (type == "object") return instance.is_object();
        if (type == "array") return instance.is_array();
        if (type == "string") return instance.is_string();
        if (type == "integer") return instance.is_number_integer() || instance.is_number_unsigned();
        if (type == "number") return instance.is_number();
        if (type == "boolean") return instance.is_boolean();
        if (type == "null") return instance.is_null();
        return false;
    };
    if (schema.contains("type")) {
        const auto& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(t.get<std::string>());
        } else {
            for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>());
        }
        if (!ok) {
            errors.push_back(path + ": expected type " + t.dump() + ", got " +
                             std::string(instance.type_name()));
            return;
        }
    }
    if (schema.contains("minimum") && instance.is_number()) {
        if (instance.get<double>() < schema["minimum"].get<double>()) {
            errors.push_back(path + ": value below minimum " + schema["minimum"].dump());
        }
    }
    if (instance.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!instance.contains(key.get<std::string>())) {
                    errors.push_back(path + ": missing required key '" + key.get<std::string>() +
                                     "'");
                }
            }
        }
        const auto& props =
            schema.contains("properties") ? schema["properties"] : nlohmann::json::object();
        for (auto it = instance.begin(); it != instance.end(); ++it) {
            if (props.contains(it.key())) {
                validate_json_schema(it.value(), props[it.key()], path + "/" + it.key(), errors);
            } else if (schema.contains("additionalProperties") &&
                       schema["additionalProperties"].is_boolean() &&
                       !schema["additionalProperties"].get<bool>()) {
                errors.push_back(path + ": unexpected key '" + it.key() + "'");
            }
        }
    }
    if (instance.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < instance.size(); ++i) {
            validate_json_schema(instance[i], schema["items"], path + "/" + std::to_string(i),
                                 errors);
        }
    }
}

inline std::vector<std::string> validate_json_schema(const nlohmann::json& instance,
                                                     const nlohmann::json& schema) {
    std::vector<std::string> errors;
    validate_json_schema(instance, schema, "", errors);
    return errors;
}

}  // namespace lcva
