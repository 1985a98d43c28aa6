#pragma once

#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "okr/error.hpp"

namespace okr {

using nlohmann::json;

/// Throws InvalidArgument when `j` is not an object or holds a key outside `allowed`.
inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) known = known || it.key() == key;
        if (!known) throw InvalidArgument(where + ": unknown key '" + it.key() + "'");
    }
}

/// Reads j[key] into `out` when present; type errors name the key.
template <class T>
void read_optional(const json& j, const char* key, T& out, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw InvalidArgument(where + "." + key + ": " + e.what());
    }
}

}  // namespace okr
