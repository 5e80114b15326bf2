#pragma once

// Strict JSON object access: every key must be consumed, anything left over
// is reported as unknown. Used for manifests, configs and reports.

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "xaudit/error.hpp"

namespace xaudit {

using Json = nlohmann::ordered_json;

class StrictObject {
public:
    StrictObject(const Json& j, std::string where, ErrorKind kind = ErrorKind::SchemaError)
        : j_(j), where_(std::move(where)), kind_(kind) {
        if (!j_.is_object()) fail(kind_, where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& at(const std::string& key) {
        if (!j_.contains(key)) fail(kind_, where_ + ": missing field '" + key + "'");
        seen_.insert(key);
        return j_.at(key);
    }

    const Json* find(const std::string& key) {
        if (!j_.contains(key)) return nullptr;
        seen_.insert(key);
        return &j_.at(key);
    }

    double number(const std::string& key) { return as_number(at(key), key); }

    double number_or(const std::string& key, double fallback) {
        const Json* v = find(key);
        return v ? as_number(*v, key) : fallback;
    }

    long long integer(const std::string& key) { return as_integer(at(key), key); }

    long long integer_or(const std::string& key, long long fallback) {
        const Json* v = find(key);
        return v ? as_integer(*v, key) : fallback;
    }

    std::string string(const std::string& key) {
        const Json& v = at(key);
        if (!v.is_string()) fail(kind_, where_ + ": field '" + key + "' must be a string");
        return v.get<std::string>();
    }

    std::string string_or(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : fallback;
    }

    bool boolean(const std::string& key) {
        const Json& v = at(key);
        if (!v.is_boolean()) fail(kind_, where_ + ": field '" + key + "' must be a boolean");
        return v.get<bool>();
    }

    bool boolean_or(const std::string& key, bool fallback) {
        const Json* v = find(key);
        if (!v) return fallback;
        if (!v->is_boolean()) fail(kind_, where_ + ": field '" + key + "' must be a boolean");
        return v->get<bool>();
    }

    // Throws if any key was never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(kind_, where_ + ": unknown field '" + it.key() + "'");
    }

    double as_number(const Json& v, const std::string& key) const {
        if (!v.is_number()) fail(kind_, where_ + ": field '" + key + "' must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(kind_, where_ + ": field '" + key + "' must be finite");
        return d;
    }

    long long as_integer(const Json& v, const std::string& key) const {
        if (v.is_number_integer()) return v.get<long long>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (std::isfinite(d) && d == std::floor(d)) return static_cast<long long>(d);
        }
        fail(kind_, where_ + ": field '" + key + "' must be an integer");
    }

    const std::string& where() const { return where_; }

private:
    const Json& j_;
    std::string where_;
    ErrorKind kind_;
    std::set<std::string> seen_;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write '" + path + "'");
    out << text;
    if (!out) fail(ErrorKind::IoError, "write failed for '" + path + "'");
}

inline Json parse_json(const std::string& text, const std::string& where, ErrorKind kind = ErrorKind::SchemaError) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(kind, where + ": " + e.what());
    }
}

// Pretty, deterministic serialization with a trailing newline.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace xaudit
