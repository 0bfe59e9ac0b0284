#pragma once

// Deterministic JSON emitter: insertion-ordered objects, doubles rendered via
// shortest round-trip to_chars, no locale dependence. Output bytes are stable
// across runs, which the CLI's reproducibility contract relies on.

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace filippov {

class JsonValue {
public:
    static JsonValue null();
    static JsonValue boolean(bool b);
    static JsonValue number(double v);
    static JsonValue integer(long long v);
    static JsonValue str(const std::string& s);
    static JsonValue array();
    static JsonValue object();

    JsonValue& push(JsonValue v);                           // arrays
    JsonValue& set(const std::string& key, JsonValue v);    // objects
    JsonValue& set(const std::string& key, double v) { return set(key, number(v)); }
    JsonValue& set(const std::string& key, long long v) { return set(key, integer(v)); }
    JsonValue& set(const std::string& key, int v) { return set(key, integer(v)); }
    JsonValue& set(const std::string& key, bool v) { return set(key, boolean(v)); }
    JsonValue& set(const std::string& key, const std::string& v) { return set(key, str(v)); }
    JsonValue& set(const std::string& key, const char* v) { return set(key, str(v)); }

    std::string dump(int indent = 2) const;

private:
    enum class Kind { Null, Bool, Number, Integer, String, Array, Object };
    Kind kind_ = Kind::Null;
    bool bool_ = false;
    double num_ = 0.0;
    long long int_ = 0;
    std::string str_;
    std::vector<JsonValue> items_;
    std::vector<std::pair<std::string, JsonValue>> fields_;

    void write(std::string& out, int indent, int depth) const;
};

std::string json_escape(const std::string& s);

}  // namespace filippov
