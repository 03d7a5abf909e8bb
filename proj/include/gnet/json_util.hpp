#pragma once

#include <set>
#include <string>

#include "json.hpp"

#include "gnet/error.hpp"

namespace gnet {

/// Reads fields out of a JSON object, keeping defaults for absent keys and
/// rejecting keys nobody asked for. Errors carry the dotted key path.
class JsonReader {
public:
    JsonReader(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected a JSON object");
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    bool has(const std::string& key) {
        known_.insert(key);
        return j_.contains(key);
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path(key), std::string("invalid value (") + e.what() + ")");
        }
    }

    const nlohmann::json& at(const std::string& key) const { return j_.at(key); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!known_.count(it.key())) throw ConfigError(path(it.key()), "unknown key");
        }
    }

private:
    const nlohmann::json& j_;
    std::string prefix_;
    std::set<std::string> known_;
};

}  // namespace gnet
