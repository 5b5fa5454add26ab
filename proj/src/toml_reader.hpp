#pragma once

// Typed access to TOML tables for the scenario and suite loaders.

#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <toml++/toml.hpp>

#include "qdd/error.hpp"

namespace qdd::detail {

[[noreturn]] inline void invalid(const std::string& message) { fail(ErrorKind::config_invalid, message); }

/// Typed access to one TOML table; dotted key paths appear in every error message.
class Reader {
public:
    Reader(const toml::table& table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

    std::string path(std::string_view key) const { return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key); }

    bool has(std::string_view key) const { return table_.contains(key); }

    void allow(std::initializer_list<std::string_view> keys) const {
        const std::set<std::string_view> allowed(keys);
        for (const auto& [k, v] : table_)
            if (!allowed.count(k.str())) invalid("unknown key '" + path(k.str()) + "'");
    }

    double real(std::string_view key) const {
        const auto* node = table_.get(key);
        if (!node) invalid("missing required key '" + path(key) + "'");
        return as_real(*node, path(key));
    }
    double real(std::string_view key, double fallback) const { return has(key) ? real(key) : fallback; }

    long long integer(std::string_view key, long long fallback) const {
        const auto* node = table_.get(key);
        if (!node) return fallback;
        if (const auto v = node->value_exact<int64_t>()) return *v;
        invalid("key '" + path(key) + "' must be an integer");
    }

    std::string text(std::string_view key, const std::string& fallback) const {
        const auto* node = table_.get(key);
        if (!node) return fallback;
        if (const auto v = node->value_exact<std::string>()) return *v;
        invalid("key '" + path(key) + "' must be a string");
    }

    std::vector<double> reals(std::string_view key) const {
        const auto* node = table_.get(key);
        const auto* arr = node ? node->as_array() : nullptr;
        if (!arr) invalid("key '" + path(key) + "' must be an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < arr->size(); ++i) out.push_back(as_real(*arr->get(i), path(key)));
        return out;
    }

    std::optional<Reader> sub(std::string_view key) const {
        const auto* node = table_.get(key);
        if (!node) return std::nullopt;
        const auto* t = node->as_table();
        if (!t) invalid("key '" + path(key) + "' must be a table");
        return Reader(*t, path(key));
    }

    const toml::node* raw(std::string_view key) const { return table_.get(key); }

private:
    static double as_real(const toml::node& node, const std::string& where) {
        if (const auto v = node.value_exact<double>()) return *v;
        if (const auto v = node.value_exact<int64_t>()) return static_cast<double>(*v);
        invalid("key '" + where + "' must be a number");
    }

    const toml::table& table_;
    std::string prefix_;
};

}  // namespace qdd::detail
