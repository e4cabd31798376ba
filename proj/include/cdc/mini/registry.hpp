#pragma once

#include <set>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "cdc/vocab.hpp"

namespace cdc::mini {

/// Security classification of the built-in functions. Sources introduce
/// untrusted data, sinks consume data in a sensitive way, sanitizers clean
/// it. The three sets must be disjoint.
struct FunctionRegistry {
    std::set<std::string> sources{"input"};
    std::set<std::string> sinks{"exec", "query"};
    std::set<std::string> sanitizers{"escape"};
    std::set<std::string> pure{"emit"};
    // Guard statement required before a sink call on the same identifier.
    std::string guard = "check";

    bool is_function(const std::string& name) const {
        return sources.count(name) || sinks.count(name) || sanitizers.count(name) || pure.count(name);
    }

    void validate() const;

    nlohmann::json to_json() const;
    static FunctionRegistry from_json(const nlohmann::json& j);
};

FunctionRegistry default_registry();

/// Vocabulary covering the full language surface plus [MASK].
Vocabulary default_vocab();

}  // namespace cdc::mini
