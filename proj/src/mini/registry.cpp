#include "cdc/mini/registry.hpp"

#include <nlohmann/json.hpp>

#include "cdc/errors.hpp"

namespace cdc::mini {

void FunctionRegistry::validate() const {
    for (const auto& s : sources) {
        if (sinks.count(s) || sanitizers.count(s))
            throw InvalidArgument("registry: security classes overlap on " + s);
    }
    for (const auto& s : sinks) {
        if (sanitizers.count(s)) throw InvalidArgument("registry: security classes overlap on " + s);
    }
}

nlohmann::json FunctionRegistry::to_json() const {
    return {{"sources", sources},
            {"sinks", sinks},
            {"sanitizers", sanitizers},
            {"pure", pure},
            {"guard", guard}};
}

FunctionRegistry FunctionRegistry::from_json(const nlohmann::json& j) {
    FunctionRegistry r;
    if (j.contains("sources")) r.sources = j["sources"].get<std::set<std::string>>();
    if (j.contains("sinks")) r.sinks = j["sinks"].get<std::set<std::string>>();
    if (j.contains("sanitizers")) r.sanitizers = j["sanitizers"].get<std::set<std::string>>();
    if (j.contains("pure")) r.pure = j["pure"].get<std::set<std::string>>();
    if (j.contains("guard")) r.guard = j["guard"].get<std::string>();
    r.validate();
    return r;
}

FunctionRegistry default_registry() { return FunctionRegistry{}; }

Vocabulary default_vocab() {
    std::vector<std::string> tokens = {
        "let", "if", "check",
        "a", "b", "c", "d",
        "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
        "=", "+", "-", "*", ";", "(", ")", "{", "}", ",",
        "input", "exec", "query", "escape", "emit",
    };
    return Vocabulary::with_mask(std::move(tokens));
}

}  // namespace cdc::mini
