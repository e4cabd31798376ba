#include "cdc/vocab.hpp"

#include <nlohmann/json.hpp>

#include "cdc/errors.hpp"

namespace cdc {

Vocabulary::Vocabulary(std::vector<std::string> tokens, int mask_id)
    : tokens_(std::move(tokens)), mask_id_(mask_id) {
    if (tokens_.size() < 2) throw InvalidArgument("vocabulary needs at least 2 tokens");
    if (mask_id_ < 0 || mask_id_ >= static_cast<int>(tokens_.size()))
        throw InvalidArgument("mask_id out of range");
    for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
        auto [it, inserted] = index_.emplace(tokens_[i], i);
        if (!inserted) throw InvalidArgument("duplicate token: " + tokens_[i]);
    }
}

Vocabulary Vocabulary::with_mask(std::vector<std::string> tokens) {
    const int mask = static_cast<int>(tokens.size());
    tokens.push_back("[MASK]");
    return Vocabulary(std::move(tokens), mask);
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw InvalidArgument("token id out of range: " + std::to_string(id));
    return tokens_[id];
}

std::optional<int> Vocabulary::id_of(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int Vocabulary::id_or_throw(std::string_view tok) const {
    auto id = id_of(tok);
    if (!id) throw InvalidArgument("unknown token: " + std::string(tok));
    return *id;
}

nlohmann::json Vocabulary::to_json() const {
    return nlohmann::json{{"tokens", tokens_}, {"mask", tokens_[mask_id_]}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    std::vector<std::string> tokens = j.at("tokens").get<std::vector<std::string>>();
    const std::string mask = j.at("mask").get<std::string>();
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i)
        if (tokens[i] == mask) return Vocabulary(std::move(tokens), i);
    throw InvalidArgument("mask token not present in token list");
}

}  // namespace cdc
