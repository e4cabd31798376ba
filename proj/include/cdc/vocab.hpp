#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cdc {

/// Ordered token inventory with one absorbing mask token.
class Vocabulary {
public:
    Vocabulary(std::vector<std::string> tokens, int mask_id);

    /// Builds a vocabulary from plain tokens, appending "[MASK]" as the absorbing token.
    static Vocabulary with_mask(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    int mask_id() const { return mask_id_; }
    bool is_mask(int id) const { return id == mask_id_; }

    const std::string& token(int id) const;
    std::optional<int> id_of(std::string_view tok) const;
    int id_or_throw(std::string_view tok) const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_ && mask_id_ == other.mask_id_;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int mask_id_;
};

}  // namespace cdc
