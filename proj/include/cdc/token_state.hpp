#pragma once

#include <algorithm>
#include <vector>

#include "cdc/context.hpp"

namespace cdc {

/// Partially masked token sequence owned by one trajectory.
struct TokenState {
    std::vector<int> tokens;
    ContextPtr context = empty_context();
    int timestep = 0;

    int length() const { return static_cast<int>(tokens.size()); }

    int masked_count(int mask_id) const {
        return static_cast<int>(std::count(tokens.begin(), tokens.end(), mask_id));
    }

    double committed_fraction(int mask_id) const {
        if (tokens.empty()) return 0.0;
        return 1.0 - static_cast<double>(masked_count(mask_id)) / static_cast<double>(tokens.size());
    }

    bool has_mask(int mask_id) const { return masked_count(mask_id) > 0; }
};

/// Fully masked state of length L at timestep T.
TokenState all_mask_state(int length, int mask_id, int timestep, ContextPtr context);

}  // namespace cdc
