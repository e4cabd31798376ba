#pragma once

#include <memory>
#include <vector>

namespace cdc {

/// Conditioning context for one trajectory: prompt tokens plus a reserved
/// feedback buffer. The buffer is a contiguous run of slots directly after
/// the task prompt, initialized to mask; it is conditioning only and is never
/// sampled into. Context length is constant for the life of a trajectory.
struct Context {
    std::vector<int> tokens;
    int buffer_start = 0;
    int buffer_len = 0;
    int family = 0;  // task family used by surrogate conditioning

    int size() const { return static_cast<int>(tokens.size()); }

    bool operator==(const Context&) const = default;
};

using ContextPtr = std::shared_ptr<const Context>;

/// Prompt followed by buffer_len mask slots.
ContextPtr make_context(std::vector<int> prompt, int buffer_len, int mask_id, int family = 0);

/// Empty context (no prompt, no buffer).
ContextPtr empty_context();

}  // namespace cdc
