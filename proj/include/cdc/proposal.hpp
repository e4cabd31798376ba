#pragma once

#include <Eigen/Dense>

#include "cdc/vocab.hpp"

namespace cdc {

/// Row-stochastic L x |V| matrix of clean-token probabilities. Row i is the
/// denoiser's distribution over the clean token at position i; the mask
/// column is always zero.
struct CleanProposal {
    Eigen::MatrixXd probs;

    int length() const { return static_cast<int>(probs.rows()); }
    int vocab_size() const { return static_cast<int>(probs.cols()); }
};

/// Throws InvalidArgument when rows do not sum to 1 (tol 1e-9), entries are
/// negative, or the mask column carries mass.
void validate_proposal(const CleanProposal& proposal, int mask_id, double tol = 1e-9);

/// One-hot proposal for a fully committed token sequence.
CleanProposal one_hot_proposal(const std::vector<int>& tokens, int vocab_size);

}  // namespace cdc
