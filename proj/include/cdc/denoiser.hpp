#pragma once

#include "cdc/proposal.hpp"
#include "cdc/token_state.hpp"
#include "cdc/vocab.hpp"

namespace cdc {

/// Clean-token predictor contract. Implementations must be deterministic
/// given identical inputs and parameters, and safe to call concurrently
/// from many trajectories (read-only shared parameters).
class Denoiser {
public:
    virtual ~Denoiser() = default;

    /// Per-position clean-token distribution for the given masked state.
    /// Committed positions come back one-hot; the mask token gets zero mass.
    virtual CleanProposal predict(const TokenState& state, int t) const = 0;

    virtual const Vocabulary& vocab() const = 0;
};

/// Uniform distribution over all non-mask tokens at masked positions.
class UniformDenoiser final : public Denoiser {
public:
    explicit UniformDenoiser(Vocabulary vocab) : vocab_(std::move(vocab)) {}

    CleanProposal predict(const TokenState& state, int t) const override;
    const Vocabulary& vocab() const override { return vocab_; }

private:
    Vocabulary vocab_;
};

}  // namespace cdc
