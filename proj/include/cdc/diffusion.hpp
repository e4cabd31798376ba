#pragma once

#include "cdc/denoiser.hpp"
#include "cdc/proposal.hpp"
#include "cdc/rng.hpp"
#include "cdc/schedule.hpp"
#include "cdc/token_state.hpp"

namespace cdc {

/// Corrupts a clean sequence to step t: each position independently keeps
/// its token with probability alpha_t and becomes mask otherwise. Uses the
/// composed marginal of the stepwise absorbing kernel; draws are consumed
/// in ascending position order.
TokenState forward_corrupt(const TokenState& x0, int t, const NoiseSchedule& schedule, int mask_id,
                           SplitRng& rng);

/// One reverse transition t -> t-1. Committed positions are copied verbatim;
/// each masked position stays mask with probability gamma_t or commits to a
/// token drawn from the proposal row with probability eta_t. One uniform
/// draw per masked position, ascending position order.
TokenState reverse_step(const TokenState& xt, const CleanProposal& proposal,
                        const NoiseSchedule& schedule, int mask_id, SplitRng& rng);

/// Unconstrained sampler: all-mask start at t = T, reverse steps down to
/// t = 0. The result has no masks (gamma_1 = 0 under alpha_0 = 1).
TokenState sample_vanilla(const Denoiser& denoiser, ContextPtr context, int length,
                          const NoiseSchedule& schedule, SplitRng& rng);

/// Samples an index from a probability row given a uniform variate in [0,1).
/// CDF walk in ascending token order; the tail cell absorbs rounding slack.
int sample_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double u);

}  // namespace cdc
