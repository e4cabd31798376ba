#include "cdc/diffusion.hpp"

#include <cmath>

#include "cdc/errors.hpp"

namespace cdc {

TokenState all_mask_state(int length, int mask_id, int timestep, ContextPtr context) {
    if (length < 1) throw InvalidArgument("state length must be >= 1");
    TokenState s;
    s.tokens.assign(static_cast<std::size_t>(length), mask_id);
    s.context = std::move(context);
    s.timestep = timestep;
    return s;
}

CleanProposal UniformDenoiser::predict(const TokenState& state, int /*t*/) const {
    const int L = state.length();
    const int V = vocab_.size();
    const int mask = vocab_.mask_id();
    CleanProposal p;
    p.probs.setZero(L, V);
    const double fill = 1.0 / static_cast<double>(V - 1);
    for (int i = 0; i < L; ++i) {
        if (state.tokens[i] == mask) {
            p.probs.row(i).setConstant(fill);
            p.probs(i, mask) = 0.0;
        } else {
            p.probs(i, state.tokens[i]) = 1.0;
        }
    }
    return p;
}

void validate_proposal(const CleanProposal& proposal, int mask_id, double tol) {
    const auto& m = proposal.probs;
    if (mask_id < 0 || mask_id >= m.cols()) throw InvalidArgument("mask_id outside proposal columns");
    if ((m.array() < 0.0).any()) throw InvalidArgument("proposal has negative entries");
    if ((m.col(mask_id).array() != 0.0).any())
        throw InvalidArgument("proposal assigns mass to the mask token");
    for (int i = 0; i < m.rows(); ++i) {
        const double s = m.row(i).sum();
        if (std::abs(s - 1.0) > tol)
            throw InvalidArgument("proposal row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
}

CleanProposal one_hot_proposal(const std::vector<int>& tokens, int vocab_size) {
    CleanProposal p;
    p.probs.setZero(static_cast<int>(tokens.size()), vocab_size);
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
        if (tokens[i] < 0 || tokens[i] >= vocab_size) throw InvalidArgument("token id out of range");
        p.probs(i, tokens[i]) = 1.0;
    }
    return p;
}

int sample_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double u) {
    double acc = 0.0;
    int last_nonzero = -1;
    for (int v = 0; v < row.size(); ++v) {
        if (row[v] <= 0.0) continue;
        last_nonzero = v;
        acc += row[v];
        if (u < acc) return v;
    }
    if (last_nonzero < 0) throw NumericalError("sample_row: all-zero probability row");
    return last_nonzero;
}

TokenState forward_corrupt(const TokenState& x0, int t, const NoiseSchedule& schedule, int mask_id,
                           SplitRng& rng) {
    if (t < 0 || t > schedule.T) throw InvalidArgument("forward_corrupt: t outside [0, T]");
    if (x0.has_mask(mask_id)) throw InvalidArgument("forward_corrupt: input already contains masks");
    const double keep = schedule.alpha[t];
    TokenState xt = x0;
    xt.timestep = t;
    for (auto& tok : xt.tokens) {
        if (rng.uniform() >= keep) tok = mask_id;
    }
    return xt;
}

TokenState reverse_step(const TokenState& xt, const CleanProposal& proposal,
                        const NoiseSchedule& schedule, int mask_id, SplitRng& rng) {
    const int t = xt.timestep;
    if (t < 1 || t > schedule.T) throw InvalidArgument("reverse_step: t outside [1, T]");
    if (proposal.length() != xt.length())
        throw InvalidArgument("reverse_step: proposal rows do not match state length");
    const auto [gamma, eta] = gamma_eta(schedule, t);

    TokenState out = xt;
    out.timestep = t - 1;
    for (int i = 0; i < xt.length(); ++i) {
        if (xt.tokens[i] != mask_id) continue;  // committed tokens are copied verbatim
        const double u = rng.uniform();
        if (u < gamma) continue;                // stays mask
        out.tokens[i] = sample_row(proposal.probs.row(i), (u - gamma) / eta);
    }
    return out;
}

TokenState sample_vanilla(const Denoiser& denoiser, ContextPtr context, int length,
                          const NoiseSchedule& schedule, SplitRng& rng) {
    const int mask = denoiser.vocab().mask_id();
    TokenState x = all_mask_state(length, mask, schedule.T, std::move(context));
    for (int t = schedule.T; t >= 1; --t) {
        CleanProposal proposal;
        try {
            proposal = denoiser.predict(x, t);
        } catch (const std::exception& e) {
            throw DenoiserError(e.what());
        }
        x = reverse_step(x, proposal, schedule, mask, rng);
    }
    return x;
}

}  // namespace cdc
