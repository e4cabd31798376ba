#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdc/denoiser.hpp"
#include "cdc/diffusion.hpp"
#include "cdc/proposal.hpp"
#include "cdc/rng.hpp"
#include "cdc/schedule.hpp"
#include "cdc/token_state.hpp"

namespace cdc {

/// Argmax decode of a proposal; ties break toward the lowest token index.
struct DecodedCandidate {
    std::vector<int> tokens;
};

DecodedCandidate decode_argmax(const CleanProposal& proposal);

/// Evaluator output: per-constraint violation scores plus structured
/// feedback (witnesses, hints, surrogate scores). Scores are nonnegative;
/// the feedback payload survives JSON round-trips.
struct ViolationReport {
    std::vector<double> scores;
    nlohmann::json feedback = nlohmann::json::object();
};

/// Sorted set of token positions selected for correction, with the maximal
/// contiguous runs derivable on demand.
struct EditRegion {
    std::vector<int> positions;  // sorted, unique

    static EditRegion from_positions(std::vector<int> positions);
    std::vector<std::pair<int, int>> spans() const;  // [lo, hi) runs
    bool empty() const { return positions.empty(); }
    bool contains(int pos) const;
};

/// What a correction operator hands back to the engine. The proposal always
/// matches the (possibly remasked or extended) state length; an identity
/// outcome leaves proposal, state and context bit-identical.
struct CorrectionOutcome {
    CleanProposal proposal;
    TokenState state;
    EditRegion region;
    ViolationReport report;
    std::string fired = "none";              // operator tag when an intervention happened
    std::vector<int> remasked;               // positions set back to mask (post-insertion coords)
    std::vector<std::pair<int, int>> insertions;  // (anchor, count), pre-insertion coords
};

/// Constraint-aware correction operator. Implementations own any
/// trajectory-local state (multipliers, budgets); one instance serves one
/// trajectory.
class Operator {
public:
    virtual ~Operator() = default;
    virtual CorrectionOutcome correct(const CleanProposal& proposal, const TokenState& state,
                                      int t) = 0;
};

class IdentityOperator final : public Operator {
public:
    CorrectionOutcome correct(const CleanProposal& proposal, const TokenState& state,
                              int t) override;
};

/// Runs a list of operators in order, each on the previous outcome.
class CompositeOperator final : public Operator {
public:
    explicit CompositeOperator(std::vector<Operator*> ops) : ops_(std::move(ops)) {}
    CorrectionOutcome correct(const CleanProposal& proposal, const TokenState& state,
                              int t) override;

private:
    std::vector<Operator*> ops_;
};

struct StepRecord {
    int t = 0;
    int masked_before = 0;
    std::string fired = "none";
    std::vector<int> region;
    nlohmann::json report = nlohmann::json::object();
    int edited_tokens = 0;  // remasked + inserted this step
    std::vector<int> remasked;
    std::vector<std::pair<int, int>> insertions;
    std::vector<int> state_after_op;  // only recorded when the operator changed the state
    std::vector<int> state_after;     // after the reverse transition
};

/// Append-only per-step log of one trajectory: exactly one record per
/// reverse step, plus the final program and verdicts.
struct TrajectoryTrace {
    std::vector<StepRecord> steps;
    std::vector<int> final_tokens;
    nlohmann::json final_verdicts = nlohmann::json::object();

    int total_edited_tokens() const;
    int interventions() const;

    /// One JSON object per reverse step, in step order, then a final record.
    std::string to_json_lines() const;
    static TrajectoryTrace from_json_lines(const std::string& text);
};

/// Reverse transition that samples masked positions from the corrected
/// proposal instead of the base one. Committed positions are untouched.
TokenState constrained_reverse_step(const TokenState& state, const CleanProposal& corrected,
                                    const NoiseSchedule& schedule, int mask_id, SplitRng& rng);

/// The constrained sampling loop: proposal, correction, constrained reverse
/// update for t = T..1. Interventions that remask or extend the state carry
/// forward into subsequent steps. Exactly T reverse transitions run
/// regardless of interventions.
std::pair<TokenState, TrajectoryTrace> run_constrained(const Denoiser& denoiser, Operator& op,
                                                       ContextPtr context, int length,
                                                       const NoiseSchedule& schedule, SplitRng& rng);

}  // namespace cdc
