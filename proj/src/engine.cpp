#include "cdc/engine.hpp"

#include <algorithm>
#include <sstream>

#include "cdc/errors.hpp"

namespace cdc {

DecodedCandidate decode_argmax(const CleanProposal& proposal) {
    DecodedCandidate out;
    out.tokens.resize(static_cast<std::size_t>(proposal.length()));
    for (int i = 0; i < proposal.length(); ++i) {
        int best = 0;
        double best_p = proposal.probs(i, 0);
        for (int v = 1; v < proposal.vocab_size(); ++v) {
            if (proposal.probs(i, v) > best_p) {
                best_p = proposal.probs(i, v);
                best = v;
            }
        }
        out.tokens[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

EditRegion EditRegion::from_positions(std::vector<int> positions) {
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    return EditRegion{std::move(positions)};
}

std::vector<std::pair<int, int>> EditRegion::spans() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < positions.size();) {
        std::size_t j = i;
        while (j + 1 < positions.size() && positions[j + 1] == positions[j] + 1) ++j;
        out.emplace_back(positions[i], positions[j] + 1);
        i = j + 1;
    }
    return out;
}

bool EditRegion::contains(int pos) const {
    return std::binary_search(positions.begin(), positions.end(), pos);
}

CorrectionOutcome IdentityOperator::correct(const CleanProposal& proposal, const TokenState& state,
                                            int /*t*/) {
    CorrectionOutcome out;
    out.proposal = proposal;
    out.state = state;
    return out;
}

CorrectionOutcome CompositeOperator::correct(const CleanProposal& proposal, const TokenState& state,
                                             int t) {
    CorrectionOutcome acc;
    acc.proposal = proposal;
    acc.state = state;
    for (Operator* op : ops_) {
        CorrectionOutcome next = op->correct(acc.proposal, acc.state, t);
        if (next.fired != "none") {
            acc.fired = acc.fired == "none" ? next.fired : acc.fired + "+" + next.fired;
            std::vector<int> merged = acc.region.positions;
            merged.insert(merged.end(), next.region.positions.begin(), next.region.positions.end());
            acc.region = EditRegion::from_positions(std::move(merged));
            acc.remasked.insert(acc.remasked.end(), next.remasked.begin(), next.remasked.end());
            acc.insertions.insert(acc.insertions.end(), next.insertions.begin(), next.insertions.end());
        }
        for (const auto& [k, v] : next.report.feedback.items()) acc.report.feedback[k] = v;
        if (!next.report.scores.empty()) acc.report.scores = next.report.scores;
        acc.proposal = std::move(next.proposal);
        acc.state = std::move(next.state);
    }
    return acc;
}

TokenState constrained_reverse_step(const TokenState& state, const CleanProposal& corrected,
                                    const NoiseSchedule& schedule, int mask_id, SplitRng& rng) {
    return reverse_step(state, corrected, schedule, mask_id, rng);
}

int TrajectoryTrace::total_edited_tokens() const {
    int n = 0;
    for (const auto& s : steps) n += s.edited_tokens;
    return n;
}

int TrajectoryTrace::interventions() const {
    int n = 0;
    for (const auto& s : steps)
        if (s.fired != "none") ++n;
    return n;
}

namespace {

nlohmann::json record_to_json(const StepRecord& r) {
    nlohmann::json j{{"t", r.t},
                     {"masked_before", r.masked_before},
                     {"fired", r.fired},
                     {"region", r.region},
                     {"report", r.report},
                     {"edited_tokens", r.edited_tokens},
                     {"remasked", r.remasked},
                     {"insertions", r.insertions},
                     {"state_after", r.state_after}};
    if (!r.state_after_op.empty()) j["state_after_op"] = r.state_after_op;
    return j;
}

StepRecord record_from_json(const nlohmann::json& j) {
    StepRecord r;
    r.t = j.at("t").get<int>();
    r.masked_before = j.at("masked_before").get<int>();
    r.fired = j.at("fired").get<std::string>();
    r.region = j.at("region").get<std::vector<int>>();
    r.report = j.at("report");
    r.edited_tokens = j.at("edited_tokens").get<int>();
    r.remasked = j.at("remasked").get<std::vector<int>>();
    r.insertions = j.at("insertions").get<std::vector<std::pair<int, int>>>();
    r.state_after = j.at("state_after").get<std::vector<int>>();
    if (j.contains("state_after_op")) r.state_after_op = j["state_after_op"].get<std::vector<int>>();
    return r;
}

}  // namespace

std::string TrajectoryTrace::to_json_lines() const {
    std::ostringstream out;
    for (const auto& s : steps) out << record_to_json(s).dump() << '\n';
    out << nlohmann::json{{"final_tokens", final_tokens}, {"final_verdicts", final_verdicts}}.dump()
        << '\n';
    return out.str();
}

TrajectoryTrace TrajectoryTrace::from_json_lines(const std::string& text) {
    TrajectoryTrace trace;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.contains("final_tokens")) {
            trace.final_tokens = j["final_tokens"].get<std::vector<int>>();
            trace.final_verdicts = j["final_verdicts"];
        } else {
            trace.steps.push_back(record_from_json(j));
        }
    }
    return trace;
}

std::pair<TokenState, TrajectoryTrace> run_constrained(const Denoiser& denoiser, Operator& op,
                                                       ContextPtr context, int length,
                                                       const NoiseSchedule& schedule, SplitRng& rng) {
    const int mask = denoiser.vocab().mask_id();
    TokenState x = all_mask_state(length, mask, schedule.T, std::move(context));
    TrajectoryTrace trace;

    for (int t = schedule.T; t >= 1; --t) {
        StepRecord rec;
        rec.t = t;
        rec.masked_before = x.masked_count(mask);

        CleanProposal proposal;
        try {
            proposal = denoiser.predict(x, t);
        } catch (const std::exception& e) {
            throw TrajectoryError(t, std::string("denoiser: ") + e.what());
        }

        CorrectionOutcome outcome;
        try {
            outcome = op.correct(proposal, x, t);
        } catch (const std::exception& e) {
            throw TrajectoryError(t, std::string("operator: ") + e.what());
        }
        if (outcome.proposal.length() != outcome.state.length())
            throw TrajectoryError(t, "operator returned proposal/state length mismatch");
        try {
            validate_proposal(outcome.proposal, mask);
        } catch (const std::exception& e) {
            throw TrajectoryError(t, std::string("corrected proposal invalid: ") + e.what());
        }

        rec.fired = outcome.fired;
        rec.region = outcome.region.positions;
        rec.report = outcome.report.feedback;
        rec.remasked = outcome.remasked;
        rec.insertions = outcome.insertions;
        int inserted = 0;
        for (const auto& [anchor, count] : outcome.insertions) inserted += count;
        rec.edited_tokens = static_cast<int>(outcome.remasked.size()) + inserted;
        if (outcome.state.tokens != x.tokens) rec.state_after_op = outcome.state.tokens;

        x = constrained_reverse_step(outcome.state, outcome.proposal, schedule, mask, rng);
        rec.state_after = x.tokens;
        trace.steps.push_back(std::move(rec));
    }

    trace.final_tokens = x.tokens;
    return {std::move(x), std::move(trace)};
}

}  // namespace cdc
