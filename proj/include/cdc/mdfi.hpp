#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdc/engine.hpp"
#include "cdc/mini/graph.hpp"
#include "cdc/mini/registry.hpp"

namespace cdc::mdfi {

/// Analyzer evidence of one violation: the offending graph node, whether the
/// repair substitutes existing tokens or inserts missing ones, and a
/// remediation hint carrying the violated rule and a concrete safe pattern.
struct Witness {
    int node = -1;
    enum class Kind { Sub, Ins } kind = Kind::Sub;
    nlohmann::json hint = nlohmann::json::object();
    double confidence = 1.0;

    nlohmann::json to_json() const;
};

struct MdfiConfig {
    std::vector<int> checkpoints;  // reverse steps at which the analyzer may fire
    double rho_min = 0.5;          // minimum committed fraction
    int b_int = 2;                 // intervention budget per trajectory
    int k_insert = 12;             // masks spliced per insertion witness
    int b_tok = 8;                 // localization token budget
    int b_p = 24;                  // prompt buffer length
    int depth = 16;                // dataflow search bound

    nlohmann::json to_json() const;
    static MdfiConfig from_json(const nlohmann::json& j);
};

/// Default schedule: the two late-trajectory checkpoints ceil(T/2), ceil(T/4).
std::vector<int> default_checkpoints(int T);

/// True iff t is a scheduled checkpoint, the committed fraction of the state
/// reaches rho_min, and the intervention budget is not exhausted.
bool checkpoint_gate(int t, const TokenState& state, const MdfiConfig& config, int fired_count,
                     int mask_id);

/// Taint search over dataflow edges: one substitution witness per sink
/// reachable from a source within the depth bound without crossing a
/// sanitizer. Confidence 1.0 for fully committed paths, 0.5 when any
/// statement on the path contains a hole.
std::vector<Witness> detect_dataflow(const mini::ProgramGraph& graph, const MdfiConfig& config,
                                     const mini::FunctionRegistry& registry,
                                     const Vocabulary& vocab);

/// Local shape rules that fire regardless of dataflow: an insertion witness
/// for each sink call missing its guard statement, a substitution witness
/// for each sink whose argument is a hole.
std::vector<Witness> detect_structural(const mini::ProgramGraph& graph,
                                       const mini::FunctionRegistry& registry,
                                       const Vocabulary& vocab);

std::vector<Witness> detect_all(const mini::ProgramGraph& graph, const MdfiConfig& config,
                                const mini::FunctionRegistry& registry, const Vocabulary& vocab);

/// Convenience scan used for final verdicts and corpus labeling.
bool has_witnesses(const std::vector<int>& tokens, const Vocabulary& vocab,
                   const mini::FunctionRegistry& registry, const MdfiConfig& config = MdfiConfig{});

struct Localization {
    EditRegion region;            // union of whole statement spans, <= b_tok positions
    std::vector<int> sub_positions;
    std::vector<int> ins_positions;
    std::vector<Witness> kept;    // witnesses whose primary statement fit the budget
    std::vector<int> ins_anchors; // statement-start anchor per kept insertion witness
};

/// Budgeted projection of witnesses to token spans: highest-confidence
/// witnesses first, whole statements only, dataflow-adjacent definitions
/// included while they fit.
Localization localize(const std::vector<Witness>& witnesses, const mini::ProgramGraph& graph,
                      int b_tok);

struct InterventionResult {
    TokenState state;
    std::vector<int> remasked;                    // post-insertion coordinates
    std::vector<std::pair<int, int>> insertions;  // (pre-insertion anchor, count)
    std::vector<std::string> notes;
};

/// Remasks substitution positions and splices k_insert fresh masks before
/// each kept insertion witness's statement; downstream tokens shift right.
InterventionResult apply_interventions(const TokenState& state, const Localization& loc,
                                       const MdfiConfig& config, int mask_id);

/// Writes a remediation message into the reserved buffer. The most recent
/// message overwrites any previous one; slots beyond the message stay mask.
ContextPtr write_buffer(const Context& context, const std::vector<int>& message, int mask_id);

/// Concatenated message tokens of the kept witnesses' hints.
std::vector<int> hint_message(const std::vector<Witness>& witnesses, const Vocabulary& vocab);

/// The analyzer-guided operator: checkpoint gating, witness detection,
/// localization, remask/insert, and feedback injection. Leaves the proposal
/// uncorrected; after a state edit the proposal is re-predicted by the
/// denoiser so its rows match the modified state.
class MdfiOperator final : public Operator {
public:
    MdfiOperator(const Denoiser& denoiser, mini::FunctionRegistry registry, MdfiConfig config);

    CorrectionOutcome correct(const CleanProposal& proposal, const TokenState& state,
                              int t) override;

    int fired_count() const { return fired_count_; }

private:
    const Denoiser& denoiser_;
    mini::FunctionRegistry registry_;
    MdfiConfig config_;
    int fired_count_ = 0;
};

}  // namespace cdc::mdfi
