#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cdc/engine.hpp"
#include "cdc/mini/registry.hpp"
#include "cdc/surrogate.hpp"

namespace cdc::gradguide {

struct SaliencyConfig {
    int k = 4;
    double alpha_h = 0.1;  // entropy weight
    double alpha_c = 0.1;  // confidence weight
};

/// Per-position edit priority: gradient norm plus weighted entropy and
/// confidence terms, all evaluated at the base proposal.
Eigen::VectorXd saliency(const CleanProposal& proposal, const Eigen::MatrixXd& grads,
                         const SaliencyConfig& config);

/// Indices of the k largest saliency values (ties toward lower positions).
std::vector<int> top_k_positions(const Eigen::VectorXd& saliency, int k);

/// Grows each position to its enclosing statement span in the decoded
/// candidate; positions in unparsable regions fall back to a +-2 token
/// window (recorded in fallback_positions). Overlapping spans merge.
EditRegion expand(const std::vector<int>& positions, const DecodedCandidate& candidate,
                  const Vocabulary& vocab, const mini::FunctionRegistry& registry,
                  std::vector<int>* fallback_positions = nullptr);

/// Multipliers, penalties and inner-loop settings of the KL-anchored
/// projection. lambda stays nonnegative and mu never decreases.
struct AlmState {
    Eigen::VectorXd lambda;   // one per constraint, >= 0
    Eigen::VectorXd mu;       // one per constraint, > 0
    Eigen::VectorXd dg_prev;  // decoded violations from the previous update
    double rho = 2.0;         // penalty growth factor
    double vartheta = 0.9;    // progress tolerance
    double beta = 100.0;      // locality anchor weight
    int k_inner = 10;
    double step_size = 0.5;
    double epsilon = 1e-8;    // log floor
    double tau_alm = 0.7;     // Mode A gate threshold

    static AlmState make(int constraints, double mu0 = 1.0);
};

/// Violation term plugged into the projection objective: values and the
/// coefficient-weighted gradient with respect to proposal entries.
class AlmPenalty {
public:
    virtual ~AlmPenalty() = default;
    virtual Eigen::VectorXd violations(const CleanProposal& y) const = 0;
    virtual Eigen::MatrixXd grad(const CleanProposal& y, const Eigen::VectorXd& coeff) const = 0;
    virtual int constraints() const = 0;
};

/// Production penalty: the surrogate's hinge violations.
class SurrogatePenalty final : public AlmPenalty {
public:
    SurrogatePenalty(const SurrogateModel& model, int family) : model_(model), family_(family) {}
    Eigen::VectorXd violations(const CleanProposal& y) const override;
    Eigen::MatrixXd grad(const CleanProposal& y, const Eigen::VectorXd& coeff) const override;
    int constraints() const override { return model_.constraints(); }

private:
    const SurrogateModel& model_;
    int family_;
};

/// Single linear constraint sum_iv cost[i][v] * y[i][v]; its exact minimizer
/// is the exponential tilt, which makes it the cross-check case.
class LinearPenalty final : public AlmPenalty {
public:
    explicit LinearPenalty(Eigen::MatrixXd cost) : cost_(std::move(cost)) {}
    Eigen::VectorXd violations(const CleanProposal& y) const override;
    Eigen::MatrixXd grad(const CleanProposal& y, const Eigen::VectorXd& coeff) const override;
    int constraints() const override { return 1; }

private:
    Eigen::MatrixXd cost_;
};

/// KL-anchored augmented-Lagrangian projection: minimizes
///   KL(y || base) + sum_j [lambda_j dg_j(y) + mu_j/2 dg_j(y)^2]
///   + beta * sum_{i not in region} KL(y_i || base_i)
/// over row distributions y, parameterized as softmax of logits initialized
/// at log(base + epsilon). Plain gradient descent with step halving; the
/// result never scores worse than the anchor itself.
CleanProposal alm_project(const CleanProposal& proposal, const EditRegion& region,
                          const AlmState& state, const AlmPenalty& penalty, int mask_id);

/// lambda_j <- [lambda_j + mu_j dg_j]_+ ; mu_j grows by rho on stalled
/// progress (dg_j > 0 and dg_j >= vartheta * dg_prev_j).
AlmState update_multipliers(AlmState state, const Eigen::VectorXd& dg_decoded);

/// True = run the inner projection; false = the candidate already satisfies
/// the gate threshold and Mode A is skipped.
bool gate_mode_a(const SurrogateModel& model, const DecodedCandidate& candidate, int family,
                 double tau_alm);

struct ModeBConfig {
    int m_star = 0;  // mask-count threshold: trigger needs n_mask <= m_star
    int budget = 2;  // global edit budget B
    int used = 0;    // edits consumed so far
};

/// Remasks the region when the state is sufficiently decoded, budget
/// remains, and the exact predicate fails. The predicate is only consulted
/// after the cheap conditions pass.
TokenState mode_b_step(const TokenState& state, const EditRegion& region, ModeBConfig& config,
                       const std::function<bool()>& satisfies, int mask_id);

struct GradGuideConfig {
    SaliencyConfig saliency;
    double beta = 100.0;
    double rho = 2.0;
    double vartheta = 0.9;
    double tau_alm = 0.7;
    double mu0 = 1.0;
    int k_inner = 10;
    double step_size = 0.5;
    double epsilon = 1e-8;
    double m_star_frac = 0.1;
    int budget = 2;

    nlohmann::json to_json() const;
    static GradGuideConfig from_json(const nlohmann::json& j);
};

/// The surrogate-gradient operator: saliency localization, gated Mode A
/// projection with multiplier updates, and constraint-triggered Mode B
/// remasking, driven by one surrogate signal per step.
class GradGuideOperator final : public Operator {
public:
    /// exact returns the hard verdict for a decoded candidate, or nullopt
    /// when the candidate cannot be executed (surrogate threshold fallback).
    using ExactCheck = std::function<std::optional<bool>(const std::vector<int>&)>;

    GradGuideOperator(const SurrogateModel& model, const Vocabulary& vocab,
                      mini::FunctionRegistry registry, GradGuideConfig config, int family,
                      ExactCheck exact);

    CorrectionOutcome correct(const CleanProposal& proposal, const TokenState& state,
                              int t) override;

    const AlmState& alm_state() const { return alm_; }
    int mode_b_used() const { return mode_b_used_; }

private:
    const SurrogateModel& model_;
    const Vocabulary& vocab_;
    mini::FunctionRegistry registry_;
    GradGuideConfig config_;
    int family_;
    ExactCheck exact_;
    AlmState alm_;
    int mode_b_used_ = 0;
};

}  // namespace cdc::gradguide
