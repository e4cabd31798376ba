#include "cdc/gradguide.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cdc/errors.hpp"
#include "cdc/mini/graph.hpp"
#include "cdc/mini/parser.hpp"

namespace cdc::gradguide {

Eigen::VectorXd saliency(const CleanProposal& proposal, const Eigen::MatrixXd& grads,
                         const SaliencyConfig& config) {
    if (grads.rows() != proposal.length())
        throw InvalidArgument("saliency: gradient rows do not match proposal");
    const int L = proposal.length();
    Eigen::VectorXd a(L);
    for (int i = 0; i < L; ++i) {
        double entropy = 0.0;
        double max_p = 0.0;
        for (int v = 0; v < proposal.vocab_size(); ++v) {
            const double p = proposal.probs(i, v);
            if (p > 0.0) entropy -= p * std::log(p);
            max_p = std::max(max_p, p);
        }
        a[i] = grads.row(i).norm() + config.alpha_h * entropy + config.alpha_c * (1.0 - max_p);
    }
    return a;
}

std::vector<int> top_k_positions(const Eigen::VectorXd& a, int k) {
    std::vector<int> order(static_cast<std::size_t>(a.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a[x] > a[y]; });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(0, k))));
    return order;
}

EditRegion expand(const std::vector<int>& positions, const DecodedCandidate& candidate,
                  const Vocabulary& vocab, const mini::FunctionRegistry& registry,
                  std::vector<int>* fallback_positions) {
    const int L = static_cast<int>(candidate.tokens.size());
    const auto parsed = mini::parse_tolerant(candidate.tokens, vocab, registry);
    const auto graph = mini::build_graph(parsed.program);

    std::vector<int> collected;
    for (int p : positions) {
        if (p < 0 || p >= L) throw InvalidArgument("expand: position out of range");
        const int stmt = graph.enclosing_statement(p);
        const bool parsable = stmt >= 0 && graph.node(stmt).stmt_kind != mini::StmtKind::Hole;
        if (parsable) {
            const auto span = graph.node(stmt).span;
            for (int q = span.lo; q < span.hi; ++q) collected.push_back(q);
        } else {
            if (fallback_positions) fallback_positions->push_back(p);
            for (int q = std::max(0, p - 2); q < std::min(L, p + 3); ++q) collected.push_back(q);
        }
    }
    return EditRegion::from_positions(std::move(collected));
}

AlmState AlmState::make(int constraints, double mu0) {
    AlmState s;
    s.lambda = Eigen::VectorXd::Zero(constraints);
    s.mu = Eigen::VectorXd::Constant(constraints, mu0);
    s.dg_prev = Eigen::VectorXd::Constant(constraints, std::numeric_limits<double>::infinity());
    return s;
}

Eigen::VectorXd SurrogatePenalty::violations(const CleanProposal& y) const {
    return model_.violation(y, family_).first;
}

Eigen::MatrixXd SurrogatePenalty::grad(const CleanProposal& y, const Eigen::VectorXd& coeff) const {
    return model_.grad_wrt_proposal(y, family_, coeff);
}

Eigen::VectorXd LinearPenalty::violations(const CleanProposal& y) const {
    Eigen::VectorXd out(1);
    out[0] = (cost_.array() * y.probs.array()).sum();
    return out;
}

Eigen::MatrixXd LinearPenalty::grad(const CleanProposal& /*y*/, const Eigen::VectorXd& coeff) const {
    return coeff[0] * cost_;
}

namespace {

// Row distributions over the non-mask columns of logits u.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& u, int mask_id) {
    Eigen::MatrixXd y(u.rows(), u.cols());
    for (int i = 0; i < u.rows(); ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int v = 0; v < u.cols(); ++v)
            if (v != mask_id) m = std::max(m, u(i, v));
        double z = 0.0;
        for (int v = 0; v < u.cols(); ++v) {
            if (v == mask_id) {
                y(i, v) = 0.0;
            } else {
                y(i, v) = std::exp(u(i, v) - m);
                z += y(i, v);
            }
        }
        y.row(i) /= z;
    }
    return y;
}

struct AlmObjective {
    const Eigen::MatrixXd& base;  // epsilon-smoothed anchor rows
    const EditRegion& region;
    const AlmState& state;
    const AlmPenalty& penalty;
    int mask_id;

    double row_weight(int i) const { return region.contains(i) ? 1.0 : 1.0 + state.beta; }

    double kl_term(const Eigen::MatrixXd& y) const {
        double total = 0.0;
        for (int i = 0; i < y.rows(); ++i) {
            double kl = 0.0;
            for (int v = 0; v < y.cols(); ++v) {
                if (v == mask_id || y(i, v) <= 0.0) continue;
                kl += y(i, v) * std::log(y(i, v) / base(i, v));
            }
            total += row_weight(i) * kl;
        }
        return total;
    }

    double value(const Eigen::MatrixXd& y_probs) const {
        CleanProposal y;
        y.probs = y_probs;
        const Eigen::VectorXd dg = penalty.violations(y);
        double v = kl_term(y_probs);
        for (int j = 0; j < dg.size(); ++j)
            v += state.lambda[j] * dg[j] + 0.5 * state.mu[j] * dg[j] * dg[j];
        if (!std::isfinite(v))
            throw NumericalError("alm_project: non-finite objective (kl=" +
                                 std::to_string(kl_term(y_probs)) + ")");
        return v;
    }

    // Gradient in logit space, preconditioned per row by the anchor weight
    // so that heavily anchored rows do not throttle the step size for the
    // edit region. Scaling a row's gradient leaves stationary points alone.
    Eigen::MatrixXd grad_u(const Eigen::MatrixXd& y_probs) const {
        CleanProposal y;
        y.probs = y_probs;
        const Eigen::VectorXd dg = penalty.violations(y);
        Eigen::VectorXd coeff = state.lambda + (state.mu.array() * dg.array()).matrix();
        const Eigen::MatrixXd pgrad = penalty.grad(y, coeff);  // d/dy

        Eigen::MatrixXd gu = Eigen::MatrixXd::Zero(y_probs.rows(), y_probs.cols());
        for (int i = 0; i < y_probs.rows(); ++i) {
            const double w = row_weight(i);
            double kl = 0.0;
            double dot = 0.0;
            for (int v = 0; v < y_probs.cols(); ++v) {
                if (v == mask_id || y_probs(i, v) <= 0.0) continue;
                kl += y_probs(i, v) * std::log(y_probs(i, v) / base(i, v));
                dot += y_probs(i, v) * pgrad(i, v);
            }
            for (int v = 0; v < y_probs.cols(); ++v) {
                if (v == mask_id) continue;
                const double p = y_probs(i, v);
                if (p <= 0.0) continue;
                const double kl_part = w * p * (std::log(p / base(i, v)) - kl);
                const double pen_part = p * (pgrad(i, v) - dot);
                gu(i, v) = (kl_part + pen_part) / w;
            }
        }
        return gu;
    }
};

}  // namespace

CleanProposal alm_project(const CleanProposal& proposal, const EditRegion& region,
                          const AlmState& state, const AlmPenalty& penalty, int mask_id) {
    if (state.lambda.isZero(0.0) && state.mu.isZero(0.0)) return proposal;  // anchor is the minimizer

    const int L = proposal.length();
    const int V = proposal.vocab_size();

    // epsilon-smoothed anchor keeps logs finite on one-hot rows
    Eigen::MatrixXd base(L, V);
    for (int i = 0; i < L; ++i) {
        double z = 0.0;
        for (int v = 0; v < V; ++v) {
            base(i, v) = v == mask_id ? 0.0 : proposal.probs(i, v) + state.epsilon;
            z += base(i, v);
        }
        base.row(i) /= z;
    }

    const AlmObjective objective{base, region, state, penalty, mask_id};

    Eigen::MatrixXd u(L, V);
    for (int i = 0; i < L; ++i)
        for (int v = 0; v < V; ++v)
            u(i, v) = v == mask_id ? 0.0 : std::log(base(i, v));

    Eigen::MatrixXd y = softmax_rows(u, mask_id);
    double cur = objective.value(y);

    Eigen::MatrixXd best_y = y;
    double best = cur;

    double step = state.step_size;
    for (int it = 0; it < state.k_inner; ++it) {
        const Eigen::MatrixXd g = objective.grad_u(y);
        bool accepted = false;
        double s = step;
        for (int retry = 0; retry <= 5; ++retry) {
            Eigen::MatrixXd u_try = u - s * g;
            Eigen::MatrixXd y_try = softmax_rows(u_try, mask_id);
            const double val = objective.value(y_try);
            if (val <= cur) {
                u = std::move(u_try);
                y = std::move(y_try);
                cur = val;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if (!accepted) break;  // keep the previous iterate
        if (cur < best) {
            best = cur;
            best_y = y;
        }
    }

    // never hand back anything worse than the raw anchor
    const double anchor_value = objective.value(proposal.probs);
    if (anchor_value <= best) return proposal;

    CleanProposal out;
    out.probs = std::move(best_y);
    return out;
}

AlmState update_multipliers(AlmState state, const Eigen::VectorXd& dg_decoded) {
    if (dg_decoded.size() != state.lambda.size())
        throw InvalidArgument("update_multipliers: size mismatch");
    for (int j = 0; j < dg_decoded.size(); ++j) {
        state.lambda[j] = std::max(0.0, state.lambda[j] + state.mu[j] * dg_decoded[j]);
        if (dg_decoded[j] > 0.0 && dg_decoded[j] >= state.vartheta * state.dg_prev[j])
            state.mu[j] *= state.rho;
        state.dg_prev[j] = dg_decoded[j];
    }
    return state;
}

bool gate_mode_a(const SurrogateModel& model, const DecodedCandidate& candidate, int family,
                 double tau_alm) {
    const CleanProposal p = one_hot_proposal(candidate.tokens, model.embedding().vocab_size());
    const Eigen::VectorXd g = model.scores(soft_embed(p, model.embedding()), family);
    return g.minCoeff() < tau_alm;
}

TokenState mode_b_step(const TokenState& state, const EditRegion& region, ModeBConfig& config,
                       const std::function<bool()>& satisfies, int mask_id) {
    if (state.masked_count(mask_id) > config.m_star) return state;
    if (config.used >= config.budget) return state;
    if (satisfies()) return state;

    TokenState out = state;
    for (int p : region.positions)
        if (p >= 0 && p < out.length()) out.tokens[static_cast<std::size_t>(p)] = mask_id;
    ++config.used;
    return out;
}

nlohmann::json GradGuideConfig::to_json() const {
    return {{"k", saliency.k},
            {"alpha_h", saliency.alpha_h},
            {"alpha_c", saliency.alpha_c},
            {"beta", beta},
            {"rho", rho},
            {"vartheta", vartheta},
            {"tau_alm", tau_alm},
            {"mu0", mu0},
            {"k_inner", k_inner},
            {"step_size", step_size},
            {"epsilon", epsilon},
            {"m_star_frac", m_star_frac},
            {"budget", budget}};
}

GradGuideConfig GradGuideConfig::from_json(const nlohmann::json& j) {
    GradGuideConfig c;
    c.saliency.k = j.value("k", c.saliency.k);
    c.saliency.alpha_h = j.value("alpha_h", c.saliency.alpha_h);
    c.saliency.alpha_c = j.value("alpha_c", c.saliency.alpha_c);
    c.beta = j.value("beta", c.beta);
    c.rho = j.value("rho", c.rho);
    c.vartheta = j.value("vartheta", c.vartheta);
    c.tau_alm = j.value("tau_alm", c.tau_alm);
    c.mu0 = j.value("mu0", c.mu0);
    c.k_inner = j.value("k_inner", c.k_inner);
    c.step_size = j.value("step_size", c.step_size);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.m_star_frac = j.value("m_star_frac", c.m_star_frac);
    c.budget = j.value("budget", c.budget);
    if (c.saliency.k < 1) throw InvalidArgument("gradguide: k must be >= 1");
    if (c.saliency.alpha_h < 0 || c.saliency.alpha_c < 0)
        throw InvalidArgument("gradguide: saliency weights must be nonnegative");
    return c;
}

GradGuideOperator::GradGuideOperator(const SurrogateModel& model, const Vocabulary& vocab,
                                     mini::FunctionRegistry registry, GradGuideConfig config,
                                     int family, ExactCheck exact)
    : model_(model),
      vocab_(vocab),
      registry_(std::move(registry)),
      config_(config),
      family_(family),
      exact_(std::move(exact)) {
    alm_ = AlmState::make(model.constraints(), config.mu0);
    alm_.rho = config.rho;
    alm_.vartheta = config.vartheta;
    alm_.beta = config.beta;
    alm_.k_inner = config.k_inner;
    alm_.step_size = config.step_size;
    alm_.epsilon = config.epsilon;
    alm_.tau_alm = config.tau_alm;
}

CorrectionOutcome GradGuideOperator::correct(const CleanProposal& proposal, const TokenState& state,
                                             int /*t*/) {
    const int mask = vocab_.mask_id();
    CorrectionOutcome out;
    out.proposal = proposal;
    out.state = state;

    const DecodedCandidate candidate = decode_argmax(proposal);
    const CleanProposal cand_onehot = one_hot_proposal(candidate.tokens, vocab_.size());
    const auto [dg_cand, dg_total] = model_.violation(cand_onehot, family_);
    const Eigen::VectorXd g_cand =
        model_.scores(soft_embed(cand_onehot, model_.embedding()), family_);

    const bool run_a = g_cand.minCoeff() < config_.tau_alm;
    const int m_star =
        static_cast<int>(std::ceil(config_.m_star_frac * static_cast<double>(state.length())));
    const bool mode_b_possible =
        mode_b_used_ < config_.budget && state.masked_count(mask) <= m_star;

    EditRegion region;
    std::vector<int> fallbacks;
    if (run_a || mode_b_possible) {
        const Eigen::MatrixXd grads =
            model_.grad_wrt_embeddings(soft_embed(proposal, model_.embedding()), family_);
        const Eigen::VectorXd a = saliency(proposal, grads, config_.saliency);
        region = expand(top_k_positions(a, config_.saliency.k), candidate, vocab_, registry_,
                        &fallbacks);
    }

    bool fired_a = false;
    if (run_a) {
        const SurrogatePenalty penalty(model_, family_);
        out.proposal = alm_project(proposal, region, alm_, penalty, mask);
        alm_ = update_multipliers(alm_, dg_cand);
        fired_a = true;
    }

    bool fired_b = false;
    if (mode_b_possible) {
        ModeBConfig mb{m_star, config_.budget, mode_b_used_};
        auto satisfies = [&]() -> bool {
            const auto verdict = exact_(candidate.tokens);
            if (verdict.has_value()) return *verdict;
            for (int j = 0; j < g_cand.size(); ++j)
                if (g_cand[j] < model_.tau()[static_cast<std::size_t>(j)]) return false;
            return true;
        };
        TokenState remasked = mode_b_step(state, region, mb, satisfies, mask);
        if (mb.used != mode_b_used_) {
            fired_b = true;
            mode_b_used_ = mb.used;
            for (int p : region.positions)
                if (state.tokens[static_cast<std::size_t>(p)] != mask) out.remasked.push_back(p);
            out.state = std::move(remasked);
        }
    }

    if (fired_a || fired_b) {
        out.region = region;
        out.fired = fired_a && fired_b ? "gradguide:AB" : (fired_a ? "gradguide:A" : "gradguide:B");
    }
    out.report.scores.assign(dg_cand.data(), dg_cand.data() + dg_cand.size());
    out.report.feedback = {
        {"surrogate_scores", std::vector<double>(g_cand.data(), g_cand.data() + g_cand.size())},
        {"violation_total", dg_total},
        {"lambda", std::vector<double>(alm_.lambda.data(), alm_.lambda.data() + alm_.lambda.size())},
        {"mu", std::vector<double>(alm_.mu.data(), alm_.mu.data() + alm_.mu.size())},
        {"mode_a", fired_a},
        {"mode_b", fired_b}};
    if (!fallbacks.empty()) out.report.feedback["expand_fallback_positions"] = fallbacks;
    return out;
}

}  // namespace cdc::gradguide
