#include "cdc/oracles.hpp"

#include <cmath>

#include "cdc/errors.hpp"

namespace cdc::oracles {

double EnumerationResult::total_mass() const {
    double s = 0.0;
    for (const auto& [seq, p] : prob) s += p;
    return s;
}

namespace {

// Expands one state into all successor states of a single reverse step.
void expand_masked(const std::vector<int>& tokens, const std::vector<int>& masked_positions,
                   std::size_t idx, double weight, const Eigen::MatrixXd& rows, double gamma,
                   double eta, int mask_id, std::map<std::vector<int>, double>& out,
                   std::vector<int>& scratch) {
    if (weight == 0.0) return;
    if (idx == masked_positions.size()) {
        auto it = out.find(scratch);
        if (it == out.end())
            out.emplace(scratch, weight);
        else
            it->second += weight;
        return;
    }
    const int pos = masked_positions[idx];
    // stay mask
    scratch[pos] = mask_id;
    expand_masked(tokens, masked_positions, idx + 1, weight * gamma, rows, gamma, eta, mask_id, out,
                  scratch);
    // commit to each token
    for (int v = 0; v < rows.cols(); ++v) {
        const double p = rows(pos, v);
        if (p <= 0.0) continue;
        scratch[pos] = v;
        expand_masked(tokens, masked_positions, idx + 1, weight * eta * p, rows, gamma, eta, mask_id,
                      out, scratch);
    }
    scratch[pos] = mask_id;
}

}  // namespace

EnumerationResult exact_posterior(const Denoiser& denoiser, const NoiseSchedule& schedule, int length,
                                  ContextPtr context) {
    const auto& vocab = denoiser.vocab();
    const int V = vocab.size();
    const int mask = vocab.mask_id();
    if (length > 4 || V > 8 || schedule.T > 4 || std::pow(static_cast<double>(V), length) > 1e5)
        throw InvalidArgument("exact_posterior: instance exceeds the enumeration guard");

    std::map<std::vector<int>, double> states;
    states.emplace(std::vector<int>(static_cast<std::size_t>(length), mask), 1.0);

    for (int t = schedule.T; t >= 1; --t) {
        const auto [gamma, eta] = gamma_eta(schedule, t);
        std::map<std::vector<int>, double> next;
        for (const auto& [tokens, weight] : states) {
            std::vector<int> masked;
            for (int i = 0; i < length; ++i)
                if (tokens[i] == mask) masked.push_back(i);
            if (masked.empty()) {
                next[tokens] += weight;
                continue;
            }
            TokenState st;
            st.tokens = tokens;
            st.context = context;
            st.timestep = t;
            const CleanProposal proposal = denoiser.predict(st, t);
            std::vector<int> scratch = tokens;
            expand_masked(tokens, masked, 0, weight, proposal.probs, gamma, eta, mask, next, scratch);
        }
        states.swap(next);
    }

    EnumerationResult result;
    for (auto& [tokens, p] : states) {
        for (int tok : tokens)
            if (tok == mask) throw NumericalError("exact_posterior: mask survived to t = 0");
        result.prob.emplace(tokens, p);
    }
    return result;
}

double tv_distance(const EnumerationResult& exact,
                   const std::map<std::vector<int>, double>& empirical) {
    double tv = 0.0;
    for (const auto& [seq, p] : exact.prob) {
        auto it = empirical.find(seq);
        const double q = it == empirical.end() ? 0.0 : it->second;
        tv += std::abs(p - q);
    }
    for (const auto& [seq, q] : empirical)
        if (exact.prob.find(seq) == exact.prob.end()) tv += q;
    return 0.5 * tv;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point, double h) {
    if (h <= 0.0) throw InvalidArgument("fd_gradient: h must be > 0");
    Eigen::VectorXd g(point.size());
    Eigen::VectorXd x = point;
    for (int i = 0; i < point.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Eigen::VectorXd tilt_closed_form(const Eigen::VectorXd& base, const Eigen::VectorXd& cost,
                                 double lambda) {
    if (base.size() != cost.size()) throw InvalidArgument("tilt_closed_form: size mismatch");
    Eigen::VectorXd y = base.array() * (-lambda * cost.array()).exp();
    const double z = y.sum();
    if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("tilt_closed_form: degenerate normalizer");
    return y / z;
}

}  // namespace cdc::oracles
