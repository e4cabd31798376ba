#pragma once

#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "cdc/denoiser.hpp"
#include "cdc/schedule.hpp"

namespace cdc::oracles {

/// Exact distribution over final token sequences, keyed by the sequence.
struct EnumerationResult {
    std::map<std::vector<int>, double> prob;

    double total_mass() const;
};

/// Brute-force reference for the reverse sampler: enumerates every reverse
/// trajectory (all mask patterns, all fills) and accumulates exact outcome
/// probabilities. Guarded to tiny instances: |V|^L <= 1e5, L <= 4, |V| <= 8,
/// T <= 4; anything larger is refused outright.
EnumerationResult exact_posterior(const Denoiser& denoiser, const NoiseSchedule& schedule, int length,
                                  ContextPtr context);

/// Total variation distance between an enumeration and empirical counts.
double tv_distance(const EnumerationResult& exact,
                   const std::map<std::vector<int>, double>& empirical);

/// Central finite differences, one coordinate at a time.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point, double h);

/// Minimizer of KL(y || base) + lambda * <cost, y> over the simplex:
/// y(v) proportional to base(v) * exp(-lambda * cost(v)).
Eigen::VectorXd tilt_closed_form(const Eigen::VectorXd& base, const Eigen::VectorXd& cost,
                                 double lambda);

}  // namespace cdc::oracles
