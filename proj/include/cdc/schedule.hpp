#pragma once

#include <string>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace cdc {

enum class ScheduleKind { Linear, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

/// Noise schedule alpha_0..alpha_T with alpha_0 = 1 and alpha_T = 0,
/// strictly decreasing. alpha_t is the per-position survival probability
/// of a clean token up to step t.
struct NoiseSchedule {
    int T = 0;
    ScheduleKind kind = ScheduleKind::Linear;
    Eigen::VectorXd alpha;  // size T+1

    nlohmann::json to_json() const;
    static NoiseSchedule from_json(const nlohmann::json& j);
};

NoiseSchedule make_schedule(int T, ScheduleKind kind);

/// Reverse-kernel mixture coefficients at step t:
/// gamma = mask retention, eta = fill probability; gamma + eta = 1.
struct GammaEta {
    double gamma;
    double eta;
};

GammaEta gamma_eta(const NoiseSchedule& schedule, int t);

class Vocabulary;

/// Combined sampler config block:
/// {"T": int, "kind": "linear"|"cosine", "tokens": [...], "mask": "[MASK]"}.
nlohmann::json sampler_config_block(const NoiseSchedule& schedule, const Vocabulary& vocab);
std::pair<NoiseSchedule, Vocabulary> sampler_from_config_block(const nlohmann::json& j);

}  // namespace cdc
