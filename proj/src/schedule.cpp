#include "cdc/schedule.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "cdc/errors.hpp"
#include "cdc/vocab.hpp"

namespace cdc {

std::string to_string(ScheduleKind kind) {
    return kind == ScheduleKind::Linear ? "linear" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw InvalidArgument("unknown schedule kind: " + s);
}

NoiseSchedule make_schedule(int T, ScheduleKind kind) {
    if (T < 1) throw InvalidArgument("schedule needs T >= 1");
    NoiseSchedule s;
    s.T = T;
    s.kind = kind;
    s.alpha.resize(T + 1);
    for (int t = 0; t <= T; ++t) {
        const double u = static_cast<double>(t) / static_cast<double>(T);
        switch (kind) {
            case ScheduleKind::Linear:
                s.alpha[t] = 1.0 - u;
                break;
            case ScheduleKind::Cosine: {
                const double c = std::cos(0.5 * M_PI * u);
                s.alpha[t] = c * c;
                break;
            }
        }
    }
    // endpoints are exact, not approximations
    s.alpha[0] = 1.0;
    s.alpha[T] = 0.0;
    return s;
}

GammaEta gamma_eta(const NoiseSchedule& schedule, int t) {
    if (t < 1 || t > schedule.T) throw InvalidArgument("gamma_eta: t must be in [1, T]");
    const double a_prev = schedule.alpha[t - 1];
    const double a_cur = schedule.alpha[t];
    if (!(a_cur < 1.0)) throw InvalidArgument("gamma_eta: alpha_t must be < 1");
    const double denom = 1.0 - a_cur;
    return {(1.0 - a_prev) / denom, (a_prev - a_cur) / denom};
}

nlohmann::json NoiseSchedule::to_json() const {
    return nlohmann::json{{"T", T}, {"kind", cdc::to_string(kind)}};
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
    return make_schedule(j.at("T").get<int>(), schedule_kind_from_string(j.at("kind").get<std::string>()));
}

nlohmann::json sampler_config_block(const NoiseSchedule& schedule, const Vocabulary& vocab) {
    nlohmann::json j = schedule.to_json();
    const nlohmann::json v = vocab.to_json();
    j["tokens"] = v["tokens"];
    j["mask"] = v["mask"];
    return j;
}

std::pair<NoiseSchedule, Vocabulary> sampler_from_config_block(const nlohmann::json& j) {
    return {NoiseSchedule::from_json(j), Vocabulary::from_json(j)};
}

}  // namespace cdc
