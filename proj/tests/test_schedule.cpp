#include <doctest.h>

#include <nlohmann/json.hpp>

#include "cdc/errors.hpp"
#include "cdc/schedule.hpp"
#include "cdc/vocab.hpp"

using namespace cdc;

TEST_SUITE_BEGIN("schedule");

TEST_CASE("linear schedule T=4 gives the exact alpha sequence") {
    const auto s = make_schedule(4, ScheduleKind::Linear);
    REQUIRE(s.alpha.size() == 5);
    CHECK(s.alpha[0] == 1.0);
    CHECK(s.alpha[1] == doctest::Approx(0.75));
    CHECK(s.alpha[2] == doctest::Approx(0.5));
    CHECK(s.alpha[3] == doctest::Approx(0.25));
    CHECK(s.alpha[4] == 0.0);
}

TEST_CASE("boundary schedule T=1") {
    const auto s = make_schedule(1, ScheduleKind::Linear);
    CHECK(s.alpha[0] == 1.0);
    CHECK(s.alpha[1] == 0.0);
}

TEST_CASE("cosine schedule is strictly decreasing with exact endpoints") {
    const auto s = make_schedule(4, ScheduleKind::Cosine);
    CHECK(s.alpha[0] == 1.0);
    CHECK(s.alpha[4] == 0.0);
    for (int t = 0; t < 4; ++t) CHECK(s.alpha[t] > s.alpha[t + 1]);
}

TEST_CASE("T=0 is rejected") { CHECK_THROWS_AS(make_schedule(0, ScheduleKind::Linear), InvalidArgument); }

TEST_CASE("stepwise survival ratios stay in [0,1)") {
    for (auto kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
        const auto s = make_schedule(7, kind);
        for (int t = 1; t <= 7; ++t) {
            const double ratio = s.alpha[t] / s.alpha[t - 1];
            CHECK(ratio >= 0.0);
            CHECK(ratio < 1.0);
        }
    }
}

TEST_CASE("gamma_eta hand values on linear T=4") {
    const auto s = make_schedule(4, ScheduleKind::Linear);
    const auto ge1 = gamma_eta(s, 1);
    CHECK(ge1.gamma == doctest::Approx(0.0));
    CHECK(ge1.eta == doctest::Approx(1.0));
    const auto ge4 = gamma_eta(s, 4);
    CHECK(ge4.gamma == doctest::Approx(0.75));
    CHECK(ge4.eta == doctest::Approx(0.25));
}

TEST_CASE("gamma + eta = 1 for every t and kind") {
    for (auto kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
        const auto s = make_schedule(11, kind);
        for (int t = 1; t <= 11; ++t) {
            const auto [gamma, eta] = gamma_eta(s, t);
            CHECK(std::abs(gamma + eta - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("gamma_eta rejects t = 0") {
    const auto s = make_schedule(4, ScheduleKind::Linear);
    CHECK_THROWS_AS(gamma_eta(s, 0), InvalidArgument);
}

TEST_CASE("schedule serializes through the JSON config block") {
    const auto s = make_schedule(6, ScheduleKind::Cosine);
    const auto back = NoiseSchedule::from_json(s.to_json());
    CHECK(back.T == 6);
    CHECK(back.kind == ScheduleKind::Cosine);
    CHECK(back.alpha == s.alpha);
}

TEST_CASE("sampler config block carries schedule and vocabulary together") {
    const auto s = make_schedule(4, ScheduleKind::Linear);
    const auto vocab = Vocabulary::with_mask({"x", "y"});
    const auto block = sampler_config_block(s, vocab);
    CHECK(block.at("T") == 4);
    CHECK(block.at("kind") == "linear");
    CHECK(block.at("mask") == "[MASK]");
    const auto [sched2, vocab2] = sampler_from_config_block(block);
    CHECK(sched2.alpha == s.alpha);
    CHECK(vocab2 == vocab);
}

TEST_SUITE_END();
