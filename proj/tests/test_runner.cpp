#include <doctest.h>

#include "cdc/errors.hpp"
#include "cdc/runner.hpp"

using namespace cdc;

namespace {

RunConfig smoke_config(const std::string& op) {
    RunConfig c;
    c.seed = 2025;
    c.T = 8;
    c.length = 32;
    c.tasks = 6;
    c.operator_name = op;
    c.denoiser_corpus.kind = mini::GenKind::Mixed;
    c.denoiser_corpus.count = 200;
    c.denoiser_corpus.length = 32;
    c.denoiser_corpus.security_rate = 0.5;
    c.surrogate_corpus.kind = mini::GenKind::Functional;
    c.surrogate_corpus.count = 200;
    c.surrogate_corpus.length = 32;
    c.surrogate.epochs = 20;
    c.suite_kind = op == "mdfi" ? "security" : "functional";
    return c;
}

}  // namespace

TEST_SUITE_BEGIN("runner");

TEST_CASE("config validation enumerates every problem at once") {
    RunConfig c;
    c.T = 0;
    c.length = 0;
    c.tasks = 0;
    c.operator_name = "bogus";
    c.suite_kind = "nope";
    c.denoiser_path = "/definitely/not/here.json";
    const auto errors = c.validate();
    CHECK(errors.size() >= 6);
}

TEST_CASE("config JSON round-trips") {
    RunConfig c = smoke_config("mdfi");
    c.mdfi.b_tok = 11;
    c.gradguide.tau_alm = 0.55;
    const RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back.seed == c.seed);
    CHECK(back.T == c.T);
    CHECK(back.operator_name == "mdfi");
    CHECK(back.mdfi.b_tok == 11);
    CHECK(back.gradguide.tau_alm == doctest::Approx(0.55));
    CHECK(back.suite_kind == "security");
    CHECK(back.denoiser_corpus.count == 200);
}

TEST_CASE("an invalid config aborts before any work") {
    RunConfig c = smoke_config("none");
    c.tasks = -1;
    CHECK_THROWS_AS(run_suite(c), InvalidArgument);
}

TEST_CASE("suite runs are deterministic per seed") {
    const RunConfig c = smoke_config("none");
    const auto models = prepare_models(c);
    const auto r1 = run_suite(c, models);
    const auto r2 = run_suite(c, models);
    REQUIRE(r1.traces.size() == r2.traces.size());
    for (std::size_t i = 0; i < r1.traces.size(); ++i)
        CHECK(r1.traces[i].final_tokens == r2.traces[i].final_tokens);
    CHECK(r1.report.functional_pass_rate == r2.report.functional_pass_rate);
}

TEST_CASE("identity and mdfi agree task by task when no checkpoint can fire") {
    RunConfig base = smoke_config("none");
    base.suite_kind = "security";
    RunConfig with_op = base;
    with_op.operator_name = "mdfi";
    with_op.mdfi.b_int = 0;  // budget zero: the gate never opens
    const auto models = prepare_models(base);
    const auto r_none = run_suite(base, models);
    const auto r_mdfi = run_suite(with_op, models);
    REQUIRE(r_none.traces.size() == r_mdfi.traces.size());
    for (std::size_t i = 0; i < r_none.traces.size(); ++i)
        CHECK(r_none.traces[i].final_tokens == r_mdfi.traces[i].final_tokens);
}

TEST_CASE("report numbers are recomputable from the traces alone") {
    RunConfig c = smoke_config("mdfi");
    c.tasks = 8;
    const auto result = run_suite(c);
    const auto recomputed = metrics::aggregate(result.traces);
    CHECK(recomputed.functional_pass_rate == result.report.functional_pass_rate);
    CHECK(recomputed.security_pass_rate == result.report.security_pass_rate);
    CHECK(recomputed.total_interventions == result.report.total_interventions);
    CHECK(recomputed.edited_per_correction_median == result.report.edited_per_correction_median);

    // and from serialized traces too
    std::vector<TrajectoryTrace> roundtrip;
    for (const auto& t : result.traces)
        roundtrip.push_back(TrajectoryTrace::from_json_lines(t.to_json_lines()));
    const auto re2 = metrics::aggregate(roundtrip);
    CHECK(re2.total_interventions == result.report.total_interventions);
    CHECK(re2.edited_per_correction_median == result.report.edited_per_correction_median);
}

TEST_CASE("every trajectory takes exactly T reverse steps") {
    for (const char* op : {"none", "mdfi"}) {
        RunConfig c = smoke_config(op);
        c.tasks = 4;
        const auto result = run_suite(c);
        for (const auto& trace : result.traces) CHECK(trace.steps.size() == static_cast<std::size_t>(c.T));
    }
}

TEST_CASE("the composite operator chains gradguide and mdfi") {
    RunConfig c = smoke_config("both");
    c.suite_kind = "security";
    c.tasks = 4;
    c.denoiser_corpus.kind = mini::GenKind::Security;
    c.denoiser_corpus.rigid = true;
    c.denoiser_corpus.length = 40;
    c.length = 40;
    c.T = 16;
    const auto result = run_suite(c);
    REQUIRE(result.traces.size() == 4);
    for (const auto& trace : result.traces) {
        CHECK(trace.steps.size() == 16);
        for (const auto& s : trace.steps) {
            // per-step reports carry both operators' feedback keys
            if (s.fired.find("mdfi") != std::string::npos) CHECK(s.report.contains("witnesses"));
            if (s.fired.find("gradguide") != std::string::npos) CHECK(s.report.contains("mode_a"));
        }
    }
}

TEST_CASE("the resample baseline regenerates failures once and records it") {
    RunConfig c = smoke_config("resample");
    c.suite_kind = "functional";  // weak smoke denoiser: functional failures are guaranteed
    c.tasks = 10;
    const auto result = run_suite(c);
    bool any_resampled = false;
    for (const auto& trace : result.traces) {
        if (trace.final_verdicts.value("resampled", false)) {
            any_resampled = true;
            CHECK(trace.final_verdicts["regenerated_tokens"].get<int>() == c.length);
        }
    }
    CHECK(any_resampled);  // at this corpus mix some first samples fail
    CHECK(result.report_json.contains("resample"));
}

TEST_SUITE_END();
