#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdc/engine.hpp"
#include "cdc/gradguide.hpp"
#include "cdc/mdfi.hpp"
#include "cdc/metrics.hpp"
#include "cdc/mini/gen.hpp"
#include "cdc/ngram.hpp"
#include "cdc/schedule.hpp"
#include "cdc/surrogate.hpp"

namespace cdc {

struct TrainSpec {
    mini::GenConfig corpus;
    NgramConfig ngram;             // denoiser training
    SurrogateConfig surrogate;     // surrogate training
};

/// One experiment: models, schedule, operator selection, task suite.
struct RunConfig {
    std::uint64_t seed = 42;
    int T = 16;
    ScheduleKind schedule_kind = ScheduleKind::Linear;
    int length = 32;
    std::string operator_name = "none";  // none | gradguide | mdfi | both | resample

    std::string denoiser_path;           // load when set, otherwise train
    mini::GenConfig denoiser_corpus;
    NgramConfig ngram;

    std::string surrogate_path;
    mini::GenConfig surrogate_corpus;
    SurrogateConfig surrogate;

    gradguide::GradGuideConfig gradguide;
    mdfi::MdfiConfig mdfi;
    mini::FunctionRegistry registry;

    std::string suite_kind = "functional";  // functional | security
    int tasks = 200;
    int target = 7;
    int family = 0;

    std::string out_dir;  // traces and report land here when non-empty

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    /// All problems at once; empty means valid.
    std::vector<std::string> validate() const;

    bool wants_surrogate() const {
        return operator_name == "gradguide" || operator_name == "both";
    }
    bool wants_mdfi() const { return operator_name == "mdfi" || operator_name == "both"; }
};

struct SuiteResult {
    metrics::MetricsReport report;
    std::vector<TrajectoryTrace> traces;
    nlohmann::json report_json;
};

/// Prepared models shared across a suite (and across suites in tests).
struct SuiteModels {
    std::shared_ptr<NgramDenoiser> denoiser;
    std::shared_ptr<SurrogateModel> surrogate;  // null unless needed
    SurrogateTrainReport surrogate_report;
};

SuiteModels prepare_models(const RunConfig& config);

/// Runs the whole task suite deterministically: one trajectory per task,
/// per-task traces, aggregate report. With operator "resample", failing
/// tasks are regenerated once in full and every regenerated token counts as
/// edited.
SuiteResult run_suite(const RunConfig& config, const SuiteModels& models);
SuiteResult run_suite(const RunConfig& config);

/// Per-task verdicts used by suites and Mode B's exact check.
bool functional_verdict(const std::vector<int>& tokens, const Vocabulary& vocab,
                        const mini::FunctionRegistry& registry, int target);
bool security_verdict(const std::vector<int>& tokens, const Vocabulary& vocab,
                      const mini::FunctionRegistry& registry);

}  // namespace cdc
