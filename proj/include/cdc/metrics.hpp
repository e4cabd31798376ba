#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdc/engine.hpp"

namespace cdc::metrics {

struct EditStats {
    int edited = 0;
    int clusters = 0;
    double span_fraction = 0.0;
};

/// Before/after comparison under anchor alignment: the unchanged prefix and
/// suffix are matched, everything between counts positionwise; extra tokens
/// in `after` count as insertions at their positions.
EditStats edit_metrics(const std::vector<int>& before, const std::vector<int>& after);

/// Edited positions of one intervention in post-insertion coordinates:
/// remasked positions plus the spliced-in mask runs.
std::vector<int> intervention_positions(const StepRecord& record);

/// Per-correction statistics extracted from a trace's fired steps.
std::vector<EditStats> corrections_in_trace(const TrajectoryTrace& trace);

double median(std::vector<double> values);  // NaN on empty input

struct MetricsReport {
    int tasks = 0;
    double functional_pass_rate = 0.0;
    double security_pass_rate = 0.0;
    int total_interventions = 0;
    int correction_bearing_tasks = 0;
    double edited_per_correction_median = 0.0;
    double edited_per_correction_mean = 0.0;
    double clusters_per_correction_median = 0.0;
    double span_fraction_median = 0.0;
    double total_tokens_generated = 0.0;  // summed over tasks
    int max_interventions_per_task = 0;

    nlohmann::json to_json() const;
};

/// Aggregates verdicts and per-correction stats over many traces. Medians
/// cover correction-bearing tasks only.
MetricsReport aggregate(const std::vector<TrajectoryTrace>& traces);

}  // namespace cdc::metrics
