#include "cdc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdc::metrics {

EditStats edit_metrics(const std::vector<int>& before, const std::vector<int>& after) {
    const int lb = static_cast<int>(before.size());
    const int la = static_cast<int>(after.size());

    int prefix = 0;
    while (prefix < lb && prefix < la && before[prefix] == after[prefix]) ++prefix;
    int suffix = 0;
    while (suffix < lb - prefix && suffix < la - prefix &&
           before[lb - 1 - suffix] == after[la - 1 - suffix])
        ++suffix;

    std::vector<bool> edited(static_cast<std::size_t>(la), false);
    for (int i = prefix; i < la - suffix; ++i) {
        const int j = i;  // aligned position in `before`
        const bool differs = j >= lb - suffix || before[j] != after[i];
        edited[static_cast<std::size_t>(i)] = differs;
    }

    EditStats stats;
    bool in_run = false;
    for (std::size_t i = 0; i < edited.size(); ++i) {
        if (edited[i]) {
            ++stats.edited;
            if (!in_run) ++stats.clusters;
            in_run = true;
        } else {
            in_run = false;
        }
    }
    stats.span_fraction = la == 0 ? 0.0 : static_cast<double>(stats.edited) / la;
    return stats;
}

std::vector<int> intervention_positions(const StepRecord& record) {
    std::vector<int> positions = record.remasked;
    // insertion anchors are pre-insertion coordinates; shift by masks spliced
    // in front of them
    std::vector<std::pair<int, int>> ins = record.insertions;
    std::sort(ins.begin(), ins.end());
    int shift = 0;
    for (const auto& [anchor, count] : ins) {
        for (int k = 0; k < count; ++k) positions.push_back(anchor + shift + k);
        shift += count;
    }
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    return positions;
}

std::vector<EditStats> corrections_in_trace(const TrajectoryTrace& trace) {
    std::vector<EditStats> out;
    for (const auto& rec : trace.steps) {
        if (rec.fired == "none" || rec.edited_tokens == 0) continue;
        EditStats s;
        const std::vector<int> positions = intervention_positions(rec);
        s.edited = static_cast<int>(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i)
            if (i == 0 || positions[i] != positions[i - 1] + 1) ++s.clusters;
        const int len = rec.state_after_op.empty() ? static_cast<int>(rec.state_after.size())
                                                   : static_cast<int>(rec.state_after_op.size());
        s.span_fraction = len == 0 ? 0.0 : static_cast<double>(s.edited) / len;
        out.push_back(s);
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

nlohmann::json MetricsReport::to_json() const {
    return {{"tasks", tasks},
            {"functional_pass_rate", functional_pass_rate},
            {"security_pass_rate", security_pass_rate},
            {"total_interventions", total_interventions},
            {"correction_bearing_tasks", correction_bearing_tasks},
            {"edited_per_correction_median", edited_per_correction_median},
            {"edited_per_correction_mean", edited_per_correction_mean},
            {"clusters_per_correction_median", clusters_per_correction_median},
            {"span_fraction_median", span_fraction_median},
            {"total_tokens_generated", total_tokens_generated},
            {"max_interventions_per_task", max_interventions_per_task}};
}

MetricsReport aggregate(const std::vector<TrajectoryTrace>& traces) {
    MetricsReport report;
    report.tasks = static_cast<int>(traces.size());

    int func_pass = 0;
    int sec_pass = 0;
    std::vector<double> edited, clusters, fractions;
    for (const auto& trace : traces) {
        if (trace.final_verdicts.value("functional", false)) ++func_pass;
        if (trace.final_verdicts.value("security", false)) ++sec_pass;
        report.total_tokens_generated += static_cast<double>(trace.final_tokens.size());

        const auto corrections = corrections_in_trace(trace);
        int fired = trace.interventions();
        report.total_interventions += fired;
        report.max_interventions_per_task = std::max(report.max_interventions_per_task, fired);
        if (!corrections.empty()) ++report.correction_bearing_tasks;
        for (const auto& c : corrections) {
            edited.push_back(c.edited);
            clusters.push_back(c.clusters);
            fractions.push_back(c.span_fraction);
        }
    }
    if (report.tasks > 0) {
        report.functional_pass_rate = static_cast<double>(func_pass) / report.tasks;
        report.security_pass_rate = static_cast<double>(sec_pass) / report.tasks;
    }
    if (!edited.empty()) {
        report.edited_per_correction_median = median(edited);
        double sum = 0.0;
        for (double e : edited) sum += e;
        report.edited_per_correction_mean = sum / static_cast<double>(edited.size());
        report.clusters_per_correction_median = median(clusters);
        report.span_fraction_median = median(fractions);
    }
    return report;
}

}  // namespace cdc::metrics
