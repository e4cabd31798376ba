#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdc/mini/ast.hpp"

namespace cdc::mini {

enum class InterpStatus { Ok, NotExecutable, UndefinedVariable, AssignUndefined, StepLimit };

struct SinkRecord {
    std::string callee;
    std::int64_t value;
};

struct InterpResult {
    InterpStatus status = InterpStatus::Ok;
    std::vector<std::int64_t> outputs;   // values passed to 'emit'
    std::vector<SinkRecord> sink_calls;  // sink callee and argument value
    int steps = 0;

    bool ok() const { return status == InterpStatus::Ok; }
};

/// Deterministic small-step evaluation. Programs with holes are refused as
/// NotExecutable; evaluation stops with StepLimit after step_bound evaluated
/// nodes. 'input' consumes the provided inputs in order (0 once exhausted),
/// 'escape' passes its value through, sinks record their argument.
InterpResult interpret(const Program& program, const std::vector<std::int64_t>& inputs,
                       int step_bound = 10000);

}  // namespace cdc::mini
