#pragma once

#include <string>
#include <vector>

#include "cdc/errors.hpp"
#include "cdc/mini/ast.hpp"
#include "cdc/mini/registry.hpp"
#include "cdc/vocab.hpp"

namespace cdc::mini {

struct ParseError : InvalidArgument {
    int position;  // token index
    ParseError(int pos, const std::string& what)
        : InvalidArgument("token " + std::to_string(pos) + ": " + what), position(pos) {}
};

/// Full grammar with no tolerance: masks are rejected, every statement must
/// parse, and every used identifier must have been defined by an earlier
/// let-binding.
Program parse_strict(const std::vector<int>& tokens, const Vocabulary& vocab,
                     const FunctionRegistry& registry);

struct TolerantResult {
    Program program;
    std::vector<int> hole_positions;   // token positions that were mask
    int recovered_statements = 0;      // statements degraded to opaque holes
};

/// Never fails. Masks are rewritten to fresh placeholder identifiers
/// __hole_<i>__ (i = token position) whose lexical class follows from the
/// grammar position; statements that still do not parse become opaque
/// hole-statements spanning their tokens.
TolerantResult parse_tolerant(const std::vector<int>& tokens, const Vocabulary& vocab,
                              const FunctionRegistry& registry);

/// True when the position-indexed placeholder naming scheme produced this name.
bool is_hole_name(const std::string& name);

std::string hole_name(int token_pos);

}  // namespace cdc::mini
