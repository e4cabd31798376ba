#pragma once

#include <nlohmann/json_fwd.hpp>

#include "cdc/mini/interp.hpp"
#include "cdc/mini/registry.hpp"
#include "cdc/ngram.hpp"
#include "cdc/rng.hpp"

namespace cdc::mini {

enum class GenKind { Functional, Security, Mixed };

GenKind gen_kind_from_string(const std::string& s);
std::string to_string(GenKind kind);

struct GenConfig {
    GenKind kind = GenKind::Functional;
    int count = 1000;
    int length = 32;
    int family = 0;
    int target = 7;             // value the final emit must produce to pass
    double correct_rate = 0.5;  // fraction of functional programs built to pass
    double vuln_rate = 0.5;     // fraction of security patterns left vulnerable
    double security_rate = 1.0; // fraction of programs carrying a security pattern
    bool allow_if = true;
    // Rigid layout: every statement sits on a fixed 5-token grid with a
    // deterministic identifier schedule, and security suites end in a fixed
    // 20-token source/sink block. Gives the denoiser a sharp positional
    // signal; requires length % 5 == 0 (functional) or length % 5 == 0 after
    // subtracting the 20-token block (security/mixed).
    bool rigid = false;

    nlohmann::json to_json() const;
    static GenConfig from_json(const nlohmann::json& j);
};

/// Seeded sampler over the grammar. Every produced program is strict-valid
/// and exactly config.length tokens long. Functional labels come from
/// running the interpreter; security labels come from running the witness
/// detector, with the construction intent recorded in CorpusEntry::pattern.
Corpus gen_corpus(const GenConfig& config, const Vocabulary& vocab, const FunctionRegistry& registry,
                  SplitRng& rng);

/// The functional pass predicate: execution succeeded and the last emitted
/// value equals the family target.
bool functional_pass(const InterpResult& result, int target);

}  // namespace cdc::mini
