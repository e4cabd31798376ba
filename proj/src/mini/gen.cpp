#include "cdc/mini/gen.hpp"

#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "cdc/errors.hpp"
#include "cdc/mdfi.hpp"
#include "cdc/mini/parser.hpp"

namespace cdc::mini {

GenKind gen_kind_from_string(const std::string& s) {
    if (s == "functional") return GenKind::Functional;
    if (s == "security") return GenKind::Security;
    if (s == "mixed") return GenKind::Mixed;
    throw InvalidArgument("unknown corpus kind: " + s);
}

std::string to_string(GenKind kind) {
    switch (kind) {
        case GenKind::Functional: return "functional";
        case GenKind::Security: return "security";
        default: return "mixed";
    }
}

nlohmann::json GenConfig::to_json() const {
    return {{"kind", mini::to_string(kind)},
            {"count", count},
            {"length", length},
            {"family", family},
            {"target", target},
            {"correct_rate", correct_rate},
            {"vuln_rate", vuln_rate},
            {"security_rate", security_rate},
            {"allow_if", allow_if},
            {"rigid", rigid}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
    GenConfig c;
    if (j.contains("kind")) c.kind = gen_kind_from_string(j["kind"].get<std::string>());
    c.count = j.value("count", c.count);
    c.length = j.value("length", c.length);
    c.family = j.value("family", c.family);
    c.target = j.value("target", c.target);
    c.correct_rate = j.value("correct_rate", c.correct_rate);
    c.vuln_rate = j.value("vuln_rate", c.vuln_rate);
    c.security_rate = j.value("security_rate", c.security_rate);
    c.allow_if = j.value("allow_if", c.allow_if);
    c.rigid = j.value("rigid", c.rigid);
    return c;
}

bool functional_pass(const InterpResult& result, int target) {
    return result.ok() && !result.outputs.empty() && result.outputs.back() == target;
}

namespace {

const std::vector<std::string> kIdents = {"a", "b", "c", "d"};

enum class Ending { None, PassLetEmit, PassEmit, FailEmit };

int ending_size(Ending e) {
    switch (e) {
        case Ending::None: return 0;
        case Ending::PassLetEmit: return 10;
        default: return 5;
    }
}

bool representable(int r) { return r == 0 || r >= 4; }

// Statement sizes summing exactly to the budget; when let_first is set the
// first statement must be a let (sizes 5, 7, 9).
std::optional<std::vector<int>> compose_sizes(int budget, bool let_first, SplitRng& rng) {
    std::vector<int> sizes;
    int rem = budget;
    bool first = true;
    while (rem > 0) {
        std::vector<int> candidates;
        for (int s = 4; s <= 9; ++s) {
            if (s > rem || !representable(rem - s)) continue;
            if (first && let_first && s % 2 == 0) continue;  // let statements have odd sizes
            candidates.push_back(s);
        }
        if (candidates.empty()) return std::nullopt;
        sizes.push_back(candidates[static_cast<std::size_t>(rng.below(candidates.size()))]);
        rem -= sizes.back();
        first = false;
    }
    return sizes;
}

class ProgramBuilder {
public:
    ProgramBuilder(const GenConfig& config, SplitRng& rng) : config_(config), rng_(rng) {}

    std::vector<std::string> tokens;

    void header() {
        const std::string id = fresh_ident();
        const int d = digit();
        emit_tokens({"let", id, "=", std::to_string(d), ";"});
        set_var(id, d);
    }

    void filler(int size) {
        switch (size) {
            case 4: assign_stmt(1); break;
            case 5:
                if (!env_.empty() && chance(0.1)) {
                    emit_tokens({"check", "(", any_var(), ")", ";"});
                } else {
                    let_stmt(1);
                }
                break;
            case 6: assign_stmt(2); break;
            case 7: let_stmt(2); break;
            case 8:
                if (config_.allow_if && !env_.empty() && chance(0.5)) {
                    if_stmt(4);
                } else {
                    assign_stmt(3);
                }
                break;
            case 9:
                if (config_.allow_if && !env_.empty() && chance(0.5)) {
                    if_stmt(5);
                } else {
                    let_stmt(3);
                }
                break;
            default: throw NumericalError("filler size out of range");
        }
    }

    void security_block(bool vulnerable, bool compact) {
        const std::string x = fresh_ident();
        const std::string sink = chance(0.5) ? "exec" : "query";
        emit_tokens({"let", x, "=", "input", "(", ")", ";"});
        set_var(x, 0);  // inputs are exhausted at evaluation time
        if (vulnerable) {
            emit_tokens({sink, "(", x, ")", ";"});
        } else if (compact) {
            emit_tokens({"check", "(", x, ")", ";"});
            emit_tokens({sink, "(", "escape", "(", x, ")", ")", ";"});
        } else {
            std::string y = fresh_ident();
            if (y == x) y = kIdents[(index_of(x) + 1) % kIdents.size()];
            emit_tokens({"let", y, "=", "escape", "(", x, ")", ";"});
            set_var(y, value_of(x));
            emit_tokens({"check", "(", y, ")", ";"});
            emit_tokens({sink, "(", y, ")", ";"});
        }
    }

    void ending(Ending kind) {
        switch (kind) {
            case Ending::None:
                break;
            case Ending::PassLetEmit: {
                const std::string w = fresh_ident();
                emit_tokens({"let", w, "=", std::to_string(config_.target), ";"});
                set_var(w, config_.target);
                emit_tokens({"emit", "(", w, ")", ";"});
                break;
            }
            case Ending::PassEmit: {
                const std::string match = var_with_value(config_.target);
                if (!match.empty() && chance(0.5)) {
                    emit_tokens({"emit", "(", match, ")", ";"});
                } else {
                    emit_tokens({"emit", "(", std::to_string(config_.target), ")", ";"});
                }
                break;
            }
            case Ending::FailEmit: {
                const std::string off = var_without_value(config_.target);
                if (!off.empty() && chance(0.5)) {
                    emit_tokens({"emit", "(", off, ")", ";"});
                } else {
                    int d = digit();
                    if (d == config_.target) d = (d + 1) % 10;
                    emit_tokens({"emit", "(", std::to_string(d), ")", ";"});
                }
                break;
            }
        }
    }

private:
    void emit_tokens(std::initializer_list<std::string> toks) {
        for (const auto& t : toks) tokens.push_back(t);
    }
    void emit_tokens(const std::vector<std::string>& toks) {
        for (const auto& t : toks) tokens.push_back(t);
    }

    bool chance(double p) { return rng_.uniform() < p; }
    int digit() { return static_cast<int>(rng_.below(10)); }

    static std::size_t index_of(const std::string& id) {
        for (std::size_t i = 0; i < kIdents.size(); ++i)
            if (kIdents[i] == id) return i;
        return 0;
    }

    std::string fresh_ident() { return kIdents[static_cast<std::size_t>(rng_.below(kIdents.size()))]; }

    std::string any_var() {
        auto it = env_.begin();
        std::advance(it, static_cast<long>(rng_.below(env_.size())));
        return it->first;
    }

    std::string var_with_value(long long v) {
        for (const auto& [name, val] : env_)
            if (val == v) return name;
        return "";
    }

    std::string var_without_value(long long v) {
        for (const auto& [name, val] : env_)
            if (val != v) return name;
        return "";
    }

    void set_var(const std::string& name, long long v) { env_[name] = v; }
    long long value_of(const std::string& name) const {
        auto it = env_.find(name);
        return it == env_.end() ? 0 : it->second;
    }

    // expression of `units` terms joined by operators; returns its value
    std::pair<std::vector<std::string>, long long> expr(int units) {
        std::vector<std::string> toks;
        long long value = 0;
        for (int i = 0; i < units; ++i) {
            std::string term;
            long long term_val;
            if (env_.empty() || chance(0.5)) {
                const int d = digit();
                term = std::to_string(d);
                term_val = d;
            } else {
                term = any_var();
                term_val = value_of(term);
            }
            if (i == 0) {
                value = term_val;
            } else {
                const char ops[3] = {'+', '-', '*'};
                const char op = ops[rng_.below(3)];
                toks.push_back(std::string(1, op));
                // mirror the interpreter's wraparound arithmetic
                const unsigned long long ul = static_cast<unsigned long long>(value);
                const unsigned long long ur = static_cast<unsigned long long>(term_val);
                switch (op) {
                    case '+': value = static_cast<long long>(ul + ur); break;
                    case '-': value = static_cast<long long>(ul - ur); break;
                    default: value = static_cast<long long>(ul * ur); break;
                }
            }
            toks.push_back(term);
        }
        return {toks, value};
    }

    void let_stmt(int units) {
        const std::string v = fresh_ident();
        auto [e, val] = expr(units);
        std::vector<std::string> toks = {"let", v, "="};
        toks.insert(toks.end(), e.begin(), e.end());
        toks.push_back(";");
        emit_tokens(toks);
        set_var(v, val);
    }

    void assign_stmt(int units) {
        const std::string v = any_var();
        auto [e, val] = expr(units);
        std::vector<std::string> toks = {v, "="};
        toks.insert(toks.end(), e.begin(), e.end());
        toks.push_back(";");
        emit_tokens(toks);
        set_var(v, val);
    }

    void if_stmt(int body_size) {
        const std::string c = any_var();
        emit_tokens({"if", c, "{"});
        const bool taken = value_of(c) != 0;
        // body effects apply only when the branch runs; generate then patch env
        std::map<std::string, long long> saved = env_;
        if (body_size == 4) assign_stmt(1);
        else let_stmt(1);
        if (!taken) env_ = std::move(saved);
        emit_tokens({"}"});
    }

    const GenConfig& config_;
    SplitRng& rng_;
    std::map<std::string, long long> env_;
};

struct Layout {
    bool header = false;
    Ending ending = Ending::None;
    bool security = false;
    bool vulnerable = false;
    bool compact_safe = false;
    std::vector<int> filler_sizes;
    std::size_t security_slot = 0;  // filler boundary index
};

std::optional<Layout> plan_layout(const GenConfig& config, GenKind kind, bool want_pass,
                                  bool want_security, bool vulnerable, SplitRng& rng) {
    std::vector<Ending> ending_options;
    if (kind == GenKind::Security) {
        ending_options = {Ending::None};
    } else if (want_pass) {
        ending_options = rng.uniform() < 0.5
                             ? std::vector<Ending>{Ending::PassLetEmit, Ending::PassEmit}
                             : std::vector<Ending>{Ending::PassEmit, Ending::PassLetEmit};
    } else {
        ending_options = rng.uniform() < 0.75
                             ? std::vector<Ending>{Ending::FailEmit, Ending::None}
                             : std::vector<Ending>{Ending::None, Ending::FailEmit};
    }
    // the sanitized pattern exists in a 25-token and a 20-token form
    std::vector<std::pair<int, bool>> security_variants;  // (size, compact)
    if (!want_security) {
        security_variants = {{0, false}};
    } else if (vulnerable) {
        security_variants = {{12, false}};
    } else {
        security_variants = rng.uniform() < 0.5
                                ? std::vector<std::pair<int, bool>>{{25, false}, {20, true}}
                                : std::vector<std::pair<int, bool>>{{20, true}, {25, false}};
    }

    for (bool header : {true, false}) {
        for (Ending ending : ending_options) {
            for (const auto& [sec_size, compact] : security_variants) {
                const int rem = config.length - (header ? 5 : 0) - ending_size(ending) - sec_size;
                if (rem < 0 || !representable(rem)) continue;
                // without a header, the first statement must define a variable;
                // a leading security block does that on its own
                const bool let_first = !header && !want_security;
                auto sizes = compose_sizes(rem, let_first && rem > 0, rng);
                if (!sizes) continue;
                Layout layout;
                layout.header = header;
                layout.ending = ending;
                layout.security = want_security;
                layout.vulnerable = vulnerable;
                layout.compact_safe = compact;
                layout.filler_sizes = *sizes;
                layout.security_slot =
                    header ? rng.below(layout.filler_sizes.size() + 1) : 0;  // lead when headerless
                return layout;
            }
        }
    }
    return std::nullopt;
}

// Fixed-grid builder: 5-token statements with a deterministic identifier
// schedule, optionally terminated by the 20-token security block.
class RigidBuilder {
public:
    RigidBuilder(const GenConfig& config, SplitRng& rng) : config_(config), rng_(rng) {}

    std::vector<std::string> tokens;

    void slot(bool is_first, bool is_final_emit) {
        if (is_first) {
            define_next(std::to_string(digit()));
            return;
        }
        if (is_final_emit) {
            final_emit();
            return;
        }
        // one statement shape per slot keeps the positional signal sharp
        if (env_.empty() || rng_.uniform() < 0.85) {
            define_next(unit());
        } else {
            const std::string v = any_var();
            const std::string u = unit();
            emit_tokens({"let", v, "=", u, ";"});
            set_from_unit(v, u);
        }
    }

    // 20 tokens in all variants, aligned slot by slot. The safe form guards
    // and sanitizes; the vulnerable forms either drop the guard (insertion
    // repair) or route the flow through a pass-through call (remask repair).
    void security_block(bool vulnerable, const std::string& sink) {
        const std::string x = kIdents[static_cast<std::size_t>(defined_count_ % 4)];
        const std::string y = kIdents[static_cast<std::size_t>((defined_count_ + 1) % 4)];
        emit_tokens({"let", x, "=", "input", "(", ")", ";"});
        env_[x] = 0;
        const bool tainted_variant = vulnerable && rng_.uniform() < 0.5;
        if (!vulnerable || tainted_variant) {
            emit_tokens({"check", "(", x, ")", ";"});
        } else {
            const std::string u = unit();
            emit_tokens({"let", y, "=", u, ";"});
            set_from_unit(y, u);
        }
        emit_tokens({sink, "(", tainted_variant ? "emit" : "escape", "(", x, ")", ")", ";"});
    }

    void final_emit() {
        if (want_pass_) {
            const std::string match = var_with_value(config_.target);
            if (!match.empty() && rng_.uniform() < 0.5) {
                emit_tokens({"emit", "(", match, ")", ";"});
            } else {
                emit_tokens({"emit", "(", std::to_string(config_.target), ")", ";"});
            }
        } else {
            const std::string off = var_without_value(config_.target);
            if (!off.empty() && rng_.uniform() < 0.4) {
                emit_tokens({"emit", "(", off, ")", ";"});
            } else {
                int d = digit();
                if (d == config_.target) d = (d + 1) % 10;
                emit_tokens({"emit", "(", std::to_string(d), ")", ";"});
            }
        }
    }

    void set_pass_intent(bool want_pass) { want_pass_ = want_pass; }

private:
    void emit_tokens(std::initializer_list<std::string> toks) {
        for (const auto& t : toks) tokens.push_back(t);
    }

    int digit() { return static_cast<int>(rng_.below(10)); }

    // statement i always binds the same identifier: a sharp positional signal
    void define_next(const std::string& u) {
        const std::string v = kIdents[static_cast<std::size_t>(defined_count_ % 4)];
        ++defined_count_;
        emit_tokens({"let", v, "=", u, ";"});
        set_from_unit(v, u);
    }

    std::string unit() {
        if (!env_.empty() && rng_.uniform() < 0.35) return any_var();
        return std::to_string(digit());
    }

    void set_from_unit(const std::string& v, const std::string& u) {
        if (std::isdigit(static_cast<unsigned char>(u[0]))) {
            env_[v] = u[0] - '0';
        } else {
            env_[v] = env_.count(u) ? env_[u] : 0;
        }
    }

    std::string any_var() {
        auto it = env_.begin();
        std::advance(it, static_cast<long>(rng_.below(env_.size())));
        return it->first;
    }

    std::string var_with_value(long long v) {
        for (const auto& [name, val] : env_)
            if (val == v) return name;
        return "";
    }
    std::string var_without_value(long long v) {
        for (const auto& [name, val] : env_)
            if (val != v) return name;
        return "";
    }

    const GenConfig& config_;
    SplitRng& rng_;
    std::map<std::string, long long> env_;
    int defined_count_ = 0;
    bool want_pass_ = false;
};

std::vector<std::string> rigid_program(const GenConfig& config, bool want_pass, bool want_security,
                                       bool vulnerable, SplitRng& rng) {
    const int block = want_security ? 20 : 0;
    const int body = config.length - block;
    if (body < 5 || body % 5 != 0)
        throw InvalidArgument("gen_corpus: rigid layout needs length = 5*k" +
                              std::string(want_security ? " + 20" : ""));
    const int slots = body / 5;
    const bool has_final_emit = config.kind != GenKind::Security;

    RigidBuilder builder(config, rng);
    builder.set_pass_intent(want_pass);
    for (int i = 0; i < slots; ++i)
        builder.slot(i == 0, has_final_emit && i == slots - 1);
    if (want_security) {
        const std::string sink = rng.uniform() < 0.5 ? "exec" : "query";
        builder.security_block(vulnerable, sink);
    }
    return builder.tokens;
}

}  // namespace

Corpus gen_corpus(const GenConfig& config, const Vocabulary& vocab, const FunctionRegistry& registry,
                  SplitRng& rng) {
    if (config.length < 12) throw InvalidArgument("gen_corpus: length must be >= 12");
    if (config.target < 0 || config.target > 9) throw InvalidArgument("gen_corpus: target must be a digit");
    if (config.count < 0) throw InvalidArgument("gen_corpus: negative count");

    Corpus corpus;
    corpus.programs.reserve(static_cast<std::size_t>(config.count));
    const mdfi::MdfiConfig detector_config;

    for (int i = 0; i < config.count; ++i) {
        const bool want_pass = rng.uniform() < config.correct_rate;
        const bool want_security =
            config.kind != GenKind::Functional && rng.uniform() < config.security_rate;
        const bool vulnerable = rng.uniform() < config.vuln_rate;

        std::vector<std::string> words;
        if (config.rigid) {
            words = rigid_program(config, want_pass, want_security, vulnerable, rng);
        } else {
            auto layout = plan_layout(config, config.kind, want_pass, want_security, vulnerable, rng);
            if (!layout) throw InvalidArgument("gen_corpus: no feasible layout for length " +
                                               std::to_string(config.length));
            ProgramBuilder builder(config, rng);
            if (layout->header) builder.header();
            for (std::size_t s = 0; s <= layout->filler_sizes.size(); ++s) {
                if (layout->security && s == layout->security_slot)
                    builder.security_block(layout->vulnerable, layout->compact_safe);
                if (s < layout->filler_sizes.size()) builder.filler(layout->filler_sizes[s]);
            }
            builder.ending(layout->ending);
            words = std::move(builder.tokens);
        }

        CorpusEntry entry;
        entry.tokens.reserve(words.size());
        for (const auto& t : words) entry.tokens.push_back(vocab.id_or_throw(t));
        if (static_cast<int>(entry.tokens.size()) != config.length)
            throw NumericalError("gen_corpus: layout produced wrong length");

        const Program program = parse_strict(entry.tokens, vocab, registry);
        entry.functional = functional_pass(interpret(program, {}), config.target);
        entry.vulnerable = mdfi::has_witnesses(entry.tokens, vocab, registry, detector_config);
        entry.family = config.family;
        entry.pattern = !want_security ? "none" : (vulnerable ? "vuln" : "safe");
        corpus.programs.push_back(std::move(entry));
    }
    return corpus;
}

}  // namespace cdc::mini
