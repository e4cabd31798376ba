#include "cdc/mdfi.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cdc/errors.hpp"
#include "cdc/mini/lexer.hpp"
#include "cdc/mini/parser.hpp"

namespace cdc::mdfi {

using mini::Node;
using mini::NodeKind;
using mini::ProgramGraph;
using mini::SecurityClass;

nlohmann::json Witness::to_json() const {
    return {{"node", node},
            {"kind", kind == Kind::Sub ? "sub" : "ins"},
            {"hint", hint},
            {"confidence", confidence}};
}

nlohmann::json MdfiConfig::to_json() const {
    return {{"checkpoints", checkpoints}, {"rho_min", rho_min}, {"b_int", b_int},
            {"k_insert", k_insert},       {"b_tok", b_tok},     {"b_p", b_p},
            {"depth", depth}};
}

MdfiConfig MdfiConfig::from_json(const nlohmann::json& j) {
    MdfiConfig c;
    if (j.contains("checkpoints")) c.checkpoints = j["checkpoints"].get<std::vector<int>>();
    c.rho_min = j.value("rho_min", c.rho_min);
    c.b_int = j.value("b_int", c.b_int);
    c.k_insert = j.value("k_insert", c.k_insert);
    c.b_tok = j.value("b_tok", c.b_tok);
    c.b_p = j.value("b_p", c.b_p);
    c.depth = j.value("depth", c.depth);
    if (c.rho_min < 0.0 || c.rho_min >= 1.0) throw InvalidArgument("mdfi: rho_min must be in [0,1)");
    if (c.b_int < 0 || c.k_insert < 0 || c.b_p < 0) throw InvalidArgument("mdfi: negative budget");
    return c;
}

std::vector<int> default_checkpoints(int T) {
    const int a = (T + 1) / 2;
    const int b = (T + 3) / 4;
    if (a == b) return {a};
    return {a, b};
}

bool checkpoint_gate(int t, const TokenState& state, const MdfiConfig& config, int fired_count,
                     int mask_id) {
    if (fired_count >= config.b_int) return false;
    if (std::find(config.checkpoints.begin(), config.checkpoints.end(), t) == config.checkpoints.end())
        return false;
    return state.committed_fraction(mask_id) >= config.rho_min;
}

namespace {

// Walks the enclosing-call chain of a node, innermost first. The first
// sanitizer kills the flow; the first sink before any sanitizer is a hit.
struct ChainOutcome {
    enum { PassThrough, Killed, HitsSink } what = PassThrough;
    int sink_node = -1;
};

ChainOutcome walk_chain(const ProgramGraph& graph, const std::vector<int>& chain) {
    for (int call_id : chain) {
        const Node& call = graph.node(call_id);
        if (call.sec == SecurityClass::Sanitizer) return {ChainOutcome::Killed, -1};
        if (call.sec == SecurityClass::Sink) return {ChainOutcome::HitsSink, call_id};
    }
    return {ChainOutcome::PassThrough, -1};
}

int def_node_of_statement(const ProgramGraph& graph, int stmt_id) {
    for (int child : graph.ast_children[static_cast<std::size_t>(stmt_id)]) {
        const Node& n = graph.node(child);
        if (n.is_def) return child;
    }
    return -1;
}

bool path_has_hole(const ProgramGraph& graph, const std::vector<int>& stmt_ids) {
    for (int sid : stmt_ids)
        if (graph.statement_has_hole(sid)) return true;
    return false;
}

std::vector<int> tokenize_pattern(const std::vector<std::string>& words, const Vocabulary& vocab) {
    std::vector<int> out;
    for (const auto& w : words) {
        auto id = vocab.id_of(w);
        if (id) out.push_back(*id);
    }
    return out;
}

nlohmann::json make_hint(const std::string& rule, const std::string& ident,
                         const std::vector<int>& message) {
    return {{"rule", rule}, {"ident", ident}, {"message", message}};
}

// First committed identifier used inside a statement's span, or fallback.
std::string first_ident_in_statement(const ProgramGraph& graph, int stmt_id) {
    const auto span = graph.node(stmt_id).span;
    std::string best;
    int best_pos = span.hi;
    for (const auto& n : graph.nodes) {
        if (n.kind != NodeKind::Identifier || n.is_hole || n.is_def) continue;
        if (n.span.lo >= span.lo && n.span.hi <= span.hi && n.span.lo < best_pos) {
            best = n.name;
            best_pos = n.span.lo;
        }
    }
    return best.empty() ? "a" : best;
}

}  // namespace

std::vector<Witness> detect_dataflow(const ProgramGraph& graph, const MdfiConfig& config,
                                     const mini::FunctionRegistry& /*registry*/,
                                     const Vocabulary& vocab) {
    struct TaintedDef {
        int def_node;
        int depth;
        std::vector<int> path_stmts;
    };

    std::vector<TaintedDef> frontier;
    std::set<int> visited_defs;

    // Seed: definitions whose right-hand side contains an unkilled source call.
    for (const auto& n : graph.nodes) {
        if (n.kind != NodeKind::Call || n.sec != SecurityClass::Source) continue;
        const int stmt = n.stmt_node;
        if (stmt < 0) continue;
        const auto outcome = walk_chain(graph, n.call_chain);
        if (outcome.what == ChainOutcome::Killed) continue;
        if (outcome.what == ChainOutcome::HitsSink) {
            // handled below as a zero-hop witness
            continue;
        }
        const int def = def_node_of_statement(graph, stmt);
        if (def >= 0 && visited_defs.insert(def).second)
            frontier.push_back({def, 0, {stmt}});
    }

    std::map<int, Witness> by_sink;  // sink call node -> witness, first hit wins

    auto add_witness = [&](int sink_node, const std::vector<int>& path_stmts,
                           const std::string& tainted_ident) {
        if (by_sink.count(sink_node)) return;
        Witness w;
        w.node = sink_node;
        w.kind = Witness::Kind::Sub;
        w.confidence = path_has_hole(graph, path_stmts) ? 0.5 : 1.0;
        const std::string id = tainted_ident.empty() ? "a" : tainted_ident;
        w.hint = make_hint("taint-path", id,
                           tokenize_pattern({"let", id, "=", "escape", "(", id, ")", ";"}, vocab));
        by_sink.emplace(sink_node, std::move(w));
    };

    // Zero-hop: a source call nested directly inside a sink call.
    for (const auto& n : graph.nodes) {
        if (n.kind != NodeKind::Call || n.sec != SecurityClass::Source) continue;
        const auto outcome = walk_chain(graph, n.call_chain);
        if (outcome.what == ChainOutcome::HitsSink)
            add_witness(outcome.sink_node, {n.stmt_node}, first_ident_in_statement(graph, n.stmt_node));
    }

    // Bounded breadth-first search over def-to-use edges.
    std::size_t head = 0;
    while (head < frontier.size()) {
        const TaintedDef cur = frontier[head++];
        if (cur.depth >= config.depth) continue;
        for (int use : graph.uses_of_def(cur.def_node)) {
            const Node& u = graph.node(use);
            const auto outcome = walk_chain(graph, u.call_chain);
            if (outcome.what == ChainOutcome::Killed) continue;
            std::vector<int> path = cur.path_stmts;
            if (u.stmt_node >= 0) path.push_back(u.stmt_node);
            if (outcome.what == ChainOutcome::HitsSink) {
                add_witness(outcome.sink_node, path, u.name);
                continue;
            }
            // taint propagates into the defining statement, if any
            const int stmt = u.stmt_node;
            if (stmt < 0) continue;
            const auto kind = graph.node(stmt).stmt_kind;
            if (kind != mini::StmtKind::Let && kind != mini::StmtKind::Assign) continue;
            const int def = def_node_of_statement(graph, stmt);
            if (def >= 0 && visited_defs.insert(def).second)
                frontier.push_back({def, cur.depth + 1, std::move(path)});
        }
    }

    std::vector<Witness> out;
    out.reserve(by_sink.size());
    for (auto& [sink, w] : by_sink) out.push_back(std::move(w));
    return out;
}

std::vector<Witness> detect_structural(const ProgramGraph& graph,
                                       const mini::FunctionRegistry& /*registry*/,
                                       const Vocabulary& vocab) {
    std::vector<Witness> out;
    for (const auto& n : graph.nodes) {
        if (n.kind != NodeKind::Call || n.sec != SecurityClass::Sink) continue;

        // hole argument: the construct exists but in unknowable form
        int hole_arg = -1;
        bool any_ident = false;
        std::string first_ident;
        int first_ident_pos = n.span.hi;
        for (const auto& m : graph.nodes) {
            if (m.span.lo < n.span.lo || m.span.hi > n.span.hi || m.id == n.id) continue;
            if (m.is_hole && hole_arg < 0) hole_arg = m.id;
            if (m.kind == NodeKind::Identifier && !m.is_hole && !m.is_def) {
                any_ident = true;
                if (m.span.lo < first_ident_pos) {
                    first_ident_pos = m.span.lo;
                    first_ident = m.name;
                }
            }
        }

        if (hole_arg >= 0) {
            Witness w;
            w.node = hole_arg;
            w.kind = Witness::Kind::Sub;
            w.confidence = 0.5;
            const std::string id = any_ident ? first_ident : "a";
            w.hint = make_hint("sink-arg-hole", id,
                               tokenize_pattern({"let", id, "=", "escape", "(", id, ")", ";"}, vocab));
            out.push_back(std::move(w));
            continue;
        }
        if (!any_ident) continue;  // literal-only arguments carry nothing tainted

        // required guard: a 'check ( id ) ;' statement earlier in the same block
        const Node& sink_stmt = graph.node(n.stmt_node);
        bool guarded = false;
        for (int sid : graph.statements) {
            const Node& s = graph.node(sid);
            if (s.stmt_kind != mini::StmtKind::Guard) continue;
            if (s.block != sink_stmt.block || s.span.lo >= sink_stmt.span.lo) continue;
            // guard target is the identifier child
            for (int child : graph.ast_children[static_cast<std::size_t>(sid)]) {
                const Node& g = graph.node(child);
                if (g.kind == NodeKind::Identifier && g.name == first_ident) guarded = true;
            }
        }
        if (!guarded) {
            Witness w;
            w.node = n.id;
            w.kind = Witness::Kind::Ins;
            w.confidence = 0.8;
            w.hint = make_hint("missing-guard", first_ident,
                               tokenize_pattern({"check", "(", first_ident, ")", ";"}, vocab));
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::vector<Witness> detect_all(const ProgramGraph& graph, const MdfiConfig& config,
                                const mini::FunctionRegistry& registry, const Vocabulary& vocab) {
    std::vector<Witness> out = detect_dataflow(graph, config, registry, vocab);
    std::vector<Witness> structural = detect_structural(graph, registry, vocab);
    out.insert(out.end(), std::make_move_iterator(structural.begin()),
               std::make_move_iterator(structural.end()));
    return out;
}

bool has_witnesses(const std::vector<int>& tokens, const Vocabulary& vocab,
                   const mini::FunctionRegistry& registry, const MdfiConfig& config) {
    auto parsed = mini::parse_tolerant(tokens, vocab, registry);
    auto graph = mini::annotate_security(mini::build_graph(parsed.program), registry);
    return !detect_all(graph, config, registry, vocab).empty();
}

Localization localize(const std::vector<Witness>& witnesses, const ProgramGraph& graph, int b_tok) {
    Localization loc;
    if (b_tok <= 0 || witnesses.empty()) return loc;

    std::vector<const Witness*> order;
    for (const auto& w : witnesses) order.push_back(&w);
    std::sort(order.begin(), order.end(), [&](const Witness* a, const Witness* b) {
        if (a->confidence != b->confidence) return a->confidence > b->confidence;
        const int sa = graph.node(a->node).stmt_node;
        const int sb = graph.node(b->node).stmt_node;
        return graph.node(sa).span.lo < graph.node(sb).span.lo;
    });

    std::set<int> region;
    auto span_new_positions = [&](mini::Span span) {
        int fresh = 0;
        for (int p = span.lo; p < span.hi; ++p)
            if (!region.count(p)) ++fresh;
        return fresh;
    };
    auto add_span = [&](mini::Span span, std::set<int>& bucket) {
        for (int p = span.lo; p < span.hi; ++p) {
            region.insert(p);
            bucket.insert(p);
        }
    };

    std::set<int> sub, ins;
    for (const Witness* w : order) {
        const int stmt = graph.node(w->node).stmt_node;
        if (stmt < 0) continue;
        const mini::Span primary = graph.node(stmt).span;
        if (static_cast<int>(region.size()) + span_new_positions(primary) > b_tok) continue;  // budget
        std::set<int>& bucket = w->kind == Witness::Kind::Sub ? sub : ins;
        add_span(primary, bucket);
        loc.kept.push_back(*w);
        if (w->kind == Witness::Kind::Ins) loc.ins_anchors.push_back(primary.lo);

        // dataflow-adjacent defining statements, while the budget allows
        for (const auto& n : graph.nodes) {
            if (n.kind != NodeKind::Identifier || n.is_hole || n.is_def) continue;
            if (n.stmt_node != stmt) continue;
            const int def = graph.def_of_use(n.id);
            if (def < 0) continue;
            const int def_stmt = graph.node(def).stmt_node;
            if (def_stmt < 0 || def_stmt == stmt) continue;
            const mini::Span def_span = graph.node(def_stmt).span;
            if (static_cast<int>(region.size()) + span_new_positions(def_span) > b_tok) continue;
            add_span(def_span, bucket);
        }
    }

    loc.region = EditRegion::from_positions(std::vector<int>(region.begin(), region.end()));
    loc.sub_positions.assign(sub.begin(), sub.end());
    loc.ins_positions.assign(ins.begin(), ins.end());
    return loc;
}

InterventionResult apply_interventions(const TokenState& state, const Localization& loc,
                                       const MdfiConfig& config, int mask_id) {
    InterventionResult result;
    result.state = state;

    std::vector<int> anchors;
    for (int a : loc.ins_anchors) {
        if (a < 0 || a >= state.length()) {
            result.notes.push_back("insertion anchor " + std::to_string(a) + " out of range, skipped");
            continue;
        }
        anchors.push_back(a);
    }
    std::sort(anchors.begin(), anchors.end());

    const std::set<int> sub(loc.sub_positions.begin(), loc.sub_positions.end());
    std::vector<int> out;
    out.reserve(state.tokens.size() + anchors.size() * static_cast<std::size_t>(config.k_insert));
    std::size_t next_anchor = 0;
    for (int pos = 0; pos < state.length(); ++pos) {
        while (next_anchor < anchors.size() && anchors[next_anchor] == pos) {
            out.insert(out.end(), static_cast<std::size_t>(config.k_insert), mask_id);
            result.insertions.emplace_back(pos, config.k_insert);
            ++next_anchor;
        }
        const int tok = state.tokens[static_cast<std::size_t>(pos)];
        if (sub.count(pos)) {
            if (tok != mask_id) result.remasked.push_back(static_cast<int>(out.size()));
            out.push_back(mask_id);
        } else {
            out.push_back(tok);
        }
    }
    result.state.tokens = std::move(out);
    return result;
}

ContextPtr write_buffer(const Context& context, const std::vector<int>& message, int mask_id) {
    auto next = std::make_shared<Context>(context);
    for (int i = 0; i < context.buffer_len; ++i) {
        const std::size_t slot = static_cast<std::size_t>(context.buffer_start + i);
        next->tokens[slot] = i < static_cast<int>(message.size()) ? message[static_cast<std::size_t>(i)]
                                                                  : mask_id;
    }
    return next;
}

std::vector<int> hint_message(const std::vector<Witness>& witnesses, const Vocabulary& /*vocab*/) {
    std::vector<int> message;
    for (const auto& w : witnesses) {
        if (!w.hint.contains("message")) continue;
        const auto part = w.hint["message"].get<std::vector<int>>();
        message.insert(message.end(), part.begin(), part.end());
    }
    return message;
}

MdfiOperator::MdfiOperator(const Denoiser& denoiser, mini::FunctionRegistry registry,
                           MdfiConfig config)
    : denoiser_(denoiser), registry_(std::move(registry)), config_(std::move(config)) {}

CorrectionOutcome MdfiOperator::correct(const CleanProposal& proposal, const TokenState& state,
                                        int t) {
    const auto& vocab = denoiser_.vocab();
    const int mask = vocab.mask_id();

    CorrectionOutcome out;
    out.proposal = proposal;
    out.state = state;
    if (!checkpoint_gate(t, state, config_, fired_count_, mask)) return out;

    const DecodedCandidate candidate = decode_argmax(proposal);
    auto parsed = mini::parse_tolerant(candidate.tokens, vocab, registry_);
    auto graph = mini::annotate_security(mini::build_graph(parsed.program), registry_);
    const auto witnesses = detect_all(graph, config_, registry_, vocab);
    if (witnesses.empty()) return out;

    const Localization loc = localize(witnesses, graph, config_.b_tok);
    if (loc.kept.empty()) return out;

    InterventionResult applied = apply_interventions(state, loc, config_, mask);
    ContextPtr ctx = state.context;
    if (ctx && ctx->buffer_len > 0) {
        ctx = write_buffer(*ctx, hint_message(loc.kept, vocab), mask);
    } else {
        applied.notes.push_back("no feedback buffer allocated, hint dropped");
    }
    applied.state.context = ctx;

    ++fired_count_;
    out.state = std::move(applied.state);
    out.proposal = denoiser_.predict(out.state, t);  // fresh rows for the edited state
    out.region = loc.region;
    out.fired = "mdfi";
    out.remasked = applied.remasked;
    out.insertions = applied.insertions;

    nlohmann::json wit = nlohmann::json::array();
    for (const auto& w : loc.kept) wit.push_back(w.to_json());
    out.report.feedback = {{"witnesses", wit},
                           {"notes", applied.notes},
                           {"sub_positions", loc.sub_positions},
                           {"ins_positions", loc.ins_positions}};
    out.report.scores.assign(1, static_cast<double>(witnesses.size()));
    return out;
}

}  // namespace cdc::mdfi
