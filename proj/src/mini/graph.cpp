#include "cdc/mini/graph.hpp"

#include <map>

#include "cdc/mini/parser.hpp"

namespace cdc::mini {

namespace {

class Builder {
public:
    explicit Builder(const Program& program) { build(program); }

    ProgramGraph take() { return std::move(g_); }

private:
    int add_node(NodeKind kind, Span span, int parent) {
        const int id = static_cast<int>(g_.nodes.size());
        Node n;
        n.id = id;
        n.kind = kind;
        n.span = span;
        n.parent = parent;
        n.stmt_node = cur_stmt_;
        n.block = cur_block_;
        n.call_chain = call_chain_;
        g_.nodes.push_back(std::move(n));
        g_.ast_children.emplace_back();
        if (parent >= 0) g_.ast_children[static_cast<std::size_t>(parent)].push_back(id);
        return id;
    }

    void build(const Program& program) {
        g_.token_count = program.token_count;
        g_.root = add_node(NodeKind::Program, {0, program.token_count}, -1);
        std::vector<int> stmt_ids = build_block(program.stmts, g_.root);
        // top-level control flow: consecutive statements
        link_cfg(stmt_ids);
    }

    void link_cfg(const std::vector<int>& stmt_ids) {
        for (std::size_t i = 0; i + 1 < stmt_ids.size(); ++i)
            g_.cfg_edges.emplace_back(stmt_ids[i], stmt_ids[i + 1]);
    }

    std::vector<int> build_block(const std::vector<Stmt>& stmts, int parent) {
        std::vector<int> ids;
        for (const auto& s : stmts) ids.push_back(build_stmt(s, parent));
        return ids;
    }

    int build_stmt(const Stmt& s, int parent) {
        const int id = add_node(NodeKind::Statement, s.span, parent);
        g_.node(id).stmt_kind = s.kind;
        g_.statements.push_back(id);
        const int saved_stmt = cur_stmt_;
        cur_stmt_ = id;

        switch (s.kind) {
            case StmtKind::Let: {
                build_expr(s.expr, id);  // uses bind against prior defs
                const int target = add_ident(s.target, s.target_is_hole, {s.span.lo + 1, s.span.lo + 2}, id);
                g_.node(target).is_def = true;
                define(s.target, target);
                break;
            }
            case StmtKind::Assign: {
                build_expr(s.expr, id);
                const int target = add_ident(s.target, s.target_is_hole, {s.span.lo, s.span.lo + 1}, id);
                g_.node(target).is_def = true;
                define(s.target, target);
                break;
            }
            case StmtKind::Call:
                build_expr(s.expr, id);
                break;
            case StmtKind::Guard: {
                const int use = add_ident(s.target, s.target_is_hole, {s.span.lo + 2, s.span.lo + 3}, id);
                link_use(s.target, use);
                break;
            }
            case StmtKind::If: {
                const int cond = add_ident(s.target, s.target_is_hole, {s.span.lo + 1, s.span.lo + 2}, id);
                link_use(s.target, cond);
                const int saved_block = cur_block_;
                cur_block_ = ++block_counter_;
                std::vector<int> body = build_block(s.body, id);
                cur_block_ = saved_block;
                // control flow into and out of the block
                if (!body.empty()) {
                    g_.cfg_edges.emplace_back(id, body.front());
                    link_cfg(body);
                }
                break;
            }
            case StmtKind::Hole: {
                const int h = add_node(NodeKind::Hole, s.span, id);
                g_.node(h).is_hole = true;
                break;
            }
        }
        cur_stmt_ = saved_stmt;
        return id;
    }

    int add_ident(const std::string& name, bool hole, Span span, int parent) {
        const int id = add_node(hole ? NodeKind::Hole : NodeKind::Identifier, span, parent);
        g_.node(id).name = name;
        g_.node(id).is_hole = hole || is_hole_name(name);
        return id;
    }

    void define(const std::string& name, int node_id) {
        if (!is_hole_name(name)) defs_[name] = node_id;
    }

    void link_use(const std::string& name, int use_node) {
        auto it = defs_.find(name);
        if (it != defs_.end()) g_.dfg_edges.emplace_back(it->second, use_node);
    }

    int build_expr(const Expr& e, int parent) {
        switch (e.kind) {
            case ExprKind::Ident: {
                const int id = add_ident(e.name, is_hole_name(e.name), e.span, parent);
                if (!g_.node(id).is_hole) link_use(e.name, id);
                return id;
            }
            case ExprKind::Literal: {
                const int id = add_node(NodeKind::Literal, e.span, parent);
                g_.node(id).name = std::to_string(e.value);
                return id;
            }
            case ExprKind::Hole: {
                const int id = add_node(NodeKind::Hole, e.span, parent);
                g_.node(id).name = e.name;
                g_.node(id).is_hole = true;
                return id;
            }
            case ExprKind::BinOp: {
                const int id = add_node(NodeKind::BinOp, e.span, parent);
                g_.node(id).name = std::string(1, e.op);
                for (const auto& a : e.args) build_expr(a, id);
                return id;
            }
            case ExprKind::Call: {
                const int id = add_node(NodeKind::Call, e.span, parent);
                g_.node(id).name = e.name;
                g_.node(id).is_hole = e.callee_is_hole;
                call_chain_.insert(call_chain_.begin(), id);
                for (const auto& a : e.args) build_expr(a, id);
                call_chain_.erase(call_chain_.begin());
                return id;
            }
        }
        return -1;
    }

    ProgramGraph g_;
    std::map<std::string, int> defs_;  // reaching definition per identifier
    std::vector<int> call_chain_;
    int cur_stmt_ = -1;
    int cur_block_ = 0;
    int block_counter_ = 0;
};

}  // namespace

int ProgramGraph::enclosing_statement(int token_pos) const {
    int best = -1;
    for (int sid : statements) {
        const Node& n = node(sid);
        if (n.span.contains(token_pos)) best = sid;  // innermost wins: later statements nest deeper
    }
    return best;
}

std::vector<int> ProgramGraph::uses_of_def(int def_node) const {
    std::vector<int> out;
    for (const auto& [def, use] : dfg_edges)
        if (def == def_node) out.push_back(use);
    return out;
}

int ProgramGraph::def_of_use(int use_node) const {
    for (const auto& [def, use] : dfg_edges)
        if (use == use_node) return def;
    return -1;
}

bool ProgramGraph::statement_has_hole(int stmt_node) const {
    const Span span = node(stmt_node).span;
    for (const auto& n : nodes)
        if (n.is_hole && n.span.lo >= span.lo && n.span.hi <= span.hi) return true;
    return false;
}

ProgramGraph build_graph(const Program& program) { return Builder(program).take(); }

ProgramGraph annotate_security(ProgramGraph graph, const FunctionRegistry& registry) {
    for (auto& n : graph.nodes) {
        if (n.kind != NodeKind::Call || n.is_hole) continue;
        if (registry.sources.count(n.name)) n.sec = SecurityClass::Source;
        else if (registry.sinks.count(n.name)) n.sec = SecurityClass::Sink;
        else if (registry.sanitizers.count(n.name)) n.sec = SecurityClass::Sanitizer;
        else if (registry.pure.count(n.name)) n.sec = SecurityClass::Pure;
    }
    return graph;
}

}  // namespace cdc::mini
