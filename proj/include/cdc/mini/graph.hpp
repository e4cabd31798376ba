#pragma once

#include <string>
#include <vector>

#include "cdc/mini/ast.hpp"
#include "cdc/mini/registry.hpp"

namespace cdc::mini {

enum class NodeKind { Program, Statement, Identifier, Literal, Call, BinOp, Hole };

enum class SecurityClass { None, Source, Sink, Sanitizer, Pure };

struct Node {
    int id = -1;
    NodeKind kind = NodeKind::Program;
    Span span;
    StmtKind stmt_kind = StmtKind::Hole;  // meaningful for Statement nodes
    std::string name;                     // identifier name or callee
    bool is_hole = false;                 // placeholder produced from a mask
    bool is_def = false;                  // identifier occurrence that defines
    SecurityClass sec = SecurityClass::None;
    int stmt_node = -1;   // enclosing statement node id
    int parent = -1;      // AST parent
    int block = 0;        // block id for guard scoping (0 = top level)
    // Call nodes enclosing this node within its statement, innermost first.
    std::vector<int> call_chain;
};

/// Partial code property graph: AST parent/child structure, control flow
/// between adjacent statements, and def-to-use dataflow edges. Each use is
/// linked to its most recent textual definition (the language has no loops,
/// so reaching definitions are unambiguous on straight-line code).
struct ProgramGraph {
    std::vector<Node> nodes;
    std::vector<std::vector<int>> ast_children;
    std::vector<std::pair<int, int>> cfg_edges;  // statement -> statement
    std::vector<std::pair<int, int>> dfg_edges;  // def identifier -> use identifier
    int root = -1;
    std::vector<int> statements;  // statement node ids, textual order
    int token_count = 0;

    const Node& node(int id) const { return nodes[static_cast<std::size_t>(id)]; }
    Node& node(int id) { return nodes[static_cast<std::size_t>(id)]; }

    /// Statement node whose span covers the token position, or -1.
    int enclosing_statement(int token_pos) const;

    std::vector<int> uses_of_def(int def_node) const;
    int def_of_use(int use_node) const;  // -1 when the use has no reaching def

    /// True when any node inside the statement is a hole placeholder.
    bool statement_has_hole(int stmt_node) const;
};

ProgramGraph build_graph(const Program& program);

/// Marks every call node whose callee is a registry function with its
/// security class. Unknown and hole callees stay unmarked.
ProgramGraph annotate_security(ProgramGraph graph, const FunctionRegistry& registry);

}  // namespace cdc::mini
