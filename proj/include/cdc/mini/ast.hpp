#pragma once

#include <memory>
#include <string>
#include <vector>

namespace cdc::mini {

/// Token index range [lo, hi).
struct Span {
    int lo = 0;
    int hi = 0;

    int size() const { return hi - lo; }
    bool contains(int pos) const { return pos >= lo && pos < hi; }
};

enum class ExprKind { Ident, Literal, Call, BinOp, Hole };

struct Expr {
    ExprKind kind = ExprKind::Hole;
    Span span;
    std::string name;        // identifier or callee; hole placeholder name for holes
    long long value = 0;     // literal payload
    char op = 0;             // '+', '-', '*'
    std::vector<Expr> args;  // call arguments, or {lhs, rhs} for BinOp
    bool callee_is_hole = false;
};

enum class StmtKind { Let, Assign, Call, Guard, If, Hole };

struct Stmt {
    StmtKind kind = StmtKind::Hole;
    Span span;
    std::string target;  // let/assign target, guard identifier, if condition
    bool target_is_hole = false;
    Expr expr;                // rhs for let/assign, call expr for call statements
    std::vector<Stmt> body;   // if-block body
};

struct Program {
    std::vector<Stmt> stmts;
    int token_count = 0;
    bool degraded = false;  // tolerant parsing had to give up on some statement
};

bool has_holes(const Expr& e);
bool has_holes(const Stmt& s);
bool has_holes(const Program& p);

}  // namespace cdc::mini
