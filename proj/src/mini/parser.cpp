#include "cdc/mini/parser.hpp"

#include <cctype>
#include <set>

namespace cdc::mini {

std::string hole_name(int token_pos) { return "__hole_" + std::to_string(token_pos) + "__"; }

bool is_hole_name(const std::string& name) {
    return name.size() > 8 && name.rfind("__hole_", 0) == 0 && name.substr(name.size() - 2) == "__";
}

namespace {

enum class Tok {
    KwLet, KwIf, KwCheck,
    Ident, Digit, Fname,
    Eq, Plus, Minus, Star, Semi, LParen, RParen, LBrace, RBrace, Comma,
    Hole,
};

struct Entry {
    Tok cls;
    std::string text;
    long long value = 0;
    int pos = 0;
};

class Parser {
public:
    Parser(const std::vector<int>& tokens, const Vocabulary& vocab, const FunctionRegistry& registry,
           bool tolerant)
        : tolerant_(tolerant) {
        entries_.reserve(tokens.size());
        for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
            const int id = tokens[i];
            Entry e;
            e.pos = i;
            if (id == vocab.mask_id()) {
                if (!tolerant) throw ParseError(i, "mask token in strict parse");
                e.cls = Tok::Hole;
                e.text = hole_name(i);
                holes_.push_back(i);
            } else {
                e.text = vocab.token(id);
                e.cls = classify(e.text, registry, i);
                if (e.cls == Tok::Digit) e.value = e.text[0] - '0';
            }
            entries_.push_back(std::move(e));
        }
    }

    Program run() {
        Program prog;
        prog.token_count = static_cast<int>(entries_.size());
        parse_block(prog.stmts, /*inside_braces=*/false);
        prog.degraded = recovered_ > 0;
        return prog;
    }

    const std::vector<int>& holes() const { return holes_; }
    int recovered() const { return recovered_; }

private:
    static Tok classify(const std::string& s, const FunctionRegistry& registry, int pos) {
        if (s == "let") return Tok::KwLet;
        if (s == "if") return Tok::KwIf;
        if (s == registry.guard) return Tok::KwCheck;
        if (s == "=") return Tok::Eq;
        if (s == "+") return Tok::Plus;
        if (s == "-") return Tok::Minus;
        if (s == "*") return Tok::Star;
        if (s == ";") return Tok::Semi;
        if (s == "(") return Tok::LParen;
        if (s == ")") return Tok::RParen;
        if (s == "{") return Tok::LBrace;
        if (s == "}") return Tok::RBrace;
        if (s == ",") return Tok::Comma;
        if (s.size() == 1 && std::isdigit(static_cast<unsigned char>(s[0]))) return Tok::Digit;
        if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0]))) return Tok::Ident;
        if (registry.is_function(s)) return Tok::Fname;
        throw ParseError(pos, "token '" + s + "' has no lexical class");
    }

    bool eof() const { return cursor_ >= entries_.size(); }
    const Entry& peek(int ahead = 0) const {
        static const Entry sentinel{Tok::Semi, "<eof>", 0, -1};
        const std::size_t i = cursor_ + static_cast<std::size_t>(ahead);
        return i < entries_.size() ? entries_[i] : sentinel;
    }
    const Entry& advance() { return entries_[cursor_++]; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(eof() ? static_cast<int>(entries_.size()) : peek().pos, what);
    }

    const Entry& expect(Tok cls, const char* what) {
        if (eof() || peek().cls != cls) fail(std::string("expected ") + what);
        return advance();
    }

    void parse_block(std::vector<Stmt>& out, bool inside_braces) {
        while (!eof() && !(inside_braces && peek().cls == Tok::RBrace)) {
            const std::size_t start_cursor = cursor_;
            try {
                out.push_back(parse_stmt());
            } catch (const ParseError&) {
                if (!tolerant_) throw;
                cursor_ = start_cursor;
                out.push_back(recover_stmt(inside_braces));
                ++recovered_;
            }
        }
    }

    // Skips to just past the next ';' at brace depth zero (or before the
    // enclosing '}', or end of input) and wraps the skipped tokens.
    Stmt recover_stmt(bool inside_braces) {
        const int start = peek().pos;
        int depth = 0;
        while (!eof()) {
            const Entry& e = peek();
            if (depth == 0 && inside_braces && e.cls == Tok::RBrace) break;
            if (e.cls == Tok::LBrace) ++depth;
            if (e.cls == Tok::RBrace && depth > 0) --depth;
            advance();
            if (e.cls == Tok::Semi && depth == 0) break;
        }
        const int end = eof() ? static_cast<int>(entries_.size()) : peek().pos;
        Stmt s;
        s.kind = StmtKind::Hole;
        s.span = {start, end};
        return s;
    }

    Stmt parse_stmt() {
        if (eof()) fail("expected statement");
        const Entry& head = peek();
        switch (head.cls) {
            case Tok::KwLet: return parse_let();
            case Tok::KwCheck: return parse_guard();
            case Tok::KwIf: return parse_if();
            case Tok::Ident: return parse_assign();
            case Tok::Fname: return parse_call_stmt();
            case Tok::Hole:
                // a hole leading a statement resolves by lookahead
                if (peek(1).cls == Tok::Eq) return parse_assign();
                if (peek(1).cls == Tok::LParen) return parse_call_stmt();
                fail("hole cannot start a statement here");
            default:
                fail("unexpected token '" + head.text + "' at statement start");
        }
    }

    Stmt parse_let() {
        const int start = peek().pos;
        expect(Tok::KwLet, "'let'");
        Stmt s;
        s.kind = StmtKind::Let;
        bind_target(s);
        expect(Tok::Eq, "'='");
        s.expr = parse_expr();
        const Entry& semi = expect(Tok::Semi, "';'");
        s.span = {start, semi.pos + 1};
        return s;
    }

    Stmt parse_assign() {
        const int start = peek().pos;
        Stmt s;
        s.kind = StmtKind::Assign;
        bind_target(s);
        expect(Tok::Eq, "'='");
        s.expr = parse_expr();
        const Entry& semi = expect(Tok::Semi, "';'");
        s.span = {start, semi.pos + 1};
        return s;
    }

    Stmt parse_guard() {
        const int start = peek().pos;
        expect(Tok::KwCheck, "guard keyword");
        expect(Tok::LParen, "'('");
        Stmt s;
        s.kind = StmtKind::Guard;
        bind_target(s);
        expect(Tok::RParen, "')'");
        const Entry& semi = expect(Tok::Semi, "';'");
        s.span = {start, semi.pos + 1};
        return s;
    }

    Stmt parse_if() {
        const int start = peek().pos;
        expect(Tok::KwIf, "'if'");
        Stmt s;
        s.kind = StmtKind::If;
        bind_target(s);  // condition identifier
        expect(Tok::LBrace, "'{'");
        parse_block(s.body, /*inside_braces=*/true);
        const Entry& close = expect(Tok::RBrace, "'}'");
        s.span = {start, close.pos + 1};
        return s;
    }

    Stmt parse_call_stmt() {
        const int start = peek().pos;
        Stmt s;
        s.kind = StmtKind::Call;
        s.expr = parse_unit();
        if (s.expr.kind != ExprKind::Call) fail("expected a call statement");
        const Entry& semi = expect(Tok::Semi, "';'");
        s.span = {start, semi.pos + 1};
        return s;
    }

    void bind_target(Stmt& s) {
        if (eof() || (peek().cls != Tok::Ident && peek().cls != Tok::Hole)) fail("expected identifier");
        const Entry& e = advance();
        s.target = e.text;
        s.target_is_hole = e.cls == Tok::Hole;
    }

    Expr parse_expr() {
        Expr lhs = parse_unit();
        while (!eof() && (peek().cls == Tok::Plus || peek().cls == Tok::Minus || peek().cls == Tok::Star)) {
            const Entry& op = advance();
            Expr rhs = parse_unit();
            Expr node;
            node.kind = ExprKind::BinOp;
            node.op = op.text[0];
            node.span = {lhs.span.lo, rhs.span.hi};
            node.args = {std::move(lhs), std::move(rhs)};
            lhs = std::move(node);
        }
        return lhs;
    }

    Expr parse_unit() {
        if (eof()) fail("expected expression");
        const Entry& e = advance();
        Expr node;
        node.span = {e.pos, e.pos + 1};
        switch (e.cls) {
            case Tok::Digit:
                node.kind = ExprKind::Literal;
                node.value = e.value;
                return node;
            case Tok::Ident:
                node.kind = ExprKind::Ident;
                node.name = e.text;
                return node;
            case Tok::Fname:
                node.name = e.text;
                return finish_call(node);
            case Tok::Hole:
                if (!eof() && peek().cls == Tok::LParen) {
                    node.name = e.text;
                    node.callee_is_hole = true;
                    return finish_call(node);
                }
                node.kind = ExprKind::Hole;
                node.name = e.text;
                return node;
            default:
                fail("unexpected token '" + e.text + "' in expression");
        }
    }

    Expr finish_call(Expr node) {
        node.kind = ExprKind::Call;
        expect(Tok::LParen, "'('");
        if (!eof() && peek().cls != Tok::RParen) {
            node.args.push_back(parse_expr());
            while (!eof() && peek().cls == Tok::Comma) {
                advance();
                node.args.push_back(parse_expr());
            }
        }
        const Entry& close = expect(Tok::RParen, "')'");
        node.span.hi = close.pos + 1;
        return node;
    }

    std::vector<Entry> entries_;
    std::size_t cursor_ = 0;
    bool tolerant_;
    std::vector<int> holes_;
    int recovered_ = 0;
};

void collect_uses(const Expr& e, std::vector<std::pair<std::string, int>>& uses) {
    if (e.kind == ExprKind::Ident && !is_hole_name(e.name)) uses.emplace_back(e.name, e.span.lo);
    for (const auto& a : e.args) collect_uses(a, uses);
}

void check_defs(const std::vector<Stmt>& stmts, std::set<std::string>& defined) {
    for (const auto& s : stmts) {
        std::vector<std::pair<std::string, int>> uses;
        switch (s.kind) {
            case StmtKind::Let:
                collect_uses(s.expr, uses);
                break;
            case StmtKind::Assign:
                uses.emplace_back(s.target, s.span.lo);
                collect_uses(s.expr, uses);
                break;
            case StmtKind::Call:
                collect_uses(s.expr, uses);
                break;
            case StmtKind::Guard:
            case StmtKind::If:
                uses.emplace_back(s.target, s.span.lo);
                break;
            case StmtKind::Hole:
                break;
        }
        for (const auto& [name, pos] : uses)
            if (!defined.count(name)) throw ParseError(pos, "identifier '" + name + "' used before definition");
        if (s.kind == StmtKind::Let) defined.insert(s.target);
        if (s.kind == StmtKind::If) check_defs(s.body, defined);
    }
}

}  // namespace

Program parse_strict(const std::vector<int>& tokens, const Vocabulary& vocab,
                     const FunctionRegistry& registry) {
    Parser parser(tokens, vocab, registry, /*tolerant=*/false);
    Program prog = parser.run();
    std::set<std::string> defined;
    check_defs(prog.stmts, defined);
    return prog;
}

TolerantResult parse_tolerant(const std::vector<int>& tokens, const Vocabulary& vocab,
                              const FunctionRegistry& registry) {
    Parser parser(tokens, vocab, registry, /*tolerant=*/true);
    TolerantResult result;
    result.program = parser.run();
    result.hole_positions = parser.holes();
    result.recovered_statements = parser.recovered();
    return result;
}

bool has_holes(const Expr& e) {
    if (e.kind == ExprKind::Hole || e.callee_is_hole) return true;
    if (e.kind == ExprKind::Ident && is_hole_name(e.name)) return true;
    for (const auto& a : e.args)
        if (has_holes(a)) return true;
    return false;
}

bool has_holes(const Stmt& s) {
    if (s.kind == StmtKind::Hole || s.target_is_hole) return true;
    if ((s.kind == StmtKind::Let || s.kind == StmtKind::Assign || s.kind == StmtKind::Call) &&
        has_holes(s.expr))
        return true;
    for (const auto& b : s.body)
        if (has_holes(b)) return true;
    return false;
}

bool has_holes(const Program& p) {
    for (const auto& s : p.stmts)
        if (has_holes(s)) return true;
    return false;
}

}  // namespace cdc::mini
