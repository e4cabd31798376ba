#include "cdc/mini/interp.hpp"

#include <map>

namespace cdc::mini {

namespace {

struct Halt {
    InterpStatus status;
};

class Evaluator {
public:
    Evaluator(const std::vector<std::int64_t>& inputs, int step_bound)
        : inputs_(inputs), step_bound_(step_bound) {}

    InterpResult run(const Program& program) {
        try {
            exec_block(program.stmts);
        } catch (const Halt& h) {
            result_.status = h.status;
        }
        result_.steps = steps_;
        return result_;
    }

private:
    void tick() {
        if (++steps_ > step_bound_) throw Halt{InterpStatus::StepLimit};
    }

    void exec_block(const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) exec_stmt(s);
    }

    void exec_stmt(const Stmt& s) {
        tick();
        switch (s.kind) {
            case StmtKind::Hole:
                throw Halt{InterpStatus::NotExecutable};
            case StmtKind::Let:
                env_[s.target] = eval(s.expr);
                break;
            case StmtKind::Assign: {
                if (!env_.count(s.target)) throw Halt{InterpStatus::AssignUndefined};
                env_[s.target] = eval(s.expr);
                break;
            }
            case StmtKind::Call:
                eval(s.expr);
                break;
            case StmtKind::Guard:
                lookup(s.target);
                break;
            case StmtKind::If:
                if (lookup(s.target) != 0) exec_block(s.body);
                break;
        }
    }

    std::int64_t lookup(const std::string& name) {
        auto it = env_.find(name);
        if (it == env_.end()) throw Halt{InterpStatus::UndefinedVariable};
        return it->second;
    }

    std::int64_t eval(const Expr& e) {
        tick();
        switch (e.kind) {
            case ExprKind::Hole:
                throw Halt{InterpStatus::NotExecutable};
            case ExprKind::Literal:
                return e.value;
            case ExprKind::Ident:
                return lookup(e.name);
            case ExprKind::BinOp: {
                const std::int64_t l = eval(e.args[0]);
                const std::int64_t r = eval(e.args[1]);
                // wraparound via unsigned arithmetic keeps overflow defined
                const std::uint64_t ul = static_cast<std::uint64_t>(l);
                const std::uint64_t ur = static_cast<std::uint64_t>(r);
                switch (e.op) {
                    case '+': return static_cast<std::int64_t>(ul + ur);
                    case '-': return static_cast<std::int64_t>(ul - ur);
                    default: return static_cast<std::int64_t>(ul * ur);
                }
            }
            case ExprKind::Call:
                return eval_call(e);
        }
        throw Halt{InterpStatus::NotExecutable};
    }

    std::int64_t eval_call(const Expr& e) {
        if (e.callee_is_hole) throw Halt{InterpStatus::NotExecutable};
        std::vector<std::int64_t> args;
        args.reserve(e.args.size());
        for (const auto& a : e.args) args.push_back(eval(a));
        const std::int64_t first = args.empty() ? 0 : args[0];
        if (e.name == "input") return next_input_ < inputs_.size() ? inputs_[next_input_++] : 0;
        if (e.name == "escape") return first;
        if (e.name == "emit") {
            result_.outputs.push_back(first);
            return first;
        }
        // remaining registry functions are sinks: record the observation
        result_.sink_calls.push_back({e.name, first});
        return 0;
    }

    std::map<std::string, std::int64_t> env_;
    const std::vector<std::int64_t>& inputs_;
    std::size_t next_input_ = 0;
    int step_bound_;
    int steps_ = 0;
    InterpResult result_;
};

}  // namespace

InterpResult interpret(const Program& program, const std::vector<std::int64_t>& inputs,
                       int step_bound) {
    if (has_holes(program)) {
        InterpResult r;
        r.status = InterpStatus::NotExecutable;
        return r;
    }
    return Evaluator(inputs, step_bound).run(program);
}

}  // namespace cdc::mini
