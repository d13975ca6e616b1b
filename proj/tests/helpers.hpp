#pragma once

#include <random>
#include <vector>

#include "wrc/cmd.hpp"
#include "wrc/expr.hpp"
#include "wrc/policy.hpp"

namespace wrctest {

using namespace wrc;

// Policy and discipline of the dual-personality input worker.
inline ClassificationPolicy worker_policy() {
    ClassificationPolicy p;
    p.declare_value_dep("source", "domain", {Value{0}});
    p.declare_static("domain", Level::Low);
    p.declare_static("workspace", Level::Low);
    p.declare_static("low_sink", Level::Low);
    p.declare_static("high_sink", Level::High);
    p.declare_static("suspended", Level::Low);
    p.declare_locks({"source_lock", "workspace_lock"});
    return p;
}

inline LockInterp worker_interp() {
    LockInterp li;
    li["source_lock"] = LockSets{{"source", "domain"}, {}};
    li["workspace_lock"] = LockSets{{}, {"workspace"}};
    return li;
}

// A small flat policy for generated programs: a,b,c guarded by one lock,
// d and e ungoverned sinks.
inline ClassificationPolicy gen_policy() {
    ClassificationPolicy p;
    for (const char* v : {"a", "b", "c", "d", "e"}) p.declare_static(v, Level::Low);
    p.declare_locks({"m"});
    return p;
}

inline LockInterp gen_interp() {
    LockInterp li;
    li["m"] = LockSets{{"a", "b", "c"}, {}};
    return li;
}

// Independent expression oracle: a deliberately separate reimplementation of
// evaluation used to pin expected values.
inline Value oracle_eval(const Expr& e, const Mem& mem) {
    if (auto* c = std::get_if<ConstExpr>(&e.node)) return c->val;
    if (auto* v = std::get_if<VarExpr>(&e.node)) return mem.get(prog_var(v->name));
    const auto& b = std::get<BinExpr>(e.node);
    int64_t l = oracle_eval(*b.lhs, mem).v;
    int64_t r = oracle_eval(*b.rhs, mem).v;
    auto wrap = [](unsigned long long x) { return static_cast<int64_t>(x); };
    switch (b.op) {
    case BinOp::Add: return Value{wrap((unsigned long long)l + (unsigned long long)r)};
    case BinOp::Sub: return Value{wrap((unsigned long long)l - (unsigned long long)r)};
    case BinOp::Mul: return Value{wrap((unsigned long long)l * (unsigned long long)r)};
    case BinOp::Eq:  return Value{l == r ? 1 : 0};
    case BinOp::Ne:  return Value{l != r ? 1 : 0};
    case BinOp::Lt:  return Value{l < r ? 1 : 0};
    case BinOp::Le:  return Value{l <= r ? 1 : 0};
    case BinOp::And: return Value{(l != 0 && r != 0) ? 1 : 0};
    case BinOp::Or:  return Value{(l != 0 || r != 0) ? 1 : 0};
    }
    return Value{0};
}

inline BinOp random_op(std::mt19937_64& rng) {
    static const BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Eq, BinOp::Ne,
                                BinOp::Lt,  BinOp::Le,  BinOp::And, BinOp::Or};
    return ops[std::uniform_int_distribution<size_t>(0, 8)(rng)];
}

inline ExprPtr random_expr(std::mt19937_64& rng, const std::vector<std::string>& vars,
                           int max_depth) {
    std::uniform_int_distribution<int> kind(0, max_depth <= 1 ? 1 : 2);
    switch (kind(rng)) {
    case 0:
        return e_const(Value{std::uniform_int_distribution<int>(0, 3)(rng)});
    case 1:
        return e_var(vars[std::uniform_int_distribution<size_t>(0, vars.size() - 1)(rng)]);
    default:
        return e_bin(random_op(rng), random_expr(rng, vars, max_depth - 1),
                     random_expr(rng, vars, max_depth - 1));
    }
}

// Appends while keeping the sequence right-nested, the shape the parser
// produces.
inline CmdPtr seq_append(const CmdPtr& c, const CmdPtr& tail) {
    if (auto* s = std::get_if<SeqCmd>(&c->node)) return c_seq(s->first, seq_append(s->second, tail));
    return c_seq(c, tail);
}

// Random command over the gen_policy variables. Reads touch only the locked
// group {a,b,c}; writes may also hit the ungoverned d/e. Lock operations are
// kept balanced and loops terminating, so results compile and run to
// completion when wrapped between acquire(m)/release(m).
inline CmdPtr random_cmd_body(std::mt19937_64& rng, int depth) {
    static const std::vector<std::string> reads = {"a", "b", "c"};
    static const std::vector<std::string> writes = {"a", "b", "c", "d", "e"};
    std::uniform_int_distribution<int> kind(0, depth <= 1 ? 1 : 4);
    switch (kind(rng)) {
    case 0:
        return c_skip();
    case 1: {
        const auto& v = writes[std::uniform_int_distribution<size_t>(0, writes.size() - 1)(rng)];
        return c_assign(v, random_expr(rng, reads, 3));
    }
    case 2:
        return seq_append(random_cmd_body(rng, depth - 1), random_cmd_body(rng, depth - 1));
    case 3:
        return c_if(random_expr(rng, reads, 2), random_cmd_body(rng, depth - 1),
                    random_cmd_body(rng, depth - 1));
    default: {
        // Counts c down to zero; the inner statement leaves c alone.
        const auto& v = (std::uniform_int_distribution<int>(0, 1)(rng)) ? "d" : "e";
        CmdPtr body = seq_append(c_assign(v, random_expr(rng, {"a", "b"}, 2)),
                                 c_assign("c", e_bin(BinOp::Sub, e_var("c"), e_const(Value{1}))));
        return c_while(e_bin(BinOp::Lt, e_const(Value{0}), e_var("c")), body);
    }
    }
}

inline CmdPtr random_accepted_cmd(std::mt19937_64& rng, int depth = 3) {
    return seq_append(c_acquire("m"), seq_append(random_cmd_body(rng, depth), c_release("m")));
}

} // namespace wrctest
