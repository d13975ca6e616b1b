#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "wrc/cmd.hpp"
#include "wrc/expr.hpp"
#include "wrc/policy.hpp"
#include "wrc/risc.hpp"
#include "wrc/while_step.hpp"

namespace wrc {

// Cache of what each register currently holds, as an expression over shared
// variables. Entries may only mention variables the paired assumption record
// knows to be stable.
using RegRec = std::map<Reg, ExprPtr>;

// Which variables the compiler currently assumes other threads cannot write
// (resp. read or write); mirrors the AsmNoW/AsmNoRW mode sets.
struct AsmRec {
    std::set<std::string> no_w;
    std::set<std::string> no_rw;

    friend bool operator==(const AsmRec&, const AsmRec&) = default;

    bool assumed(const std::string& v) const { return no_w.count(v) || no_rw.count(v); }
};

struct CompRec {
    RegRec regrec;
    AsmRec asmrec;
};

inline CompRec init_comprec() { return CompRec{}; }

inline bool comprec_equal(const CompRec& a, const CompRec& b) {
    if (!(a.asmrec == b.asmrec) || a.regrec.size() != b.regrec.size()) return false;
    auto it = b.regrec.begin();
    for (const auto& [r, e] : a.regrec) {
        if (it->first != r || !expr_equal(e, it->second)) return false;
        ++it;
    }
    return true;
}

// v is stable when it and all of its control variables are covered by a
// write-exclusion assumption.
inline bool var_stable(const AsmRec& s, const ClassificationPolicy& policy, const std::string& v) {
    if (!s.assumed(v)) return false;
    for (const auto& c : policy.cvars(v))
        if (!s.assumed(c)) return false;
    return true;
}

inline bool expr_stable(const AsmRec& s, const ClassificationPolicy& policy, const Expr& e) {
    for (const auto& v : expr_vars(e))
        if (!var_stable(s, policy, v)) return false;
    return true;
}

inline bool regrec_stable(const CompRec& c, const ClassificationPolicy& policy) {
    for (const auto& [r, e] : c.regrec)
        if (!expr_stable(c.asmrec, policy, *e)) return false;
    return true;
}

// Register allocation over a bounded bank. Neither function may hand out a
// register in the in-use set; allocation prefers unmapped registers and
// otherwise evicts the cache entry of the lowest-index candidate.
inline std::optional<Reg> reg_alloc_cached(const RegRec& regrec, const std::set<Reg>& in_use,
                                           const std::string& v, int num_regs) {
    for (Reg r = 0; r < num_regs; ++r) {
        if (in_use.count(r)) continue;
        auto it = regrec.find(r);
        if (it == regrec.end()) continue;
        if (auto* ve = std::get_if<VarExpr>(&it->second->node); ve && ve->name == v) return r;
    }
    return std::nullopt;
}

inline std::optional<Reg> reg_alloc(const RegRec& regrec, const std::set<Reg>& in_use,
                                    int num_regs) {
    for (Reg r = 0; r < num_regs; ++r)
        if (!in_use.count(r) && !regrec.count(r)) return r;
    for (Reg r = 0; r < num_regs; ++r)
        if (!in_use.count(r)) return r;
    return std::nullopt;
}

// One emitted instruction together with the compilation record describing
// the state immediately before it executes.
struct AnnotatedInstr {
    std::optional<Label> label;
    Instr instr;
    CompRec rec;
};

struct ExprCompileResult {
    std::vector<AnnotatedInstr> code;
    Reg result = 0;
    CompRec rec;
    bool failed = false;
};

namespace detail {

inline RegRec regrec_erase_mentions(const RegRec& regrec, const std::string& v) {
    RegRec out;
    for (const auto& [r, e] : regrec)
        if (!mentions_var(*e, v)) out.emplace(r, e);
    return out;
}

inline RegRec regrec_erase_mentions_any(const RegRec& regrec, const std::set<std::string>& vs) {
    RegRec out;
    for (const auto& [r, e] : regrec) {
        bool hit = false;
        for (const auto& v : vs)
            if (mentions_var(*e, v)) { hit = true; break; }
        if (!hit) out.emplace(r, e);
    }
    return out;
}

// Entries on which both records agree.
inline RegRec regrec_meet(const RegRec& a, const RegRec& b) {
    RegRec out;
    for (const auto& [r, e] : a) {
        auto it = b.find(r);
        if (it != b.end() && expr_equal(e, it->second)) out.emplace(r, e);
    }
    return out;
}

} // namespace detail

// Compiles e into a register. The label goes on the first emitted
// instruction; when the whole expression is served from the cache nothing is
// emitted and the caller keeps the label. Registers holding live
// subexpressions are protected by the in-use set, which grows left-to-right
// across operator operands.
inline ExprCompileResult compile_expr(const CompRec& rec, std::set<Reg> in_use,
                                      std::optional<Label> label, const ExprPtr& e,
                                      int num_regs = default_register_count) {
    ExprCompileResult res;
    res.rec = rec;

    if (auto* c = std::get_if<ConstExpr>(&e->node)) {
        auto r = reg_alloc(rec.regrec, in_use, num_regs);
        if (!r) { res.failed = true; return res; }
        res.code.push_back({label, Instr{MoveKInstr{*r, c->val}}, rec});
        res.result = *r;
        res.rec.regrec[*r] = e;
        return res;
    }
    if (auto* v = std::get_if<VarExpr>(&e->node)) {
        if (auto cached = reg_alloc_cached(rec.regrec, in_use, v->name, num_regs)) {
            res.result = *cached;
            return res;  // nothing emitted; label stays with the caller
        }
        auto r = reg_alloc(rec.regrec, in_use, num_regs);
        if (!r) { res.failed = true; return res; }
        res.code.push_back({label, Instr{LoadInstr{*r, v->name}}, rec});
        res.result = *r;
        res.rec.regrec[*r] = e;
        return res;
    }

    const auto& b = std::get<BinExpr>(e->node);
    ExprCompileResult lhs = compile_expr(rec, in_use, label, b.lhs, num_regs);
    if (lhs.failed) { res.failed = true; return res; }
    std::set<Reg> in_use2 = in_use;
    in_use2.insert(lhs.result);
    std::optional<Label> label2 = lhs.code.empty() ? label : std::nullopt;
    ExprCompileResult rhs = compile_expr(lhs.rec, in_use2, label2, b.rhs, num_regs);
    if (rhs.failed) { res.failed = true; return res; }

    res.code = std::move(lhs.code);
    res.code.insert(res.code.end(), rhs.code.begin(), rhs.code.end());
    std::optional<Label> op_label = res.code.empty() ? label : std::nullopt;
    res.code.push_back({op_label, Instr{OpInstr{b.op, lhs.result, rhs.result}}, rhs.rec});
    res.result = lhs.result;
    res.rec = rhs.rec;
    res.rec.regrec[lhs.result] = e;  // result register now caches the whole expression
    return res;
}

// Stability requirements checked over the program structure, threading the
// assumption record through the lock primitives' effects:
//   - expressions read only stable variables;
//   - assignment to an unstable variable is allowed only if no lock governs it;
//   - both branches of a conditional end with the same assumption record;
//   - loop bodies restore the assumption record they started with.
struct StabilityResult {
    bool ok = true;
    std::string reason;          // first failure, for diagnostics
    AsmRec final_rec;
};

namespace detail {

inline AsmRec asmrec_acq(const AsmRec& s, const LockSets& ls) {
    AsmRec out = s;
    out.no_w.insert(ls.no_w.begin(), ls.no_w.end());
    out.no_rw.insert(ls.no_rw.begin(), ls.no_rw.end());
    return out;
}

inline AsmRec asmrec_rel(const AsmRec& s, const LockSets& ls) {
    AsmRec out = s;
    for (const auto& v : ls.no_w) out.no_w.erase(v);
    for (const auto& v : ls.no_rw) out.no_rw.erase(v);
    return out;
}

inline StabilityResult fail_stability(std::string reason) {
    StabilityResult r;
    r.ok = false;
    r.reason = std::move(reason);
    return r;
}

inline StabilityResult stability_walk(const Cmd& c, const AsmRec& s, const LockInterp& interp,
                                      const ClassificationPolicy& policy) {
    StabilityResult res;
    res.final_rec = s;

    if (std::holds_alternative<SkipCmd>(c.node) || std::holds_alternative<StopCmd>(c.node))
        return res;

    auto check_expr = [&](const ExprPtr& e) -> std::optional<std::string> {
        for (const auto& v : expr_vars(e))
            if (!var_stable(s, policy, v))
                return "expression '" + expr_str(e) + "' reads unstable variable '" + v + "'";
        return std::nullopt;
    };

    if (auto* a = std::get_if<AssignCmd>(&c.node)) {
        if (auto err = check_expr(a->rhs)) return fail_stability(*err);
        if (!var_stable(s, policy, a->var) && lock_governed(interp, a->var))
            return fail_stability("assignment to lock-governed variable '" + a->var +
                                  "' without holding its lock");
        return res;
    }
    if (auto* q = std::get_if<SeqCmd>(&c.node)) {
        StabilityResult r1 = stability_walk(*q->first, s, interp, policy);
        if (!r1.ok) return r1;
        return stability_walk(*q->second, r1.final_rec, interp, policy);
    }
    if (auto* i = std::get_if<IfCmd>(&c.node)) {
        if (auto err = check_expr(i->cond)) return fail_stability(*err);
        StabilityResult r1 = stability_walk(*i->then_branch, s, interp, policy);
        if (!r1.ok) return r1;
        StabilityResult r2 = stability_walk(*i->else_branch, s, interp, policy);
        if (!r2.ok) return r2;
        if (!(r1.final_rec == r2.final_rec))
            return fail_stability("branches of 'if " + expr_str(i->cond) +
                                  "' end with different lock assumptions");
        res.final_rec = r1.final_rec;
        return res;
    }
    if (auto* w = std::get_if<WhileCmd>(&c.node)) {
        if (auto err = check_expr(w->cond)) return fail_stability(*err);
        StabilityResult rb = stability_walk(*w->body, s, interp, policy);
        if (!rb.ok) return rb;
        if (!(rb.final_rec == s))
            return fail_stability("body of 'while " + expr_str(w->cond) +
                                  "' does not restore the lock assumptions held at entry");
        return res;
    }
    if (auto* acq = std::get_if<LockAcqCmd>(&c.node)) {
        res.final_rec = asmrec_acq(s, lock_sets(interp, acq->lock));
        return res;
    }
    const auto& rel = std::get<LockRelCmd>(c.node);
    res.final_rec = asmrec_rel(s, lock_sets(interp, rel.lock));
    return res;
}

} // namespace detail

inline StabilityResult stability_checks_detail(const CmdPtr& c, const CompRec& rec,
                                               const LockInterp& interp,
                                               const ClassificationPolicy& policy) {
    return detail::stability_walk(*c, rec.asmrec, interp, policy);
}

inline bool stability_checks(const CmdPtr& c, const CompRec& rec, const LockInterp& interp,
                             const ClassificationPolicy& policy) {
    return stability_checks_detail(c, rec, interp, policy).ok;
}

struct CompileOutput {
    std::vector<AnnotatedInstr> annotated;
    std::optional<Label> exit_label;
    Label next_label = 0;
    CompRec final_rec;
    bool failed = false;
    std::string fail_reason;
};

inline bool compiler_input_reqs(const CompRec& rec, std::optional<Label> label, Label next_label,
                                const CmdPtr& c, const LockInterp& interp,
                                const ClassificationPolicy& policy) {
    return stability_checks(c, rec, interp, policy) && regrec_stable(rec, policy) &&
           !is_stop(c) && (!label || *label < next_label);
}

namespace detail {

inline CompileOutput fail_compile(std::string reason) {
    CompileOutput out;
    out.failed = true;
    out.fail_reason = std::move(reason);
    return out;
}

} // namespace detail

// Single-pass compilation of one command. The incoming label is bound to the
// first emitted instruction; the returned exit label, when present, is a
// dangling forward target the caller must bind (the next fragment's first
// instruction, or the program end at finalisation).
inline CompileOutput compile_cmd(const CompRec& rec, std::optional<Label> label, Label next_label,
                                 const CmdPtr& c, const LockInterp& interp,
                                 const ClassificationPolicy& policy,
                                 int num_regs = default_register_count) {
    using detail::fail_compile;
    const Cmd& cmd = *c;

    if (is_stop(cmd)) return fail_compile("cannot compile a terminated program");
    if (label && *label >= next_label) return fail_compile("initial label is not older than the label counter");

    if (std::holds_alternative<SkipCmd>(cmd.node)) {
        CompileOutput out;
        out.annotated.push_back({label, Instr{NopInstr{}}, rec});
        out.next_label = next_label;
        out.final_rec = rec;
        return out;
    }

    if (auto* a = std::get_if<AssignCmd>(&cmd.node)) {
        for (const auto& v : expr_vars(a->rhs))
            if (!var_stable(rec.asmrec, policy, v))
                return fail_compile("expression '" + expr_str(a->rhs) +
                                    "' reads unstable variable '" + v + "'");
        bool stable = var_stable(rec.asmrec, policy, a->var);
        if (!stable && lock_governed(interp, a->var))
            return fail_compile("assignment to lock-governed variable '" + a->var +
                                "' without holding its lock");
        ExprCompileResult er = compile_expr(rec, {}, label, a->rhs, num_regs);
        if (er.failed) return fail_compile("expression depth exceeds the register bank");

        CompileOutput out;
        out.annotated = std::move(er.code);
        std::optional<Label> store_label = out.annotated.empty() ? label : std::nullopt;
        out.annotated.push_back({store_label, Instr{StoreInstr{a->var, er.result}}, er.rec});
        out.next_label = next_label;
        // The stored variable's cached expressions are stale; afterwards the
        // result register is the one place known to hold it.
        RegRec flushed = detail::regrec_erase_mentions(er.rec.regrec, a->var);
        if (stable) flushed[er.result] = e_var(a->var);
        out.final_rec = CompRec{std::move(flushed), rec.asmrec};
        return out;
    }

    if (auto* q = std::get_if<SeqCmd>(&cmd.node)) {
        CompileOutput o1 = compile_cmd(rec, label, next_label, q->first, interp, policy, num_regs);
        if (o1.failed) return o1;
        CompileOutput o2 = compile_cmd(o1.final_rec, o1.exit_label, o1.next_label, q->second,
                                       interp, policy, num_regs);
        if (o2.failed) return o2;
        CompileOutput out;
        out.annotated = std::move(o1.annotated);
        out.annotated.insert(out.annotated.end(), o2.annotated.begin(), o2.annotated.end());
        out.exit_label = o2.exit_label;
        out.next_label = o2.next_label;
        out.final_rec = std::move(o2.final_rec);
        return out;
    }

    if (auto* i = std::get_if<IfCmd>(&cmd.node)) {
        for (const auto& v : expr_vars(i->cond))
            if (!var_stable(rec.asmrec, policy, v))
                return fail_compile("condition '" + expr_str(i->cond) +
                                    "' reads unstable variable '" + v + "'");
        ExprCompileResult er = compile_expr(rec, {}, label, i->cond, num_regs);
        if (er.failed) return fail_compile("expression depth exceeds the register bank");

        Label br = next_label;
        Label ex = next_label + 1;
        CompileOutput o1 = compile_cmd(er.rec, std::nullopt, next_label + 2, i->then_branch,
                                       interp, policy, num_regs);
        if (o1.failed) return o1;
        CompileOutput o2 = compile_cmd(er.rec, br, o1.next_label, i->else_branch, interp, policy,
                                       num_regs);
        if (o2.failed) return o2;
        if (!(o1.final_rec.asmrec == o2.final_rec.asmrec))
            return fail_compile("branches of 'if " + expr_str(i->cond) +
                                "' end with different lock assumptions");

        CompileOutput out;
        out.annotated = std::move(er.code);
        std::optional<Label> jz_label = out.annotated.empty() ? label : std::nullopt;
        out.annotated.push_back({jz_label, Instr{JzInstr{br, er.result}}, er.rec});
        out.annotated.insert(out.annotated.end(), o1.annotated.begin(), o1.annotated.end());
        out.annotated.push_back({o1.exit_label, Instr{JmpInstr{ex}}, o1.final_rec});
        out.annotated.insert(out.annotated.end(), o2.annotated.begin(), o2.annotated.end());
        out.annotated.push_back({o2.exit_label, Instr{NopInstr{}}, o2.final_rec});
        out.exit_label = ex;
        out.next_label = o2.next_label;
        out.final_rec =
            CompRec{detail::regrec_meet(o1.final_rec.regrec, o2.final_rec.regrec),
                    o1.final_rec.asmrec};
        return out;
    }

    if (auto* w = std::get_if<WhileCmd>(&cmd.node)) {
        for (const auto& v : expr_vars(w->cond))
            if (!var_stable(rec.asmrec, policy, v))
                return fail_compile("condition '" + expr_str(w->cond) +
                                    "' reads unstable variable '" + v + "'");
        // The incoming label, when present, doubles as the loop head; it
        // would otherwise stay unbound. A fresh head is allocated otherwise.
        Label head;
        Label nl = next_label;
        if (label) {
            head = *label;
        } else {
            head = nl++;
        }
        Label ex = nl++;

        // Cached entries are dropped so the condition is re-evaluated from
        // memory on every iteration.
        CompRec flushed{RegRec{}, rec.asmrec};
        ExprCompileResult er = compile_expr(flushed, {}, head, w->cond, num_regs);
        if (er.failed) return fail_compile("expression depth exceeds the register bank");
        if (er.code.empty()) return fail_compile("empty loop-condition compilation");

        CompileOutput ob = compile_cmd(er.rec, std::nullopt, nl, w->body, interp, policy, num_regs);
        if (ob.failed) return ob;
        if (!(ob.final_rec.asmrec == rec.asmrec))
            return fail_compile("body of 'while " + expr_str(w->cond) +
                                "' does not restore the lock assumptions held at entry");

        CompileOutput out;
        out.annotated = std::move(er.code);
        out.annotated.push_back({std::nullopt, Instr{JzInstr{ex, er.result}}, er.rec});
        out.annotated.insert(out.annotated.end(), ob.annotated.begin(), ob.annotated.end());
        out.annotated.push_back({ob.exit_label, Instr{JmpInstr{head}}, ob.final_rec});
        out.exit_label = ex;
        out.next_label = ob.next_label;
        out.final_rec = CompRec{RegRec{}, rec.asmrec};
        return out;
    }

    if (auto* acq = std::get_if<LockAcqCmd>(&cmd.node)) {
        if (!interp.count(acq->lock)) return fail_compile("undeclared lock: " + acq->lock);
        CompileOutput out;
        out.annotated.push_back({label, Instr{LockAcqInstr{acq->lock}}, rec});
        out.next_label = next_label;
        out.final_rec =
            CompRec{rec.regrec, detail::asmrec_acq(rec.asmrec, lock_sets(interp, acq->lock))};
        return out;
    }

    const auto& rel = std::get<LockRelCmd>(cmd.node);
    if (!interp.count(rel.lock)) return detail::fail_compile("undeclared lock: " + rel.lock);
    const LockSets& ls = lock_sets(interp, rel.lock);
    CompileOutput out;
    out.annotated.push_back({label, Instr{LockRelInstr{rel.lock}}, rec});
    out.next_label = next_label;
    // Entries over variables this release makes unstable must go.
    RegRec kept = detail::regrec_erase_mentions_any(rec.regrec, ls.all());
    out.final_rec = CompRec{std::move(kept), detail::asmrec_rel(rec.asmrec, ls)};
    return out;
}

// Label hygiene between consecutively compiled fragments: the first may jump
// within itself or to the second's first instruction; the second never jumps
// back into the first.
inline bool joinable(const std::vector<AnnotatedInstr>& p1, const std::vector<AnnotatedInstr>& p2) {
    std::set<Label> labels1, labels2;
    for (const auto& ai : p1)
        if (ai.label) labels1.insert(*ai.label);
    for (const auto& ai : p2)
        if (ai.label) labels2.insert(*ai.label);
    std::optional<Label> p2_entry;
    if (!p2.empty() && p2.front().label) p2_entry = *p2.front().label;

    auto jump_target = [](const Instr& in) -> std::optional<Label> {
        if (auto* j = std::get_if<JmpInstr>(&in.node)) return j->target;
        if (auto* jz = std::get_if<JzInstr>(&in.node)) return jz->target;
        return std::nullopt;
    };

    for (const auto& ai : p1) {
        if (auto t = jump_target(ai.instr)) {
            if (!labels1.count(*t) && !(p2_entry && *p2_entry == *t)) return false;
        }
    }
    for (const auto& ai : p2) {
        if (auto t = jump_target(ai.instr)) {
            if (labels1.count(*t)) return false;
        }
    }
    return true;
}

// Strips annotations, resolves labels, and binds the dangling exit label to
// the slot one past the program end.
inline RiscProgram finalize(const CompileOutput& output) {
    RiscProgram prog;
    for (const auto& ai : output.annotated) {
        if (ai.label) {
            auto [it, inserted] = prog.label_index.emplace(*ai.label, prog.code.size());
            if (!inserted) throw DuplicateLabel(*ai.label);
        }
        prog.code.emplace_back(ai.label, ai.instr);
    }
    prog.exit_label = output.exit_label;
    if (prog.exit_label && prog.label_index.count(*prog.exit_label))
        throw DuplicateLabel(*prog.exit_label);
    for (const auto& [lab, instr] : prog.code) {
        (void)lab;
        std::optional<Label> target;
        if (auto* j = std::get_if<JmpInstr>(&instr.node)) target = j->target;
        if (auto* jz = std::get_if<JzInstr>(&instr.node)) target = jz->target;
        if (target) prog.resolve(*target);  // throws UnboundLabel if dangling
    }
    return prog;
}

// Whole-program entry point: validates declarations and input requirements,
// then compiles from the empty record.
inline CompileOutput compile_program(const CmdPtr& c, const LockInterp& interp,
                                     const ClassificationPolicy& policy,
                                     int num_regs = default_register_count) {
    // Undeclared names are configuration errors, separate from rejection.
    struct Walk {
        const LockInterp& interp;
        const ClassificationPolicy& policy;
        void expr(const ExprPtr& e) {
            for (const auto& v : expr_vars(e))
                if (!policy.is_declared(v)) throw UnknownVariable(v);
        }
        void cmd(const Cmd& c) {
            if (auto* a = std::get_if<AssignCmd>(&c.node)) {
                if (!policy.is_declared(a->var)) throw UnknownVariable(a->var);
                expr(a->rhs);
            } else if (auto* q = std::get_if<SeqCmd>(&c.node)) {
                cmd(*q->first); cmd(*q->second);
            } else if (auto* i = std::get_if<IfCmd>(&c.node)) {
                expr(i->cond); cmd(*i->then_branch); cmd(*i->else_branch);
            } else if (auto* w = std::get_if<WhileCmd>(&c.node)) {
                expr(w->cond); cmd(*w->body);
            } else if (auto* acq = std::get_if<LockAcqCmd>(&c.node)) {
                if (!interp.count(acq->lock)) throw UnknownLock(acq->lock);
            } else if (auto* rel = std::get_if<LockRelCmd>(&c.node)) {
                if (!interp.count(rel->lock)) throw UnknownLock(rel->lock);
            }
        }
    } walk{interp, policy};
    walk.cmd(*c);

    StabilityResult st = stability_checks_detail(c, init_comprec(), interp, policy);
    if (!st.ok) return detail::fail_compile("stability check failed: " + st.reason);
    return compile_cmd(init_comprec(), std::nullopt, 0, c, interp, policy, num_regs);
}

} // namespace wrc
