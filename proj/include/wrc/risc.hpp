#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "wrc/mem.hpp"
#include "wrc/modes.hpp"
#include "wrc/while_step.hpp"

namespace wrc {

using Label = uint64_t;
using Reg = int;

constexpr int default_register_count = 8;

struct UnboundLabel : std::runtime_error {
    explicit UnboundLabel(Label l)
        : std::runtime_error("unbound label: L" + std::to_string(l)) {}
};
struct DuplicateLabel : std::runtime_error {
    explicit DuplicateLabel(Label l)
        : std::runtime_error("duplicate label: L" + std::to_string(l)) {}
};

struct LoadInstr  { Reg reg; std::string var; };
struct StoreInstr { std::string var; Reg reg; };
struct JmpInstr   { Label target; };
struct JzInstr    { Label target; Reg reg; };   // jump if zero
struct NopInstr   {};
struct MoveKInstr { Reg reg; Value val; };
struct MoveRInstr { Reg dst; Reg src; };
struct OpInstr    { BinOp op; Reg dst; Reg src; };  // dst := dst op src
struct LockAcqInstr { std::string lock; };
struct LockRelInstr { std::string lock; };

struct Instr {
    std::variant<LoadInstr, StoreInstr, JmpInstr, JzInstr, NopInstr, MoveKInstr, MoveRInstr,
                 OpInstr, LockAcqInstr, LockRelInstr>
        node;
};

inline bool instr_equal(const Instr& a, const Instr& b) {
    if (a.node.index() != b.node.index()) return false;
    if (auto* x = std::get_if<LoadInstr>(&a.node)) {
        const auto& y = std::get<LoadInstr>(b.node);
        return x->reg == y.reg && x->var == y.var;
    }
    if (auto* x = std::get_if<StoreInstr>(&a.node)) {
        const auto& y = std::get<StoreInstr>(b.node);
        return x->var == y.var && x->reg == y.reg;
    }
    if (auto* x = std::get_if<JmpInstr>(&a.node)) return x->target == std::get<JmpInstr>(b.node).target;
    if (auto* x = std::get_if<JzInstr>(&a.node)) {
        const auto& y = std::get<JzInstr>(b.node);
        return x->target == y.target && x->reg == y.reg;
    }
    if (std::holds_alternative<NopInstr>(a.node)) return true;
    if (auto* x = std::get_if<MoveKInstr>(&a.node)) {
        const auto& y = std::get<MoveKInstr>(b.node);
        return x->reg == y.reg && x->val == y.val;
    }
    if (auto* x = std::get_if<MoveRInstr>(&a.node)) {
        const auto& y = std::get<MoveRInstr>(b.node);
        return x->dst == y.dst && x->src == y.src;
    }
    if (auto* x = std::get_if<OpInstr>(&a.node)) {
        const auto& y = std::get<OpInstr>(b.node);
        return x->op == y.op && x->dst == y.dst && x->src == y.src;
    }
    if (auto* x = std::get_if<LockAcqInstr>(&a.node))
        return x->lock == std::get<LockAcqInstr>(b.node).lock;
    return std::get<LockRelInstr>(a.node).lock == std::get<LockRelInstr>(b.node).lock;
}

// An optionally labelled instruction listing with resolved labels. The
// designated exit label, when present, addresses the instruction slot one
// past the end, so a top-level exit jump terminates the program.
struct RiscProgram {
    std::vector<std::pair<std::optional<Label>, Instr>> code;
    std::map<Label, size_t> label_index;
    std::optional<Label> exit_label;

    size_t size() const { return code.size(); }

    size_t resolve(Label l) const {
        auto it = label_index.find(l);
        if (it != label_index.end()) return it->second;
        if (exit_label && *exit_label == l) return code.size();
        throw UnboundLabel(l);
    }
};

inline bool program_equal(const RiscProgram& a, const RiscProgram& b) {
    if (a.code.size() != b.code.size() || a.label_index != b.label_index ||
        a.exit_label != b.exit_label)
        return false;
    for (size_t i = 0; i < a.code.size(); ++i)
        if (a.code[i].first != b.code[i].first || !instr_equal(a.code[i].second, b.code[i].second))
            return false;
    return true;
}

struct RiscConf {
    size_t pc = 0;
    std::shared_ptr<const RiscProgram> prog;
    std::vector<Value> regs;
    ModeState mds;
    Mem mem;
};

inline RiscConf make_risc_conf(std::shared_ptr<const RiscProgram> prog, int num_regs,
                               ModeState mds, Mem mem) {
    RiscConf c;
    c.prog = std::move(prog);
    c.regs.assign(static_cast<size_t>(num_regs), Value{0});
    c.mds = std::move(mds);
    c.mem = std::move(mem);
    return c;
}

inline bool stops(const RiscConf& conf) { return conf.pc >= conf.prog->size(); }

inline std::pair<RiscConf, Footprint> step_risc(const RiscConf& conf, const LockInterp& interp) {
    if (stops(conf)) throw SteppedStop();
    const Instr& instr = conf.prog->code[conf.pc].second;
    RiscConf out = conf;
    Footprint fp;
    out.pc = conf.pc + 1;

    if (auto* ld = std::get_if<LoadInstr>(&instr.node)) {
        fp.reads.insert(ld->var);
        out.regs.at(static_cast<size_t>(ld->reg)) = conf.mem.get_var(ld->var);
    } else if (auto* st = std::get_if<StoreInstr>(&instr.node)) {
        fp.writes.insert(st->var);
        out.mem.set_var(st->var, conf.regs.at(static_cast<size_t>(st->reg)));
    } else if (auto* j = std::get_if<JmpInstr>(&instr.node)) {
        out.pc = conf.prog->resolve(j->target);
    } else if (auto* jz = std::get_if<JzInstr>(&instr.node)) {
        if (conf.regs.at(static_cast<size_t>(jz->reg)) == Value{0})
            out.pc = conf.prog->resolve(jz->target);
    } else if (std::holds_alternative<NopInstr>(instr.node)) {
        // fall through
    } else if (auto* mk = std::get_if<MoveKInstr>(&instr.node)) {
        out.regs.at(static_cast<size_t>(mk->reg)) = mk->val;
    } else if (auto* mr = std::get_if<MoveRInstr>(&instr.node)) {
        out.regs.at(static_cast<size_t>(mr->dst)) = conf.regs.at(static_cast<size_t>(mr->src));
    } else if (auto* op = std::get_if<OpInstr>(&instr.node)) {
        out.regs.at(static_cast<size_t>(op->dst)) =
            apply_op(op->op, conf.regs.at(static_cast<size_t>(op->dst)),
                     conf.regs.at(static_cast<size_t>(op->src)));
    } else if (auto* acq = std::get_if<LockAcqInstr>(&instr.node)) {
        fp.lock = acq->lock;
        if (!ev_lock(conf.mem.get_lock(acq->lock))) {
            out.mem.set_lock(acq->lock, lock_true);
            out.mds = lock_acq_upd(conf.mds, acq->lock, interp);
        } else {
            out.pc = conf.pc;  // spin
        }
    } else {
        const auto& rel = std::get<LockRelInstr>(instr.node);
        fp.lock = rel.lock;
        if (lock_held_mds_correct(conf.mds, rel.lock, interp)) {
            out.mem.set_lock(rel.lock, lock_false);
            out.mds = lock_rel_upd(conf.mds, rel.lock, interp);
        } else {
            out.pc = conf.pc;  // invalid release: stutter
        }
    }
    return {std::move(out), std::move(fp)};
}

} // namespace wrc
