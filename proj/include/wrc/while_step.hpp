#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include "wrc/cmd.hpp"
#include "wrc/mem.hpp"
#include "wrc/modes.hpp"
#include "wrc/policy.hpp"

namespace wrc {

struct SteppedStop : std::logic_error {
    SteppedStop() : std::logic_error("attempted to step a terminated configuration") {}
};

inline const LockSets& lock_sets(const LockInterp& interp, const std::string& k) {
    auto it = interp.find(k);
    if (it == interp.end()) throw UnknownLock(k);
    return it->second;
}

// Acquiring a lock turns the corresponding guarantees into assumptions;
// releasing restores them.
inline ModeState lock_acq_upd(const ModeState& mds, const std::string& k, const LockInterp& interp) {
    const LockSets& s = lock_sets(interp, k);
    ModeState out = mds;
    for (const auto& v : s.no_w) {
        out.guar_no_w.erase(v);
        out.asm_no_w.insert(v);
    }
    for (const auto& v : s.no_rw) {
        out.guar_no_rw.erase(v);
        out.asm_no_rw.insert(v);
    }
    return out;
}

inline ModeState lock_rel_upd(const ModeState& mds, const std::string& k, const LockInterp& interp) {
    const LockSets& s = lock_sets(interp, k);
    ModeState out = mds;
    for (const auto& v : s.no_w) {
        out.asm_no_w.erase(v);
        out.guar_no_w.insert(v);
    }
    for (const auto& v : s.no_rw) {
        out.asm_no_rw.erase(v);
        out.guar_no_rw.insert(v);
    }
    return out;
}

// A mode state is consistent with holding k when it has all the assumptions,
// and none of the guarantees, for the variables k governs.
inline bool lock_held_mds_correct(const ModeState& mds, const std::string& k, const LockInterp& interp) {
    const LockSets& s = lock_sets(interp, k);
    for (const auto& v : s.no_w)
        if (mds.guar_no_w.count(v) || !mds.asm_no_w.count(v)) return false;
    for (const auto& v : s.no_rw)
        if (mds.guar_no_rw.count(v) || !mds.asm_no_rw.count(v)) return false;
    return true;
}

// Not the negation of the above: all guarantees present, no assumptions.
inline bool lock_not_held_mds_correct(const ModeState& mds, const std::string& k, const LockInterp& interp) {
    const LockSets& s = lock_sets(interp, k);
    for (const auto& v : s.no_w)
        if (!mds.guar_no_w.count(v) || mds.asm_no_w.count(v)) return false;
    for (const auto& v : s.no_rw)
        if (!mds.guar_no_rw.count(v) || mds.asm_no_rw.count(v)) return false;
    return true;
}

// Initial mode state: every guarantee the discipline demands, no assumptions.
inline ModeState init_mds(const LockInterp& interp) {
    ModeState out;
    for (const auto& [k, s] : interp) {
        out.guar_no_w.insert(s.no_w.begin(), s.no_w.end());
        out.guar_no_rw.insert(s.no_rw.begin(), s.no_rw.end());
    }
    return out;
}

inline bool no_locks_held(const Mem& mem, const LockInterp& interp) {
    for (const auto& [k, _] : interp)
        if (ev_lock(mem.get_lock(k))) return false;
    return true;
}

// Program variables touched by one evaluation step, plus the lock variable
// if the step was a lock primitive.
struct Footprint {
    std::set<std::string> reads;
    std::set<std::string> writes;
    std::optional<std::string> lock;
};

struct WhileConf {
    CmdPtr cmd;
    ModeState mds;
    Mem mem;
};

// Deterministic one-step evaluation. Sequencing steps the left command and,
// when it terminates, continues as the right command within the same step.
inline std::pair<WhileConf, Footprint> step_while(const WhileConf& conf, const LockInterp& interp) {
    const Cmd& c = *conf.cmd;
    if (is_stop(c)) throw SteppedStop();

    if (std::holds_alternative<SkipCmd>(c.node)) {
        return {{c_stop(), conf.mds, conf.mem}, {}};
    }
    if (auto* a = std::get_if<AssignCmd>(&c.node)) {
        Footprint fp;
        fp.reads = expr_vars(a->rhs);
        fp.writes.insert(a->var);
        Mem mem = conf.mem;
        mem.set_var(a->var, ev_exp(conf.mem, a->rhs));
        return {{c_stop(), conf.mds, std::move(mem)}, std::move(fp)};
    }
    if (auto* s = std::get_if<SeqCmd>(&c.node)) {
        auto [inner, fp] = step_while({s->first, conf.mds, conf.mem}, interp);
        CmdPtr next = is_stop(inner.cmd) ? s->second : c_seq(inner.cmd, s->second);
        return {{std::move(next), inner.mds, inner.mem}, std::move(fp)};
    }
    if (auto* i = std::get_if<IfCmd>(&c.node)) {
        Footprint fp;
        fp.reads = expr_vars(i->cond);
        CmdPtr next = truthy(ev_exp(conf.mem, i->cond)) ? i->then_branch : i->else_branch;
        return {{std::move(next), conf.mds, conf.mem}, std::move(fp)};
    }
    if (auto* w = std::get_if<WhileCmd>(&c.node)) {
        // One unrolling step; the condition is read by the If that follows.
        CmdPtr unrolled = c_if(w->cond, c_seq(w->body, conf.cmd), c_stop());
        return {{std::move(unrolled), conf.mds, conf.mem}, {}};
    }
    if (auto* acq = std::get_if<LockAcqCmd>(&c.node)) {
        Footprint fp;
        fp.lock = acq->lock;
        if (!ev_lock(conf.mem.get_lock(acq->lock))) {
            Mem mem = conf.mem;
            mem.set_lock(acq->lock, lock_true);
            return {{c_stop(), lock_acq_upd(conf.mds, acq->lock, interp), std::move(mem)},
                    std::move(fp)};
        }
        return {conf, std::move(fp)};  // spin on a held lock
    }
    auto& rel = std::get<LockRelCmd>(c.node);
    Footprint fp;
    fp.lock = rel.lock;
    if (lock_held_mds_correct(conf.mds, rel.lock, interp)) {
        Mem mem = conf.mem;
        mem.set_lock(rel.lock, lock_false);
        return {{c_stop(), lock_rel_upd(conf.mds, rel.lock, interp), std::move(mem)},
                std::move(fp)};
    }
    return {conf, std::move(fp)};  // release without holding: stutter
}

} // namespace wrc
