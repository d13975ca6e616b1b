#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "wrc/compile.hpp"
#include "wrc/policy.hpp"
#include "wrc/risc.hpp"
#include "wrc/schedule.hpp"
#include "wrc/while_step.hpp"

namespace wrc {

// Every check is a bounded exploration: "ok" means no violation within the
// stated bounds, which are recorded in the report.
struct CheckReport {
    enum class Verdict { Ok, Violated, Error };

    std::string check;
    Verdict verdict = Verdict::Ok;
    nlohmann::json bounds = nlohmann::json::object();
    nlohmann::json counterexample;
    std::vector<std::string> notes;

    bool ok() const { return verdict == Verdict::Ok; }
    int exit_code() const {
        switch (verdict) {
        case Verdict::Ok: return 0;
        case Verdict::Violated: return 1;
        case Verdict::Error: return 2;
        }
        return 2;
    }
    const char* verdict_str() const {
        switch (verdict) {
        case Verdict::Ok: return "ok";
        case Verdict::Violated: return "violated";
        case Verdict::Error: return "error";
        }
        return "error";
    }

    void violate(nlohmann::json cx) {
        verdict = Verdict::Violated;
        counterexample = std::move(cx);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["check"] = check;
        j["verdict"] = verdict_str();
        j["bounds"] = bounds;
        j["counterexample"] = counterexample.is_null() ? nlohmann::json() : counterexample;
        j["notes"] = notes;
        return j;
    }
};

inline nlohmann::json mem_json(const Mem& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [a, v] : m.entries()) j[addr_str(a)] = v.v;
    return j;
}

inline nlohmann::json schedule_json(const Schedule& s) {
    nlohmann::json j = nlohmann::json::array();
    for (size_t i : s) j.push_back(i);
    return j;
}

// Pacing function: how many source steps simulate one machine step, read off
// the instruction about to execute and the head of the source program.
// Expression instructions pace 1 only when the source must first unroll a
// loop head; jumps are silent control flow; a Nop paces with the Skip it was
// compiled from and is silent otherwise.
inline int abs_steps(const WhileConf& w, const RiscConf& r) {
    if (stops(r)) return 0;
    const Instr& in = r.prog->code[r.pc].second;
    const Cmd& head = leftmost_cmd(w.cmd);
    if (std::holds_alternative<LoadInstr>(in.node) || std::holds_alternative<OpInstr>(in.node) ||
        std::holds_alternative<MoveKInstr>(in.node))
        return std::holds_alternative<WhileCmd>(head.node) ? 1 : 0;
    if (std::holds_alternative<JmpInstr>(in.node)) return 0;
    if (std::holds_alternative<NopInstr>(in.node))
        return std::holds_alternative<SkipCmd>(head.node) ? 1 : 0;
    return 1;
}

inline bool regrec_mem_consistent(const RegRec& regrec, const std::vector<Value>& regs,
                                  const Mem& mem) {
    for (const auto& [r, e] : regrec) {
        if (r < 0 || static_cast<size_t>(r) >= regs.size()) return false;
        if (regs[static_cast<size_t>(r)] != ev_exp(mem, e)) return false;
    }
    return true;
}

inline bool asmrec_mds_consistent(const AsmRec& s, const ModeState& mds) {
    return s.no_w == mds.asm_no_w && s.no_rw == mds.asm_no_rw;
}

namespace detail {

inline const CompRec& record_at(const CompileOutput& out, size_t pc) {
    return pc < out.annotated.size() ? out.annotated[pc].rec : out.final_rec;
}

} // namespace detail

// Square-diagram refinement conformance: runs the compiled image one
// instruction at a time, pacing the source alongside it, and demands equal
// mode state and memory plus record consistency at every point.
inline CheckReport check_refinement(const CmdPtr& c, const CompileOutput& output,
                                    const std::shared_ptr<const RiscProgram>& prog,
                                    const std::vector<Mem>& init_mems, const ModeState& mds0,
                                    const LockInterp& interp, size_t max_steps,
                                    int num_regs = default_register_count) {
    CheckReport rep;
    rep.check = "refine";
    rep.bounds = {{"init_mems", init_mems.size()}, {"max_steps", max_steps}};

    for (size_t mi = 0; mi < init_mems.size(); ++mi) {
        WhileConf w{c, mds0, init_mems[mi]};
        RiscConf r = make_risc_conf(prog, num_regs, mds0, init_mems[mi]);

        auto fail = [&](size_t step, const std::string& what) {
            rep.violate({{"init_mem", mem_json(init_mems[mi])},
                         {"init_index", mi},
                         {"step", step},
                         {"pc", r.pc},
                         {"predicate", what}});
        };

        const CompRec& rec0 = detail::record_at(output, 0);
        if (!regrec_mem_consistent(rec0.regrec, r.regs, r.mem) ||
            !asmrec_mds_consistent(rec0.asmrec, r.mds)) {
            fail(0, "initial configuration inconsistent with initial record");
            return rep;
        }

        for (size_t step = 0; step < max_steps && !stops(r); ++step) {
            int n = abs_steps(w, r);
            auto [r2, fp] = step_risc(r, interp);
            (void)fp;
            for (int k = 0; k < n; ++k) {
                if (is_stop(w.cmd)) {
                    fail(step, "source program terminated before its compiled image");
                    return rep;
                }
                w = step_while(w, interp).first;
            }
            r = std::move(r2);
            if (!(w.mds == r.mds)) { fail(step, "mode states diverge"); return rep; }
            if (!(w.mem == r.mem)) { fail(step, "memories diverge"); return rep; }
            const CompRec& rec = detail::record_at(output, r.pc);
            if (!regrec_mem_consistent(rec.regrec, r.regs, r.mem)) {
                fail(step, "register record inconsistent with registers and memory");
                return rep;
            }
            if (!asmrec_mds_consistent(rec.asmrec, r.mds)) {
                fail(step, "assumption record inconsistent with mode state");
                return rep;
            }
        }
        if (stops(r) && !is_stop(w.cmd)) {
            fail(max_steps, "compiled image terminated before its source program");
            return rep;
        }
    }
    return rep;
}

// Decomposed security side conditions over one compiled program: lockstep
// runs from observationally equivalent memories must stop together, pace
// identically, stay at the same program point, and keep equal mode states.
inline CheckReport check_decomposed_side_conditions(
    const CmdPtr& c, const CompileOutput& output,
    const std::shared_ptr<const RiscProgram>& prog,
    const std::vector<std::pair<Mem, Mem>>& pairs, const ModeState& mds0,
    const LockInterp& interp, const ClassificationPolicy& policy, size_t max_steps,
    int num_regs = default_register_count) {
    (void)output;
    CheckReport rep;
    rep.check = "decomp";
    rep.bounds = {{"pairs", pairs.size()}, {"max_steps", max_steps}};

    for (size_t pi = 0; pi < pairs.size(); ++pi) {
        WhileConf w1{c, mds0, pairs[pi].first};
        WhileConf w2{c, mds0, pairs[pi].second};
        RiscConf r1 = make_risc_conf(prog, num_regs, mds0, pairs[pi].first);
        RiscConf r2 = make_risc_conf(prog, num_regs, mds0, pairs[pi].second);

        auto fail = [&](size_t step, const std::string& what) {
            rep.violate({{"pair", {mem_json(pairs[pi].first), mem_json(pairs[pi].second)}},
                         {"pair_index", pi},
                         {"step", step},
                         {"pc", {r1.pc, r2.pc}},
                         {"predicate", what}});
        };

        for (size_t step = 0; step < max_steps; ++step) {
            if (stops(r1) != stops(r2)) { fail(step, "stopping behaviour diverges"); return rep; }
            if (stops(r1)) break;
            if (r1.pc != r2.pc || !program_equal(*r1.prog, *r2.prog)) {
                fail(step, "coupling invariant: program point diverges");
                return rep;
            }
            if (!(r1.mds == r2.mds)) { fail(step, "mode states diverge across the pair"); return rep; }
            if (abs_steps(w1, r1) != abs_steps(w2, r2)) { fail(step, "pacing diverges"); return rep; }
            if (!low_eq_mod_modes(policy, r1.mds, r1.mem, r2.mem)) {
                fail(step, "observational equivalence lost between the runs");
                return rep;
            }
            if (!(w1.mem == r1.mem) || !(w1.mds == r1.mds) || !(w2.mem == r2.mem) ||
                !(w2.mds == r2.mds)) {
                fail(step, "source/machine correspondence lost");
                return rep;
            }
            int n = abs_steps(w1, r1);
            for (int k = 0; k < n; ++k) {
                if (is_stop(w1.cmd) || is_stop(w2.cmd)) { fail(step, "source terminated early"); return rep; }
                w1 = step_while(w1, interp).first;
                w2 = step_while(w2, interp).first;
            }
            r1 = step_risc(r1, interp).first;
            r2 = step_risc(r2, interp).first;
        }
    }
    return rep;
}

// Source-level ban on secret-dependent control flow: lockstep runs must keep
// identical program text and agree on every conditional they are about to
// branch on.
inline CheckReport check_no_high_branching(const CmdPtr& c,
                                           const std::vector<std::pair<Mem, Mem>>& pairs,
                                           const ModeState& mds0, const LockInterp& interp,
                                           size_t max_steps) {
    CheckReport rep;
    rep.check = "nohb";
    rep.bounds = {{"pairs", pairs.size()}, {"max_steps", max_steps}};

    for (size_t pi = 0; pi < pairs.size(); ++pi) {
        WhileConf w1{c, mds0, pairs[pi].first};
        WhileConf w2{c, mds0, pairs[pi].second};

        auto fail = [&](size_t step, const std::string& what) {
            rep.violate({{"pair", {mem_json(pairs[pi].first), mem_json(pairs[pi].second)}},
                         {"pair_index", pi},
                         {"step", step},
                         {"at", cmd_head_str(*w1.cmd)},
                         {"predicate", what}});
        };

        for (size_t step = 0; step < max_steps; ++step) {
            if (is_stop(w1.cmd) != is_stop(w2.cmd)) { fail(step, "termination diverges"); return rep; }
            if (is_stop(w1.cmd)) break;
            if (!cmd_equal(w1.cmd, w2.cmd)) { fail(step, "program text diverges"); return rep; }
            if (!(w1.mds == w2.mds)) { fail(step, "mode states diverge"); return rep; }
            const Cmd& head = leftmost_cmd(w1.cmd);
            if (auto* i = std::get_if<IfCmd>(&head.node)) {
                if (ev_exp(w1.mem, i->cond) != ev_exp(w2.mem, i->cond)) {
                    fail(step, "conditional branches on a secret: '" + expr_str(i->cond) + "'");
                    return rep;
                }
            }
            w1 = step_while(w1, interp).first;
            w2 = step_while(w2, interp).first;
        }
    }
    return rep;
}

namespace detail {

// Guarantees extend to control variables: refusing to touch v implies
// refusing to touch anything that decides v's classification.
inline bool write_violates_guarantees(const ModeState& mds, const ClassificationPolicy& policy,
                                      const std::string& y) {
    if (mds.guar_no_w.count(y) || mds.guar_no_rw.count(y)) return true;
    for (const auto& x : mds.guar_no_w)
        if (policy.cvars(x).count(y)) return true;
    for (const auto& x : mds.guar_no_rw)
        if (policy.cvars(x).count(y)) return true;
    return false;
}

inline bool read_violates_guarantees(const ModeState& mds, const ClassificationPolicy& policy,
                                     const std::string& y) {
    if (mds.guar_no_rw.count(y)) return true;
    for (const auto& x : mds.guar_no_rw)
        if (policy.cvars(x).count(y)) return true;
    return false;
}

// Variables other threads may legitimately perturb: writable, and with every
// classification they control writable as well.
inline std::vector<std::string> havoc_candidates(const ModeState& mds,
                                                 const ClassificationPolicy& policy) {
    std::vector<std::string> out;
    for (const auto& [v, cls] : policy.vars()) {
        (void)cls;
        if (!writable(mds, v)) continue;
        bool deps_ok = true;
        for (const auto& [u, ucls] : policy.vars()) {
            (void)ucls;
            if (policy.cvars(u).count(v) && !writable(mds, u)) { deps_ok = false; break; }
        }
        if (deps_ok) out.push_back(v);
    }
    return out;
}

} // namespace detail

// Local mode compliance: along seeded walks interleaved with environment
// havoc on writable variables, the thread's footprints never violate its own
// guarantees. Invalid lock releases are surfaced as diagnostics, not
// violations.
inline CheckReport check_local_compliance(const Thread& thread0, const LockInterp& interp,
                                          const ClassificationPolicy& policy,
                                          const std::vector<Mem>& init_mems, size_t walks,
                                          size_t walk_len, uint64_t seed) {
    CheckReport rep;
    rep.check = "local";
    rep.bounds = {{"init_mems", init_mems.size()},
                  {"walks", walks},
                  {"walk_len", walk_len},
                  {"seed", seed}};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> val_pick(0, 2);
    std::uniform_int_distribution<int> coin(0, 3);
    bool invalid_release_seen = false;

    for (size_t mi = 0; mi < init_mems.size(); ++mi) {
        for (size_t walk = 0; walk < walks; ++walk) {
            GlobalConf gc{{thread0}, init_mems[mi]};
            for (size_t step = 0; step < walk_len; ++step) {
                Thread& t = gc.threads[0];
                if (t.stopped()) break;
                if (auto* w = std::get_if<WhilePriv>(&t.priv)) {
                    const Cmd& head = leftmost_cmd(w->cmd);
                    if (auto* rel = std::get_if<LockRelCmd>(&head.node))
                        if (!lock_held_mds_correct(t.mds, rel->lock, interp))
                            invalid_release_seen = true;
                } else {
                    const auto& r = std::get<RiscPriv>(t.priv);
                    if (r.pc < r.prog->size())
                        if (auto* rel = std::get_if<LockRelInstr>(&r.prog->code[r.pc].second.node))
                            if (!lock_held_mds_correct(t.mds, rel->lock, interp))
                                invalid_release_seen = true;
                }
                ModeState before = t.mds;
                Footprint fp = step_thread(gc, 0, interp);
                for (const auto& y : fp.writes)
                    if (detail::write_violates_guarantees(before, policy, y)) {
                        rep.violate({{"init_mem", mem_json(init_mems[mi])},
                                     {"walk", walk},
                                     {"step", step},
                                     {"variable", y},
                                     {"guarantee", "no-write"}});
                        return rep;
                    }
                for (const auto& y : fp.reads)
                    if (detail::read_violates_guarantees(before, policy, y)) {
                        rep.violate({{"init_mem", mem_json(init_mems[mi])},
                                     {"walk", walk},
                                     {"step", step},
                                     {"variable", y},
                                     {"guarantee", "no-read-write"}});
                        return rep;
                    }
                // Environment interference.
                if (coin(rng) == 0) {
                    auto cands = detail::havoc_candidates(gc.threads[0].mds, policy);
                    if (!cands.empty()) {
                        std::uniform_int_distribution<size_t> pick(0, cands.size() - 1);
                        gc.mem.set_var(cands[pick(rng)], Value{val_pick(rng)});
                    }
                }
            }
        }
    }
    if (invalid_release_seen)
        rep.notes.push_back("discipline diagnostic: release without a matching acquire "
                            "(stuttering step)");
    return rep;
}

namespace detail {

inline bool mds_mentions_lock(const ModeState& mds, const LockInterp& interp) {
    for (Mode m : {Mode::AsmNoW, Mode::AsmNoRW, Mode::GuarNoW, Mode::GuarNoRW})
        for (const auto& x : mds.get(m))
            if (interp.count(x)) return true;
    return false;
}

inline std::optional<std::string> global_compat_violation(const GlobalConf& gc,
                                                          const LockInterp& interp,
                                                          const ClassificationPolicy& policy) {
    const auto& ts = gc.threads;
    for (size_t i = 0; i < ts.size(); ++i)
        if (mds_mentions_lock(ts[i].mds, interp))
            return "thread " + std::to_string(i) + " has modes on a lock variable";

    for (const auto& [k, sets] : interp) {
        (void)sets;
        if (ev_lock(gc.mem.get_lock(k))) {
            size_t holders = 0, holder = 0;
            for (size_t i = 0; i < ts.size(); ++i)
                if (lock_held_mds_correct(ts[i].mds, k, interp)) { holders++; holder = i; }
            if (holders != 1)
                return "lock " + k + " held in memory but " + std::to_string(holders) +
                       " threads have holder-consistent modes";
            for (size_t j = 0; j < ts.size(); ++j)
                if (j != holder && !lock_not_held_mds_correct(ts[j].mds, k, interp))
                    return "lock " + k + ": thread " + std::to_string(j) +
                           " lacks non-holder-consistent modes";
        } else {
            for (size_t i = 0; i < ts.size(); ++i)
                if (!lock_not_held_mds_correct(ts[i].mds, k, interp))
                    return "lock " + k + " free but thread " + std::to_string(i) +
                           " lacks non-holder-consistent modes";
        }
    }

    std::set<std::string> managed_no_w, managed_no_rw;
    for (const auto& [k, sets] : interp) {
        (void)k;
        managed_no_w.insert(sets.no_w.begin(), sets.no_w.end());
        managed_no_rw.insert(sets.no_rw.begin(), sets.no_rw.end());
    }
    for (const auto& [x, cls] : policy.vars()) {
        (void)cls;
        for (size_t i = 0; i < ts.size(); ++i) {
            if (!managed_no_rw.count(x) && ts[i].mds.asm_no_rw.count(x))
                for (size_t j = 0; j < ts.size(); ++j)
                    if (j != i && !ts[j].mds.guar_no_rw.count(x))
                        return "unmanaged " + x + ": assumption by thread " + std::to_string(i) +
                               " unmatched by thread " + std::to_string(j);
            if (!managed_no_w.count(x) && ts[i].mds.asm_no_w.count(x))
                for (size_t j = 0; j < ts.size(); ++j)
                    if (j != i && !ts[j].mds.guar_no_w.count(x))
                        return "unmanaged " + x + ": assumption by thread " + std::to_string(i) +
                               " unmatched by thread " + std::to_string(j);
        }
    }

    // Mode compatibility, asserted directly as well.
    for (size_t i = 0; i < ts.size(); ++i) {
        for (const auto& x : ts[i].mds.asm_no_rw)
            for (size_t j = 0; j < ts.size(); ++j)
                if (j != i && !ts[j].mds.guar_no_rw.count(x))
                    return "incompatible modes on " + x;
        for (const auto& x : ts[i].mds.asm_no_w)
            for (size_t j = 0; j < ts.size(); ++j)
                if (j != i && !ts[j].mds.guar_no_w.count(x))
                    return "incompatible modes on " + x;
    }
    return std::nullopt;
}

} // namespace detail

struct ScheduleSpec {
    bool exhaustive = true;
    size_t max_len = 8;
    std::vector<Schedule> seeded;  // used when !exhaustive
    uint64_t seed = 0;

    nlohmann::json to_json() const {
        if (exhaustive) return {{"schedules", "exhaustive"}, {"max_len", max_len}};
        return {{"schedules", seeded.size()},
                {"max_len", seeded.empty() ? 0 : seeded.front().size()},
                {"seed", seed}};
    }
};

// Global modes compatibility along every explored schedule: a held lock has
// exactly one holder-consistent thread, free locks none, unmanaged
// assumptions are matched by guarantees, and lock variables never carry
// modes.
inline CheckReport check_global_compatibility(const GlobalConf& gc0, const LockInterp& interp,
                                              const ClassificationPolicy& policy,
                                              const ScheduleSpec& spec) {
    CheckReport rep;
    rep.check = "global";
    rep.bounds = spec.to_json();

    auto assert_node = [&](const GlobalConf& gc, const Schedule& prefix) {
        if (auto why = detail::global_compat_violation(gc, interp, policy)) {
            rep.violate({{"schedule", schedule_json(prefix)}, {"predicate", *why}});
            return false;
        }
        return true;
    };

    if (spec.exhaustive) {
        for_each_schedule_prefix(gc0, interp, spec.max_len, assert_node);
    } else {
        for (const Schedule& sched : spec.seeded) {
            GlobalConf gc = gc0;
            Schedule prefix;
            if (!assert_node(gc, prefix)) return rep;
            for (size_t i : sched) {
                step_thread(gc, i, interp);
                prefix.push_back(i);
                if (!assert_node(gc, prefix)) return rep;
            }
        }
    }
    return rep;
}

namespace detail {

inline std::optional<std::string> sys_secure_violation(const GlobalConf& g1, const GlobalConf& g2,
                                                       const ClassificationPolicy& policy) {
    if (g1.threads.size() != g2.threads.size()) return "thread counts diverge";
    for (size_t i = 0; i < g1.threads.size(); ++i)
        if (!(g1.threads[i].mds == g2.threads[i].mds))
            return "mode states diverge at thread " + std::to_string(i);
    for (const Addr& a : policy.declared_addrs()) {
        bool compare;
        if (a.kind == AddrKind::Prog && policy.cset().count(a.name)) {
            compare = true;
        } else {
            bool all_readable = true;
            if (a.kind == AddrKind::Prog)
                for (const auto& t : g1.threads)
                    if (!readable(t.mds, a.name)) { all_readable = false; break; }
            compare = all_readable && policy.dma(g1.mem, a) == Level::Low;
        }
        if (compare && g1.mem.get(a) != g2.mem.get(a))
            return "low-observable disagreement at " + addr_str(a);
    }
    return std::nullopt;
}

} // namespace detail

// Whole-system hyperproperty: paired runs from low-equivalent initial
// memories, driven by the same schedule, agree at every prefix on control
// variables and on Low variables readable by all threads. Determinism makes
// the matching run unique, so the check is a direct two-run comparison.
inline CheckReport check_sys_secure(const std::vector<Thread>& threads0,
                                    const ClassificationPolicy& policy, const LockInterp& interp,
                                    const std::vector<Mem>& init_mems, const ScheduleSpec& spec) {
    CheckReport rep;
    rep.check = "hyper";
    rep.bounds = spec.to_json();
    rep.bounds["init_mems"] = init_mems.size();
    rep.notes.push_back("bisimulation witnesses are existential; this checks the reachable "
                        "low-agreement consequences within bounds");

    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < init_mems.size(); ++i)
        for (size_t j = 0; j < init_mems.size(); ++j) {
            if (!no_locks_held(init_mems[i], interp) || !no_locks_held(init_mems[j], interp))
                continue;
            if (low_eq(policy, init_mems[i], init_mems[j])) pairs.emplace_back(i, j);
        }
    rep.bounds["pairs"] = pairs.size();

    for (auto [i, j] : pairs) {
        GlobalConf g1{threads0, init_mems[i]};
        GlobalConf g2{threads0, init_mems[j]};

        auto fail = [&](const Schedule& prefix, const std::string& why) {
            rep.violate({{"schedule", schedule_json(prefix)},
                         {"pair", {mem_json(init_mems[i]), mem_json(init_mems[j])}},
                         {"pair_index", {i, j}},
                         {"predicate", why}});
        };

        if (spec.exhaustive) {
            // Joint DFS over the schedule tree; both runs take the same step.
            Schedule prefix;
            bool violated = false;
            std::function<void(const GlobalConf&, const GlobalConf&)> rec =
                [&](const GlobalConf& a, const GlobalConf& b) {
                    if (violated) return;
                    if (auto why = detail::sys_secure_violation(a, b, policy)) {
                        fail(prefix, *why);
                        violated = true;
                        return;
                    }
                    if (prefix.size() >= spec.max_len) return;
                    for (size_t t = 0; t < a.threads.size(); ++t) {
                        GlobalConf a2 = a, b2 = b;
                        step_thread(a2, t, interp);
                        step_thread(b2, t, interp);
                        prefix.push_back(t);
                        rec(a2, b2);
                        prefix.pop_back();
                        if (violated) return;
                    }
                };
            rec(g1, g2);
            if (violated) return rep;
        } else {
            for (const Schedule& sched : spec.seeded) {
                GlobalConf a = g1, b = g2;
                Schedule prefix;
                if (auto why = detail::sys_secure_violation(a, b, policy)) {
                    fail(prefix, *why);
                    return rep;
                }
                for (size_t t : sched) {
                    step_thread(a, t, interp);
                    step_thread(b, t, interp);
                    prefix.push_back(t);
                    if (auto why = detail::sys_secure_violation(a, b, policy)) {
                        fail(prefix, *why);
                        return rep;
                    }
                }
            }
        }
    }
    return rep;
}

enum class HavocKind { Refinement, Coupling };

// Closure under environment interference, sampled: seeded perturbations of
// writable variables are injected between steps and the enclosing check's
// assertions are re-run. Refinement havoc writes identically to both sides;
// coupling havoc preserves observational equivalence while letting
// unobservable variables diverge.
inline CheckReport check_havoc_closure(HavocKind kind, const CmdPtr& c,
                                       const CompileOutput& output,
                                       const std::shared_ptr<const RiscProgram>& prog,
                                       const std::vector<Mem>& init_mems_or_firsts,
                                       const std::vector<Mem>& seconds, const ModeState& mds0,
                                       const LockInterp& interp,
                                       const ClassificationPolicy& policy, size_t samples,
                                       uint64_t seed, size_t max_steps,
                                       int num_regs = default_register_count) {
    CheckReport rep;
    rep.check = kind == HavocKind::Refinement ? "havoc-refine" : "havoc-coupling";
    rep.bounds = {{"samples", samples}, {"seed", seed}, {"max_steps", max_steps}};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> val_pick(0, 2);

    auto perturb_identically = [&](Mem& a, Mem& b, const ModeState& mds) {
        auto cands = detail::havoc_candidates(mds, policy);
        if (cands.empty()) return;
        std::uniform_int_distribution<size_t> pick(0, cands.size() - 1);
        const std::string& v = cands[pick(rng)];
        Value val{val_pick(rng)};
        a.set_var(v, val);
        b.set_var(v, val);
        // A perturbed control variable reclassifies its dependents; rewrite
        // them identically so observational equivalence is preserved rather
        // than manufactured away.
        for (const auto& [u, cls] : policy.vars()) {
            (void)cls;
            if (policy.cvars(u).count(v)) {
                Value uv{val_pick(rng)};
                a.set_var(u, uv);
                b.set_var(u, uv);
            }
        }
    };

    if (kind == HavocKind::Refinement) {
        for (size_t mi = 0; mi < init_mems_or_firsts.size(); ++mi) {
            WhileConf w{c, mds0, init_mems_or_firsts[mi]};
            RiscConf r = make_risc_conf(prog, num_regs, mds0, init_mems_or_firsts[mi]);
            size_t injected = 0;
            for (size_t step = 0; step < max_steps && !stops(r); ++step) {
                if (injected < samples) {
                    perturb_identically(w.mem, r.mem, r.mds);
                    ++injected;
                }
                int n = abs_steps(w, r);
                r = step_risc(r, interp).first;
                for (int k = 0; k < n; ++k) {
                    if (is_stop(w.cmd)) break;
                    w = step_while(w, interp).first;
                }
                const CompRec& rec = detail::record_at(output, r.pc);
                if (!(w.mds == r.mds) || !(w.mem == r.mem) ||
                    !regrec_mem_consistent(rec.regrec, r.regs, r.mem) ||
                    !asmrec_mds_consistent(rec.asmrec, r.mds)) {
                    rep.violate({{"init_index", mi},
                                 {"step", step},
                                 {"perturbations", injected},
                                 {"predicate", "refinement invariant lost under havoc"}});
                    return rep;
                }
            }
        }
        return rep;
    }

    // Coupling: paired machine runs with equivalence-preserving havoc.
    for (size_t pi = 0; pi < init_mems_or_firsts.size() && pi < seconds.size(); ++pi) {
        WhileConf w1{c, mds0, init_mems_or_firsts[pi]};
        WhileConf w2{c, mds0, seconds[pi]};
        RiscConf r1 = make_risc_conf(prog, num_regs, mds0, init_mems_or_firsts[pi]);
        RiscConf r2 = make_risc_conf(prog, num_regs, mds0, seconds[pi]);
        size_t injected = 0;
        for (size_t step = 0; step < max_steps; ++step) {
            if (stops(r1) != stops(r2)) {
                rep.violate({{"pair_index", pi}, {"step", step},
                             {"predicate", "stopping behaviour diverges under havoc"}});
                return rep;
            }
            if (stops(r1)) break;
            if (injected < samples) {
                auto cands = detail::havoc_candidates(r1.mds, policy);
                if (!cands.empty()) {
                    std::uniform_int_distribution<size_t> pick(0, cands.size() - 1);
                    const std::string& v = cands[pick(rng)];
                    bool observed = policy.cset().count(v) ||
                                    (policy.dma_var(r1.mem, v) == Level::Low && readable(r1.mds, v));
                    Value val1{val_pick(rng)};
                    Value val2 = observed ? val1 : Value{val_pick(rng)};
                    for (Mem* m : {&w1.mem, &r1.mem}) m->set_var(v, val1);
                    for (Mem* m : {&w2.mem, &r2.mem}) m->set_var(v, val2);
                    if (policy.cset().count(v)) {
                        for (const auto& [u, cls] : policy.vars()) {
                            (void)cls;
                            if (policy.cvars(u).count(v)) {
                                Value uv{val_pick(rng)};
                                for (Mem* m : {&w1.mem, &r1.mem, &w2.mem, &r2.mem})
                                    m->set_var(u, uv);
                            }
                        }
                    }
                    ++injected;
                }
            }
            if (r1.pc != r2.pc || !(r1.mds == r2.mds) ||
                abs_steps(w1, r1) != abs_steps(w2, r2) ||
                !low_eq_mod_modes(policy, r1.mds, r1.mem, r2.mem)) {
                rep.violate({{"pair_index", pi}, {"step", step}, {"perturbations", injected},
                             {"predicate", "coupling invariant lost under havoc"}});
                return rep;
            }
            int n = abs_steps(w1, r1);
            for (int k = 0; k < n; ++k) {
                if (is_stop(w1.cmd) || is_stop(w2.cmd)) break;
                w1 = step_while(w1, interp).first;
                w2 = step_while(w2, interp).first;
            }
            r1 = step_risc(r1, interp).first;
            r2 = step_risc(r2, interp).first;
        }
    }
    return rep;
}

} // namespace wrc
