#pragma once

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "wrc/cmd.hpp"
#include "wrc/risc.hpp"
#include "wrc/while_step.hpp"

namespace wrc {

// One thread's private state: a source command, or a machine image.
struct WhilePriv {
    CmdPtr cmd;
};
struct RiscPriv {
    size_t pc = 0;
    std::shared_ptr<const RiscProgram> prog;
    std::vector<Value> regs;
};

struct Thread {
    std::variant<WhilePriv, RiscPriv> priv;
    ModeState mds;

    bool stopped() const {
        if (auto* w = std::get_if<WhilePriv>(&priv)) return is_stop(w->cmd);
        const auto& r = std::get<RiscPriv>(priv);
        return r.pc >= r.prog->size();
    }
};

inline Thread while_thread(CmdPtr cmd, ModeState mds) {
    return Thread{WhilePriv{std::move(cmd)}, std::move(mds)};
}
inline Thread risc_thread(std::shared_ptr<const RiscProgram> prog, int num_regs, ModeState mds) {
    RiscPriv p;
    p.prog = std::move(prog);
    p.regs.assign(static_cast<size_t>(num_regs), Value{0});
    return Thread{std::move(p), std::move(mds)};
}

// All threads share one memory.
struct GlobalConf {
    std::vector<Thread> threads;
    Mem mem;
};

using Schedule = std::vector<size_t>;

// Steps thread i once, in place. A stopped thread contributes a stutter so
// every schedule is total.
inline Footprint step_thread(GlobalConf& gc, size_t i, const LockInterp& interp) {
    if (i >= gc.threads.size()) throw std::out_of_range("schedule index out of range");
    Thread& t = gc.threads[i];
    if (t.stopped()) return {};
    if (auto* w = std::get_if<WhilePriv>(&t.priv)) {
        auto [conf, fp] = step_while({w->cmd, t.mds, gc.mem}, interp);
        w->cmd = conf.cmd;
        t.mds = conf.mds;
        gc.mem = conf.mem;
        return fp;
    }
    auto& r = std::get<RiscPriv>(t.priv);
    RiscConf conf{r.pc, r.prog, r.regs, t.mds, gc.mem};
    auto [next, fp] = step_risc(conf, interp);
    r.pc = next.pc;
    r.regs = next.regs;
    t.mds = next.mds;
    gc.mem = next.mem;
    return fp;
}

inline GlobalConf run_schedule(GlobalConf gc, const Schedule& sched, const LockInterp& interp) {
    for (size_t i : sched) step_thread(gc, i, interp);
    return gc;
}

// Depth-first walk over every schedule of length <= max_len. The visitor
// sees each reachable node together with the schedule prefix that produced
// it (including the empty prefix); returning false prunes the subtree.
inline void for_each_schedule_prefix(const GlobalConf& gc0, const LockInterp& interp,
                                     size_t max_len,
                                     const std::function<bool(const GlobalConf&, const Schedule&)>& visit) {
    Schedule prefix;
    std::function<void(const GlobalConf&)> rec = [&](const GlobalConf& gc) {
        if (!visit(gc, prefix)) return;
        if (prefix.size() >= max_len) return;
        for (size_t i = 0; i < gc.threads.size(); ++i) {
            GlobalConf next = gc;
            step_thread(next, i, interp);
            prefix.push_back(i);
            rec(next);
            prefix.pop_back();
        }
    };
    rec(gc0);
}

inline Schedule random_schedule(std::mt19937_64& rng, size_t len, size_t num_threads) {
    std::uniform_int_distribution<size_t> pick(0, num_threads - 1);
    Schedule s(len);
    for (auto& x : s) x = pick(rng);
    return s;
}

inline std::vector<Schedule> seeded_schedules(uint64_t seed, size_t count, size_t len,
                                              size_t num_threads) {
    std::mt19937_64 rng(seed);
    std::vector<Schedule> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) out.push_back(random_schedule(rng, len, num_threads));
    return out;
}

} // namespace wrc
