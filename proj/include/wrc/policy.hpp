#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrc/mem.hpp"
#include "wrc/modes.hpp"
#include "wrc/value.hpp"

namespace wrc {

enum class Level { Low, High };

inline const char* level_name(Level l) { return l == Level::High ? "High" : "Low"; }

struct UnknownVariable : std::runtime_error {
    explicit UnknownVariable(const std::string& v)
        : std::runtime_error("unknown program variable: " + v) {}
};
struct UnknownLock : std::runtime_error {
    explicit UnknownLock(const std::string& k)
        : std::runtime_error("unknown lock: " + k) {}
};

// Per-variable sensitivity: fixed, or dependent on the current value of a
// control variable (Low exactly when that value is in low_values).
struct VarClass {
    Level static_level = Level::Low;
    bool value_dep = false;
    std::string control;
    std::set<Value> low_values;
};

// Which program variables each lock protects: exclusive write (no_w) or
// exclusive read-write (no_rw) while held.
struct LockSets {
    std::set<std::string> no_w;
    std::set<std::string> no_rw;

    bool governs(const std::string& v) const { return no_w.count(v) || no_rw.count(v); }
    std::set<std::string> all() const {
        std::set<std::string> s = no_w;
        s.insert(no_rw.begin(), no_rw.end());
        return s;
    }
};

using LockInterp = std::map<std::string, LockSets>;

inline bool lock_governed(const LockInterp& interp, const std::string& v) {
    for (const auto& [k, sets] : interp)
        if (sets.governs(v)) return true;
    return false;
}

// Classification policy over the declared program variables, plus the names
// of the declared locks (lock variables are Low at all times).
class ClassificationPolicy {
public:
    ClassificationPolicy() = default;

    void declare_static(const std::string& v, Level l) {
        VarClass c;
        c.static_level = l;
        vars_[v] = c;
        rebuild();
    }
    void declare_value_dep(const std::string& v, const std::string& control,
                           std::set<Value> low_values) {
        VarClass c;
        c.value_dep = true;
        c.control = control;
        c.low_values = std::move(low_values);
        vars_[v] = c;
        rebuild();
    }
    void declare_locks(const std::set<std::string>& locks) {
        locks_ = locks;
    }

    bool is_declared(const std::string& v) const { return vars_.count(v) != 0; }
    bool is_lock(const std::string& k) const { return locks_.count(k) != 0; }

    const std::map<std::string, VarClass>& vars() const { return vars_; }
    const std::set<std::string>& locks() const { return locks_; }

    // Control variables of x: the variables whose value determines x's
    // classification.
    const std::set<std::string>& cvars(const std::string& x) const {
        static const std::set<std::string> empty;
        auto it = cvars_.find(x);
        return it == cvars_.end() ? empty : it->second;
    }
    const std::set<std::string>& cset() const { return cset_; }

    Level dma(const Mem& mem, const Addr& a) const {
        if (a.kind == AddrKind::Lock) return Level::Low;
        auto it = vars_.find(a.name);
        if (it == vars_.end()) throw UnknownVariable(a.name);
        const VarClass& c = it->second;
        if (!c.value_dep) return c.static_level;
        return c.low_values.count(mem.get_var(c.control)) ? Level::Low : Level::High;
    }
    Level dma_var(const Mem& mem, const std::string& v) const { return dma(mem, prog_var(v)); }

    // All addresses the equivalence predicates quantify over.
    std::vector<Addr> declared_addrs() const {
        std::vector<Addr> out;
        for (const auto& [v, _] : vars_) out.push_back(prog_var(v));
        for (const auto& k : locks_) out.push_back(lock_var(k));
        return out;
    }

private:
    void rebuild() {
        cset_.clear();
        cvars_.clear();
        for (const auto& [v, c] : vars_) {
            if (c.value_dep) {
                cvars_[v].insert(c.control);
                cset_.insert(c.control);
            }
        }
    }

    std::map<std::string, VarClass> vars_;
    std::set<std::string> locks_;
    std::set<std::string> cset_;
    std::map<std::string, std::set<std::string>> cvars_;
};

inline Level dma(const ClassificationPolicy& policy, const Mem& mem, const Addr& a) {
    return policy.dma(mem, a);
}

// Observational equivalence for whole-system quantification: agreement on
// every address that mem1 classifies Low.
inline bool low_eq(const ClassificationPolicy& policy, const Mem& m1, const Mem& m2) {
    for (const Addr& a : policy.declared_addrs()) {
        if (policy.dma(m1, a) == Level::Low && m1.get(a) != m2.get(a)) return false;
    }
    return true;
}

// Per-thread equivalence, relaxed by the mode state: control variables are
// always compared; other Low variables only while readable.
inline bool low_eq_mod_modes(const ClassificationPolicy& policy, const ModeState& mds,
                             const Mem& m1, const Mem& m2) {
    for (const Addr& a : policy.declared_addrs()) {
        bool compare;
        if (a.kind == AddrKind::Prog && policy.cset().count(a.name)) {
            compare = true;
        } else {
            bool rd = a.kind == AddrKind::Lock ? true : readable(mds, a.name);
            compare = policy.dma(m1, a) == Level::Low && rd;
        }
        if (compare && m1.get(a) != m2.get(a)) return false;
    }
    return true;
}

struct DisciplineViolation {
    int restriction;     // 1..7
    std::string detail;
};

// Cleanliness conditions on a locking discipline. Returns every violation
// found rather than stopping at the first.
inline std::vector<DisciplineViolation>
check_lock_discipline(const LockInterp& interp, const ClassificationPolicy& policy) {
    std::vector<DisciplineViolation> out;

    for (const auto& [k, sets] : interp) {
        // 1: locks govern program variables only; governed names must not
        // collide with the lock namespace and must be declared.
        for (const auto& v : sets.all()) {
            if (policy.is_lock(v) || interp.count(v))
                out.push_back({1, "lock " + k + " governs lock-variable " + v});
            else if (!policy.is_declared(v))
                out.push_back({1, "lock " + k + " governs undeclared variable " + v});
        }
        // 6: no vacuous locks.
        if (sets.no_w.empty() && sets.no_rw.empty())
            out.push_back({6, "lock " + k + " governs no variables"});
        // 7: the two sets of one lock do not overlap.
        for (const auto& v : sets.no_w)
            if (sets.no_rw.count(v))
                out.push_back({7, "lock " + k + " lists " + v + " in both no_w and no_rw"});
    }

    // 2: lock variables cannot be control variables.
    for (const auto& c : policy.cset())
        if (policy.is_lock(c) || interp.count(c))
            out.push_back({2, "lock-variable " + c + " used as a control variable"});

    // 3: lock variables are Low statically. Guaranteed structurally (dma
    // returns Low for every lock address); flag any policy entry that
    // shadows a lock name, since that would make the namespaces ambiguous.
    for (const auto& [k, _] : interp)
        if (policy.is_declared(k))
            out.push_back({3, "name " + k + " declared both as lock and as program variable"});

    // 4: a lock governing v must govern the same kind of access to all of
    // v's control variables.
    for (const auto& [k, sets] : interp) {
        for (const auto& [v, cs] : policy.vars()) {
            (void)cs;
            for (const auto& c : policy.cvars(v)) {
                if ((sets.no_w.count(c) != 0) != (sets.no_w.count(v) != 0))
                    out.push_back({4, "lock " + k + ": no_w covers only one of " + v +
                                          " and its control variable " + c});
                if ((sets.no_rw.count(c) != 0) != (sets.no_rw.count(v) != 0))
                    out.push_back({4, "lock " + k + ": no_rw covers only one of " + v +
                                          " and its control variable " + c});
            }
        }
    }

    // 5: no variable is managed by more than one lock.
    std::map<std::string, std::vector<std::string>> managers;
    for (const auto& [k, sets] : interp)
        for (const auto& v : sets.all()) managers[v].push_back(k);
    for (const auto& [v, ks] : managers)
        if (ks.size() > 1) {
            std::string detail = "variable " + v + " managed by locks:";
            for (const auto& k : ks) detail += " " + k;
            out.push_back({5, detail});
        }

    return out;
}

} // namespace wrc
