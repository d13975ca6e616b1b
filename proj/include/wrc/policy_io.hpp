#pragma once

#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "wrc/mem.hpp"
#include "wrc/policy.hpp"

namespace wrc {

struct PolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Declared initial-memory constraints: enumerated variables range over their
// listed values during checking; everything else starts at its fixed value
// (default 0). Locks always start free.
struct InitSpec {
    std::map<std::string, std::vector<Value>> enumerated;
    std::map<std::string, Value> fixed;
};

struct PolicyFile {
    ClassificationPolicy policy;
    LockInterp interp;
    InitSpec init;
};

// Schema:
//   {
//     "variables": { name: {"class": "low"|"high"} |
//                          {"class": "valuedep", "control": name,
//                           "low_values": [int,...]} , ... },
//     "locks":     { name: {"no_w": [names], "no_rw": [names]}, ... },
//     "init":      { "enumerate": { name: [int,...] },
//                    "fixed": { name: int } }            (optional)
//   }
inline PolicyFile policy_from_json(const nlohmann::json& j) {
    PolicyFile pf;

    if (!j.contains("variables") || !j["variables"].is_object())
        throw PolicyError("policy: missing 'variables' object");

    for (auto it = j["variables"].begin(); it != j["variables"].end(); ++it) {
        const std::string& name = it.key();
        const auto& spec = it.value();
        std::string cls = spec.at("class").get<std::string>();
        if (cls == "low") {
            pf.policy.declare_static(name, Level::Low);
        } else if (cls == "high") {
            pf.policy.declare_static(name, Level::High);
        } else if (cls == "valuedep") {
            std::set<Value> lows;
            for (const auto& v : spec.at("low_values")) lows.insert(Value{v.get<int64_t>()});
            pf.policy.declare_value_dep(name, spec.at("control").get<std::string>(), lows);
        } else {
            throw PolicyError("policy: variable " + name + " has unknown class '" + cls + "'");
        }
    }

    std::set<std::string> lock_names;
    if (j.contains("locks")) {
        for (auto it = j["locks"].begin(); it != j["locks"].end(); ++it) {
            LockSets sets;
            for (const auto& v : it.value().value("no_w", nlohmann::json::array()))
                sets.no_w.insert(v.get<std::string>());
            for (const auto& v : it.value().value("no_rw", nlohmann::json::array()))
                sets.no_rw.insert(v.get<std::string>());
            pf.interp[it.key()] = std::move(sets);
            lock_names.insert(it.key());
        }
    }
    pf.policy.declare_locks(lock_names);

    // Well-formedness of value-dependent classifications.
    for (const auto& [v, c] : pf.policy.vars()) {
        if (!c.value_dep) continue;
        if (!pf.policy.is_declared(c.control))
            throw PolicyError("policy: control variable " + c.control + " of " + v +
                              " is not declared");
        const VarClass& ctrl = pf.policy.vars().at(c.control);
        if (ctrl.value_dep || ctrl.static_level != Level::Low)
            throw PolicyError("policy: control variable " + c.control +
                              " must be statically Low");
    }
    for (const auto& k : lock_names)
        if (pf.policy.is_declared(k))
            throw PolicyError("policy: name " + k + " declared as both variable and lock");

    if (j.contains("init")) {
        const auto& init = j["init"];
        if (init.contains("enumerate"))
            for (auto it = init["enumerate"].begin(); it != init["enumerate"].end(); ++it) {
                if (!pf.policy.is_declared(it.key()))
                    throw PolicyError("policy: init.enumerate names undeclared variable " + it.key());
                std::vector<Value> vals;
                for (const auto& v : it.value()) vals.push_back(Value{v.get<int64_t>()});
                pf.init.enumerated[it.key()] = std::move(vals);
            }
        if (init.contains("fixed"))
            for (auto it = init["fixed"].begin(); it != init["fixed"].end(); ++it) {
                if (!pf.policy.is_declared(it.key()))
                    throw PolicyError("policy: init.fixed names undeclared variable " + it.key());
                pf.init.fixed[it.key()] = Value{it.value().get<int64_t>()};
            }
    }
    return pf;
}

inline PolicyFile load_policy_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PolicyError("cannot open policy file: " + path);
    nlohmann::json j;
    f >> j;
    return policy_from_json(j);
}

// Every memory over the enumerated domain (fixed values elsewhere, locks
// free). The enumeration order is deterministic.
inline std::vector<Mem> enumerate_init_mems(const InitSpec& init) {
    std::vector<Mem> out;
    Mem base;
    for (const auto& [v, val] : init.fixed) base.set_var(v, val);

    std::vector<std::pair<std::string, std::vector<Value>>> dims(init.enumerated.begin(),
                                                                 init.enumerated.end());
    std::vector<size_t> idx(dims.size(), 0);
    for (;;) {
        Mem m = base;
        for (size_t i = 0; i < dims.size(); ++i) m.set_var(dims[i].first, dims[i].second[idx[i]]);
        out.push_back(std::move(m));
        size_t i = 0;
        for (; i < dims.size(); ++i) {
            if (++idx[i] < dims[i].second.size()) break;
            idx[i] = 0;
        }
        if (i == dims.size()) break;
    }
    return out;
}

} // namespace wrc
