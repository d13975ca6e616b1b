#pragma once

#include <compare>
#include <map>
#include <string>

#include "wrc/value.hpp"

namespace wrc {

// Shared addresses come in two disjoint namespaces: program variables,
// touched by ordinary commands, and lock variables, touched only by the
// lock primitives.
enum class AddrKind { Prog, Lock };

struct Addr {
    AddrKind kind;
    std::string name;

    friend bool operator==(const Addr&, const Addr&) = default;
    friend auto operator<=>(const Addr&, const Addr&) = default;
};

inline Addr prog_var(std::string name) { return Addr{AddrKind::Prog, std::move(name)}; }
inline Addr lock_var(std::string name) { return Addr{AddrKind::Lock, std::move(name)}; }

inline std::string addr_str(const Addr& a) {
    return (a.kind == AddrKind::Lock ? "lock:" : "") + a.name;
}

// Shared memory: semantically a total map, with 0 the value of every address
// never written. Entries are normalised (no explicit zeros) so structural
// equality coincides with extensional equality.
class Mem {
public:
    Mem() = default;

    Value get(const Addr& a) const {
        auto it = entries_.find(a);
        return it == entries_.end() ? Value{0} : it->second;
    }
    Value get_var(const std::string& v) const { return get(prog_var(v)); }
    Value get_lock(const std::string& k) const { return get(lock_var(k)); }

    void set(const Addr& a, Value val) {
        if (val == Value{0})
            entries_.erase(a);
        else
            entries_[a] = val;
    }
    void set_var(const std::string& v, Value val) { set(prog_var(v), val); }
    void set_lock(const std::string& k, Value val) { set(lock_var(k), val); }

    const std::map<Addr, Value>& entries() const { return entries_; }

    friend bool operator==(const Mem&, const Mem&) = default;

private:
    std::map<Addr, Value> entries_;
};

} // namespace wrc
