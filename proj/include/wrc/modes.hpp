#pragma once

#include <set>
#include <stdexcept>
#include <string>

namespace wrc {

// Assume/guarantee modes. A thread either assumes it alone may write (or
// read and write) a variable, or guarantees the corresponding restraint to
// the other threads.
enum class Mode { AsmNoW, AsmNoRW, GuarNoW, GuarNoRW };

// Ghost synchronisation state: one set of program-variable names per mode.
// Lock variables never appear here.
struct ModeState {
    std::set<std::string> asm_no_w;
    std::set<std::string> asm_no_rw;
    std::set<std::string> guar_no_w;
    std::set<std::string> guar_no_rw;

    const std::set<std::string>& get(Mode m) const {
        switch (m) {
        case Mode::AsmNoW:   return asm_no_w;
        case Mode::AsmNoRW:  return asm_no_rw;
        case Mode::GuarNoW:  return guar_no_w;
        case Mode::GuarNoRW: return guar_no_rw;
        }
        throw std::logic_error("ModeState::get: bad mode");
    }
    std::set<std::string>& get(Mode m) {
        return const_cast<std::set<std::string>&>(
            static_cast<const ModeState*>(this)->get(m));
    }

    friend bool operator==(const ModeState&, const ModeState&) = default;
};

inline bool readable(const ModeState& mds, const std::string& x) {
    return !mds.asm_no_rw.count(x);
}

inline bool writable(const ModeState& mds, const std::string& x) {
    return !mds.asm_no_w.count(x) && !mds.asm_no_rw.count(x);
}

} // namespace wrc
