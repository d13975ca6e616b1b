#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wrc/parse.hpp"
#include "wrc/policy_io.hpp"

namespace wrc {

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One modelled system: per-thread source files, the classification policy
// and locking discipline they were written against, and the verdicts the
// checks are expected to reproduce at the stated bounds.
struct CorpusEntry {
    std::string name;
    std::filesystem::path dir;
    PolicyFile pf;
    std::vector<std::pair<std::string, CmdPtr>> threads;  // filename, parsed program
    nlohmann::json manifest;

    std::string expected(const std::string& check) const {
        if (manifest.contains("expected") && manifest["expected"].contains(check))
            return manifest["expected"][check].get<std::string>();
        return "ok";
    }
    nlohmann::json bounds() const {
        return manifest.value("bounds", nlohmann::json::object());
    }
};

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw CorpusError("cannot open " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline CorpusEntry load_corpus_entry(const std::filesystem::path& dir) {
    CorpusEntry e;
    e.dir = dir;
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw CorpusError("missing manifest.json in " + dir.string());
    mf >> e.manifest;
    e.name = e.manifest.value("name", dir.filename().string());

    std::string policy_file = e.manifest.value("policy", std::string("policy.json"));
    e.pf = load_policy_file((dir / policy_file).string());

    auto viols = check_lock_discipline(e.pf.interp, e.pf.policy);
    bool discipline_expected_ok = e.expected("discipline") == "ok";
    if (!viols.empty() && discipline_expected_ok) {
        std::string msg = "lock discipline violations in " + e.name + ":";
        for (const auto& v : viols)
            msg += "\n  restriction " + std::to_string(v.restriction) + ": " + v.detail;
        throw CorpusError(msg);
    }

    if (!e.manifest.contains("threads"))
        throw CorpusError("manifest for " + e.name + " lists no threads");
    for (const auto& t : e.manifest["threads"]) {
        std::string fname = t.get<std::string>();
        try {
            e.threads.emplace_back(fname, parse(read_text_file(dir / fname)));
        } catch (const ParseError& pe) {
            throw CorpusError(e.name + "/" + fname + ": " + pe.what());
        }
    }
    return e;
}

inline std::vector<CorpusEntry> load_corpus(const std::filesystem::path& root) {
    std::vector<CorpusEntry> out;
    if (!std::filesystem::is_directory(root))
        throw CorpusError("corpus directory not found: " + root.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.json"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(load_corpus_entry(d));
    return out;
}

} // namespace wrc
