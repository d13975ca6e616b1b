#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wrc/compile.hpp"
#include "wrc/parse.hpp"
#include "wrc/risc.hpp"

namespace wrc {

inline std::string reg_str(Reg r) { return "r" + std::to_string(r); }
inline std::string label_str(Label l) { return "L" + std::to_string(l); }

inline std::string instr_str(const Instr& in) {
    if (auto* ld = std::get_if<LoadInstr>(&in.node))
        return "Load " + reg_str(ld->reg) + " " + ld->var;
    if (auto* st = std::get_if<StoreInstr>(&in.node))
        return "Store " + st->var + " " + reg_str(st->reg);
    if (auto* j = std::get_if<JmpInstr>(&in.node)) return "Jmp " + label_str(j->target);
    if (auto* jz = std::get_if<JzInstr>(&in.node))
        return "Jz " + label_str(jz->target) + " " + reg_str(jz->reg);
    if (std::holds_alternative<NopInstr>(in.node)) return "Nop";
    if (auto* mk = std::get_if<MoveKInstr>(&in.node))
        return "MoveK " + reg_str(mk->reg) + " " + std::to_string(mk->val.v);
    if (auto* mr = std::get_if<MoveRInstr>(&in.node))
        return "MoveR " + reg_str(mr->dst) + " " + reg_str(mr->src);
    if (auto* op = std::get_if<OpInstr>(&in.node))
        return std::string("Op ") + op_name(op->op) + " " + reg_str(op->dst) + " " +
               reg_str(op->src);
    if (auto* acq = std::get_if<LockAcqInstr>(&in.node)) return "LockAcq " + acq->lock;
    return "LockRel " + std::get<LockRelInstr>(in.node).lock;
}

// One instruction per line, `Ln:` prefixes for labels, directives for the
// register-bank size and the dangling exit label.
inline std::string program_listing(const RiscProgram& prog, int num_regs = default_register_count) {
    std::string out = ".registers " + std::to_string(num_regs) + "\n";
    if (prog.exit_label) out += ".exit " + label_str(*prog.exit_label) + "\n";
    for (const auto& [lab, instr] : prog.code) {
        if (lab) out += label_str(*lab) + ": ";
        out += instr_str(instr) + "\n";
    }
    return out;
}

namespace detail {

inline Reg parse_reg(const std::string& tok, int line_no) {
    if (tok.size() < 2 || tok[0] != 'r')
        throw ParseError("expected register, found '" + tok + "'", line_no, 1);
    return std::stoi(tok.substr(1));
}

inline Label parse_label_tok(const std::string& tok, int line_no) {
    if (tok.size() < 2 || tok[0] != 'L')
        throw ParseError("expected label, found '" + tok + "'", line_no, 1);
    return std::stoull(tok.substr(1));
}

inline Instr parse_instr_tokens(const std::vector<std::string>& t, int line_no) {
    auto need = [&](size_t n) {
        if (t.size() != n)
            throw ParseError("wrong operand count for '" + t[0] + "'", line_no, 1);
    };
    if (t[0] == "Load")  { need(3); return Instr{LoadInstr{parse_reg(t[1], line_no), t[2]}}; }
    if (t[0] == "Store") { need(3); return Instr{StoreInstr{t[1], parse_reg(t[2], line_no)}}; }
    if (t[0] == "Jmp")   { need(2); return Instr{JmpInstr{parse_label_tok(t[1], line_no)}}; }
    if (t[0] == "Jz") {
        need(3);
        return Instr{JzInstr{parse_label_tok(t[1], line_no), parse_reg(t[2], line_no)}};
    }
    if (t[0] == "Nop")   { need(1); return Instr{NopInstr{}}; }
    if (t[0] == "MoveK") { need(3); return Instr{MoveKInstr{parse_reg(t[1], line_no), Value{std::stoll(t[2])}}}; }
    if (t[0] == "MoveR") { need(3); return Instr{MoveRInstr{parse_reg(t[1], line_no), parse_reg(t[2], line_no)}}; }
    if (t[0] == "Op") {
        need(4);
        BinOp op;
        if (!op_from_name(t[1], op))
            throw ParseError("unknown operator '" + t[1] + "'", line_no, 1);
        return Instr{OpInstr{op, parse_reg(t[2], line_no), parse_reg(t[3], line_no)}};
    }
    if (t[0] == "LockAcq") { need(2); return Instr{LockAcqInstr{t[1]}}; }
    if (t[0] == "LockRel") { need(2); return Instr{LockRelInstr{t[1]}}; }
    throw ParseError("unknown instruction '" + t[0] + "'", line_no, 1);
}

} // namespace detail

struct ParsedListing {
    RiscProgram program;
    int num_regs = default_register_count;
};

inline ParsedListing parse_listing(const std::string& text) {
    ParsedListing out;
    CompileOutput shim;  // reuse finalize for label-map construction
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string tok;
        while (ls >> tok) toks.push_back(tok);
        if (toks.empty()) continue;
        if (toks[0] == ".registers") {
            if (toks.size() != 2) throw ParseError("bad .registers directive", line_no, 1);
            out.num_regs = std::stoi(toks[1]);
            continue;
        }
        if (toks[0] == ".exit") {
            if (toks.size() != 2) throw ParseError("bad .exit directive", line_no, 1);
            shim.exit_label = detail::parse_label_tok(toks[1], line_no);
            continue;
        }
        std::optional<Label> lab;
        if (toks[0].size() > 1 && toks[0].front() == 'L' && toks[0].back() == ':') {
            lab = detail::parse_label_tok(toks[0].substr(0, toks[0].size() - 1), line_no);
            toks.erase(toks.begin());
            if (toks.empty()) throw ParseError("label without instruction", line_no, 1);
        }
        shim.annotated.push_back({lab, detail::parse_instr_tokens(toks, line_no), CompRec{}});
    }
    out.program = finalize(shim);
    return out;
}

// Annotated JSON: the external form consumed by the consistency checker.
inline nlohmann::json asmrec_json(const AsmRec& s) {
    nlohmann::json j;
    j["no_w"] = s.no_w;
    j["no_rw"] = s.no_rw;
    return j;
}

inline nlohmann::json regrec_json(const RegRec& r) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [reg, e] : r) j[reg_str(reg)] = expr_str(e);
    return j;
}

inline nlohmann::json comprec_json(const CompRec& c) {
    return nlohmann::json{{"regrec", regrec_json(c.regrec)}, {"asmrec", asmrec_json(c.asmrec)}};
}

inline nlohmann::json compile_output_json(const CompileOutput& out,
                                          int num_regs = default_register_count) {
    nlohmann::json j;
    j["format"] = "wrc-risc-1";
    j["registers"] = num_regs;
    j["failed"] = out.failed;
    if (out.failed) {
        j["reason"] = out.fail_reason;
        return j;
    }
    if (out.exit_label)
        j["exit_label"] = *out.exit_label;
    else
        j["exit_label"] = nullptr;
    j["next_label"] = out.next_label;
    nlohmann::json instrs = nlohmann::json::array();
    for (const auto& ai : out.annotated) {
        nlohmann::json ij;
        if (ai.label)
            ij["label"] = *ai.label;
        else
            ij["label"] = nullptr;
        ij["instr"] = instr_str(ai.instr);
        ij["regrec"] = regrec_json(ai.rec.regrec);
        ij["asmrec"] = asmrec_json(ai.rec.asmrec);
        instrs.push_back(std::move(ij));
    }
    j["instructions"] = std::move(instrs);
    j["final"] = comprec_json(out.final_rec);
    return j;
}

inline CompRec comprec_from_json(const nlohmann::json& j) {
    CompRec rec;
    for (auto it = j.at("regrec").begin(); it != j.at("regrec").end(); ++it)
        rec.regrec[std::stoi(it.key().substr(1))] = parse_expr_text(it.value().get<std::string>());
    for (const auto& v : j.at("asmrec").at("no_w")) rec.asmrec.no_w.insert(v.get<std::string>());
    for (const auto& v : j.at("asmrec").at("no_rw")) rec.asmrec.no_rw.insert(v.get<std::string>());
    return rec;
}

inline CompileOutput compile_output_from_json(const nlohmann::json& j) {
    CompileOutput out;
    out.failed = j.at("failed").get<bool>();
    if (out.failed) {
        out.fail_reason = j.value("reason", "");
        return out;
    }
    if (!j.at("exit_label").is_null()) out.exit_label = j.at("exit_label").get<Label>();
    out.next_label = j.at("next_label").get<Label>();
    for (const auto& ij : j.at("instructions")) {
        AnnotatedInstr ai;
        if (!ij.at("label").is_null()) ai.label = ij.at("label").get<Label>();
        std::istringstream ls(ij.at("instr").get<std::string>());
        std::vector<std::string> toks;
        std::string tok;
        while (ls >> tok) toks.push_back(tok);
        ai.instr = detail::parse_instr_tokens(toks, 0);
        CompRec rec = comprec_from_json(ij);
        ai.rec = std::move(rec);
        out.annotated.push_back(std::move(ai));
    }
    out.final_rec = comprec_from_json(j.at("final"));
    return out;
}

} // namespace wrc
