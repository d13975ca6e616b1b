#pragma once

#include <memory>
#include <string>
#include <variant>

#include "wrc/expr.hpp"

namespace wrc {

struct Cmd;
using CmdPtr = std::shared_ptr<const Cmd>;

struct SkipCmd {};
struct StopCmd {};
struct SeqCmd     { CmdPtr first, second; };
struct IfCmd      { ExprPtr cond; CmdPtr then_branch, else_branch; };
struct WhileCmd   { ExprPtr cond; CmdPtr body; };
struct AssignCmd  { std::string var; ExprPtr rhs; };
struct LockAcqCmd { std::string lock; };
struct LockRelCmd { std::string lock; };

// Source command AST. Stop never appears in parsed programs; it arises only
// through evaluation. Nodes are immutable and shared.
struct Cmd {
    std::variant<SkipCmd, SeqCmd, IfCmd, WhileCmd, AssignCmd, LockAcqCmd, LockRelCmd, StopCmd> node;
};

inline CmdPtr c_skip() { return std::make_shared<Cmd>(Cmd{SkipCmd{}}); }
inline CmdPtr c_stop() { return std::make_shared<Cmd>(Cmd{StopCmd{}}); }
inline CmdPtr c_seq(CmdPtr a, CmdPtr b) { return std::make_shared<Cmd>(Cmd{SeqCmd{std::move(a), std::move(b)}}); }
inline CmdPtr c_if(ExprPtr e, CmdPtr t, CmdPtr f) {
    return std::make_shared<Cmd>(Cmd{IfCmd{std::move(e), std::move(t), std::move(f)}});
}
inline CmdPtr c_while(ExprPtr e, CmdPtr body) {
    return std::make_shared<Cmd>(Cmd{WhileCmd{std::move(e), std::move(body)}});
}
inline CmdPtr c_assign(std::string v, ExprPtr e) {
    return std::make_shared<Cmd>(Cmd{AssignCmd{std::move(v), std::move(e)}});
}
inline CmdPtr c_acquire(std::string k) { return std::make_shared<Cmd>(Cmd{LockAcqCmd{std::move(k)}}); }
inline CmdPtr c_release(std::string k) { return std::make_shared<Cmd>(Cmd{LockRelCmd{std::move(k)}}); }

inline bool is_stop(const Cmd& c) { return std::holds_alternative<StopCmd>(c.node); }
inline bool is_stop(const CmdPtr& c) { return is_stop(*c); }

// First command of the ;-spine.
inline const Cmd& leftmost_cmd(const Cmd& c) {
    if (auto* s = std::get_if<SeqCmd>(&c.node)) return leftmost_cmd(*s->first);
    return c;
}
inline const Cmd& leftmost_cmd(const CmdPtr& c) { return leftmost_cmd(*c); }

inline bool cmd_equal(const Cmd& a, const Cmd& b) {
    if (a.node.index() != b.node.index()) return false;
    if (std::holds_alternative<SkipCmd>(a.node) || std::holds_alternative<StopCmd>(a.node))
        return true;
    if (auto* s = std::get_if<SeqCmd>(&a.node)) {
        const auto& t = std::get<SeqCmd>(b.node);
        return cmd_equal(*s->first, *t.first) && cmd_equal(*s->second, *t.second);
    }
    if (auto* i = std::get_if<IfCmd>(&a.node)) {
        const auto& j = std::get<IfCmd>(b.node);
        return expr_equal(*i->cond, *j.cond) && cmd_equal(*i->then_branch, *j.then_branch) &&
               cmd_equal(*i->else_branch, *j.else_branch);
    }
    if (auto* w = std::get_if<WhileCmd>(&a.node)) {
        const auto& x = std::get<WhileCmd>(b.node);
        return expr_equal(*w->cond, *x.cond) && cmd_equal(*w->body, *x.body);
    }
    if (auto* as = std::get_if<AssignCmd>(&a.node)) {
        const auto& bs = std::get<AssignCmd>(b.node);
        return as->var == bs.var && expr_equal(*as->rhs, *bs.rhs);
    }
    if (auto* l = std::get_if<LockAcqCmd>(&a.node))
        return l->lock == std::get<LockAcqCmd>(b.node).lock;
    return std::get<LockRelCmd>(a.node).lock == std::get<LockRelCmd>(b.node).lock;
}
inline bool cmd_equal(const CmdPtr& a, const CmdPtr& b) { return cmd_equal(*a, *b); }

namespace detail {
inline void print_cmd(const Cmd& c, std::string& out, int indent) {
    auto pad = [&] { out.append(static_cast<size_t>(indent) * 2, ' '); };
    if (std::holds_alternative<SkipCmd>(c.node)) {
        pad(); out += "skip";
    } else if (std::holds_alternative<StopCmd>(c.node)) {
        pad(); out += "stop";  // unreachable from parsed source
    } else if (auto* s = std::get_if<SeqCmd>(&c.node)) {
        print_cmd(*s->first, out, indent);
        out += ";\n";
        print_cmd(*s->second, out, indent);
    } else if (auto* i = std::get_if<IfCmd>(&c.node)) {
        pad(); out += "if " + expr_str(*i->cond, 0) + " then\n";
        print_cmd(*i->then_branch, out, indent + 1);
        out += "\n"; pad(); out += "else\n";
        print_cmd(*i->else_branch, out, indent + 1);
        out += "\n"; pad(); out += "fi";
    } else if (auto* w = std::get_if<WhileCmd>(&c.node)) {
        pad(); out += "while " + expr_str(*w->cond, 0) + " do\n";
        print_cmd(*w->body, out, indent + 1);
        out += "\n"; pad(); out += "od";
    } else if (auto* a = std::get_if<AssignCmd>(&c.node)) {
        pad(); out += a->var + " := " + expr_str(*a->rhs, 0);
    } else if (auto* l = std::get_if<LockAcqCmd>(&c.node)) {
        pad(); out += "acquire(" + l->lock + ")";
    } else if (auto* r = std::get_if<LockRelCmd>(&c.node)) {
        pad(); out += "release(" + r->lock + ")";
    }
}
} // namespace detail

// Canonical concrete syntax; parse(cmd_str(c)) reproduces c.
inline std::string cmd_str(const Cmd& c) {
    std::string out;
    detail::print_cmd(c, out, 0);
    out += "\n";
    return out;
}
inline std::string cmd_str(const CmdPtr& c) { return cmd_str(*c); }

// Compact single-line rendering of the head of a command, for traces.
inline std::string cmd_head_str(const Cmd& c) {
    const Cmd& l = leftmost_cmd(c);
    if (std::holds_alternative<SkipCmd>(l.node)) return "skip";
    if (std::holds_alternative<StopCmd>(l.node)) return "stop";
    if (auto* i = std::get_if<IfCmd>(&l.node)) return "if " + expr_str(*i->cond, 0);
    if (auto* w = std::get_if<WhileCmd>(&l.node)) return "while " + expr_str(*w->cond, 0);
    if (auto* a = std::get_if<AssignCmd>(&l.node)) return a->var + " := " + expr_str(*a->rhs, 0);
    if (auto* la = std::get_if<LockAcqCmd>(&l.node)) return "acquire(" + la->lock + ")";
    if (auto* lr = std::get_if<LockRelCmd>(&l.node)) return "release(" + lr->lock + ")";
    return "?";
}

} // namespace wrc
