#pragma once

#include <memory>
#include <set>
#include <string>
#include <variant>

#include "wrc/mem.hpp"
#include "wrc/value.hpp"

namespace wrc {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct ConstExpr { Value val; };
struct VarExpr   { std::string name; };
struct BinExpr   { BinOp op; ExprPtr lhs, rhs; };

// Expression AST. Nodes are immutable and shared, so copies are cheap.
struct Expr {
    std::variant<ConstExpr, VarExpr, BinExpr> node;
};

inline ExprPtr e_const(Value v) { return std::make_shared<Expr>(Expr{ConstExpr{v}}); }
inline ExprPtr e_var(std::string name) { return std::make_shared<Expr>(Expr{VarExpr{std::move(name)}}); }
inline ExprPtr e_bin(BinOp op, ExprPtr l, ExprPtr r) {
    return std::make_shared<Expr>(Expr{BinExpr{op, std::move(l), std::move(r)}});
}

// Total, deterministic evaluation; unmapped variables read as 0.
inline Value ev_exp(const Mem& mem, const Expr& e) {
    if (auto* c = std::get_if<ConstExpr>(&e.node)) return c->val;
    if (auto* v = std::get_if<VarExpr>(&e.node)) return mem.get_var(v->name);
    const auto& b = std::get<BinExpr>(e.node);
    return apply_op(b.op, ev_exp(mem, *b.lhs), ev_exp(mem, *b.rhs));
}
inline Value ev_exp(const Mem& mem, const ExprPtr& e) { return ev_exp(mem, *e); }

inline void collect_vars(const Expr& e, std::set<std::string>& out) {
    if (auto* v = std::get_if<VarExpr>(&e.node)) {
        out.insert(v->name);
    } else if (auto* b = std::get_if<BinExpr>(&e.node)) {
        collect_vars(*b->lhs, out);
        collect_vars(*b->rhs, out);
    }
}

inline std::set<std::string> expr_vars(const Expr& e) {
    std::set<std::string> out;
    collect_vars(e, out);
    return out;
}
inline std::set<std::string> expr_vars(const ExprPtr& e) { return expr_vars(*e); }

inline bool mentions_var(const Expr& e, const std::string& v) {
    if (auto* ve = std::get_if<VarExpr>(&e.node)) return ve->name == v;
    if (auto* b = std::get_if<BinExpr>(&e.node))
        return mentions_var(*b->lhs, v) || mentions_var(*b->rhs, v);
    return false;
}

inline int expr_depth(const Expr& e) {
    if (auto* b = std::get_if<BinExpr>(&e.node))
        return 1 + std::max(expr_depth(*b->lhs), expr_depth(*b->rhs));
    return 1;
}

inline bool expr_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    if (auto* c = std::get_if<ConstExpr>(&a.node))
        return c->val == std::get<ConstExpr>(b.node).val;
    if (auto* v = std::get_if<VarExpr>(&a.node))
        return v->name == std::get<VarExpr>(b.node).name;
    const auto& x = std::get<BinExpr>(a.node);
    const auto& y = std::get<BinExpr>(b.node);
    return x.op == y.op && expr_equal(*x.lhs, *y.lhs) && expr_equal(*x.rhs, *y.rhs);
}
inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) { return expr_equal(*a, *b); }

// Binding strength used by both the printer and the parser. Higher binds
// tighter.
inline int op_precedence(BinOp op) {
    switch (op) {
    case BinOp::Or:  return 1;
    case BinOp::And: return 2;
    case BinOp::Eq:
    case BinOp::Ne:  return 3;
    case BinOp::Lt:
    case BinOp::Le:  return 4;
    case BinOp::Add:
    case BinOp::Sub: return 5;
    case BinOp::Mul: return 6;
    }
    return 0;
}

inline std::string expr_str(const Expr& e, int parent_prec = 0) {
    if (auto* c = std::get_if<ConstExpr>(&e.node)) return std::to_string(c->val.v);
    if (auto* v = std::get_if<VarExpr>(&e.node)) return v->name;
    const auto& b = std::get<BinExpr>(e.node);
    int prec = op_precedence(b.op);
    // Left-associative: the right child needs parens at equal precedence.
    std::string s = expr_str(*b.lhs, prec) + " " + op_name(b.op) + " " + expr_str(*b.rhs, prec + 1);
    if (prec < parent_prec) s = "(" + s + ")";
    return s;
}
inline std::string expr_str(const ExprPtr& e) { return expr_str(*e, 0); }

} // namespace wrc
