#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace wrc {

// Machine value: signed 64-bit with wrapping arithmetic. All arithmetic is
// routed through unsigned casts so overflow stays defined.
struct Value {
    int64_t v = 0;

    constexpr Value() = default;
    constexpr Value(int64_t x) : v(x) {}

    friend constexpr bool operator==(Value a, Value b) { return a.v == b.v; }
    friend constexpr auto operator<=>(Value a, Value b) { return a.v <=> b.v; }
};

constexpr Value lock_true{1};
constexpr Value lock_false{0};

// A lock is held iff its cell is nonzero.
constexpr bool ev_lock(Value x) { return x.v != 0; }

// Branch truthiness: nonzero is true, mirroring the target's jump-if-zero.
constexpr bool truthy(Value x) { return x.v != 0; }

constexpr Value wrap_add(Value a, Value b) {
    return Value{static_cast<int64_t>(static_cast<uint64_t>(a.v) + static_cast<uint64_t>(b.v))};
}
constexpr Value wrap_sub(Value a, Value b) {
    return Value{static_cast<int64_t>(static_cast<uint64_t>(a.v) - static_cast<uint64_t>(b.v))};
}
constexpr Value wrap_mul(Value a, Value b) {
    return Value{static_cast<int64_t>(static_cast<uint64_t>(a.v) * static_cast<uint64_t>(b.v))};
}

// Binary operators shared by source expressions and target Op instructions.
// Comparisons and logic produce 1/0; there is no division.
enum class BinOp { Add, Sub, Mul, Eq, Ne, Lt, Le, And, Or };

constexpr Value apply_op(BinOp op, Value a, Value b) {
    switch (op) {
    case BinOp::Add: return wrap_add(a, b);
    case BinOp::Sub: return wrap_sub(a, b);
    case BinOp::Mul: return wrap_mul(a, b);
    case BinOp::Eq:  return Value{a.v == b.v ? 1 : 0};
    case BinOp::Ne:  return Value{a.v != b.v ? 1 : 0};
    case BinOp::Lt:  return Value{a.v < b.v ? 1 : 0};
    case BinOp::Le:  return Value{a.v <= b.v ? 1 : 0};
    case BinOp::And: return Value{(truthy(a) && truthy(b)) ? 1 : 0};
    case BinOp::Or:  return Value{(truthy(a) || truthy(b)) ? 1 : 0};
    }
    throw std::logic_error("apply_op: bad operator");
}

inline const char* op_name(BinOp op) {
    switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Eq:  return "==";
    case BinOp::Ne:  return "!=";
    case BinOp::Lt:  return "<";
    case BinOp::Le:  return "<=";
    case BinOp::And: return "&&";
    case BinOp::Or:  return "||";
    }
    return "?";
}

inline bool op_from_name(const std::string& s, BinOp& out) {
    if (s == "+")  { out = BinOp::Add; return true; }
    if (s == "-")  { out = BinOp::Sub; return true; }
    if (s == "*")  { out = BinOp::Mul; return true; }
    if (s == "==") { out = BinOp::Eq;  return true; }
    if (s == "!=") { out = BinOp::Ne;  return true; }
    if (s == "<")  { out = BinOp::Lt;  return true; }
    if (s == "<=") { out = BinOp::Le;  return true; }
    if (s == "&&") { out = BinOp::And; return true; }
    if (s == "||") { out = BinOp::Or;  return true; }
    return false;
}

} // namespace wrc
