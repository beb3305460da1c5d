#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fpinn {

// Scalar carrying first and second derivatives w.r.t. one variable.
struct Jet {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

// Maximum number of state slots an expression may reference: enough for a
// three-state system with values, first derivatives and fractional
// derivatives, or an FDDE with two delays.
inline constexpr int kMaxSlots = 16;

// Names available while parsing: the input variable is always "x"; slots map
// symbolic references like "y'", "y@1" or "D(y2)" to slot indices; named
// subexpressions (e.g. "forcing") are inlined where referenced.
struct SymbolTable {
    std::map<std::string, int> slots;
    std::map<std::string, const class Expression*> named;
};

// Parsed arithmetic expression over the input variable, numeric constants and
// state slots. Supports + - * / ^, unary minus, exp, sin, cos, tan, sec,
// sqrt, log, the constant pi, and gamma(c) folded at parse time (constant
// arguments only).
class Expression {
public:
    Expression() = default;

    // Plain evaluation. Slot values must cover every slot the expression uses.
    double eval(double x, std::span<const double> slots = {}) const;

    // Evaluation carrying d/dx and d2/dx2. Only valid for expressions without
    // slot references (exact solutions, history functions, delay maps).
    Jet eval_jet(double x) const;

    // Evaluates and fills partials[i] = d(expr)/d(slot i). partials must have
    // at least slot_count() entries.
    double eval_slot_partials(double x, std::span<const double> slots,
                              std::span<double> partials) const;

    // Highest referenced slot index + 1.
    int slot_count() const;
    std::vector<bool> slots_used() const;
    bool uses_input() const;
    bool empty() const { return nodes_.empty(); }

    const std::string& text() const { return text_; }

private:
    friend Expression parse_expression(const std::string&, const SymbolTable&);
    friend class ExpressionParser;

    enum class Op : std::uint8_t {
        constant, input, slot,
        add, sub, mul, div, neg,
        pow_general, pow_const,
        exp_fn, sin_fn, cos_fn, tan_fn, sqrt_fn, log_fn,
    };
    struct Node {
        Op op;
        double c = 0.0; // constant value, or exponent for pow_const
        int slot = -1;
        int a = -1, b = -1;
    };

    template <class T> T eval_generic(const T& x, std::span<const T> slots) const;

    std::vector<Node> nodes_; // topologically ordered, root last
    std::string text_;
};

Expression parse_expression(const std::string& text, const SymbolTable& symbols = {});

} // namespace fpinn
