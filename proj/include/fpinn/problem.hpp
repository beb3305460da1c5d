#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fpinn/caputo.hpp"
#include "fpinn/expression.hpp"

namespace fpinn {

// Scalar delay problem D^q y(x) = chi(x, y, y', y'', y@1, y'@1, ...) on
// [lo, hi] with initial values at lo. Slot layout for chi: 0 = y, 1 = y',
// 2 = y'', then per delay j the pair (value, derivative) at the delayed
// argument.
struct FddeProblem {
    std::string name;
    double lo = 0.0, hi = 1.0;
    FractionalOrder order{1.0};
    Expression chi;
    std::vector<Expression> delays;      // maps of x
    std::vector<double> initial_values;  // y(lo), y'(lo), ... as order demands
    std::optional<Expression> history;   // used when a delay lands below lo
    std::optional<Expression> exact;
    std::vector<std::string> net_stack;

    static constexpr int slot_y = 0;
    static constexpr int slot_d1 = 1;
    static constexpr int slot_d2 = 2;
    static int delayed_value_slot(int j) { return 3 + 2 * j; }
    static int delayed_deriv_slot(int j) { return 4 + 2 * j; }
    int slot_total() const { return 3 + 2 * static_cast<int>(delays.size()); }
};

// Coupled system of m equations over states y1..ym, each equation an
// expression that must vanish. Slot layout: values in [0, m), first
// derivatives in [m, 2m), fractional derivatives D(yk) of order alpha in
// [2m, 3m).
struct DaeSystem {
    std::string name;
    double lo = 0.0, hi = 1.0;
    int m = 0;
    double alpha = 0.0;                  // order of the D() slots, 0 if unused
    std::vector<Expression> equations;
    std::vector<double> initial_values;  // yk(lo)
    std::vector<Expression> exact;       // all m or none
    std::vector<std::string> net_stack;

    int value_slot(int k) const { return k; }
    int deriv_slot(int k) const { return m + k; }
    int frac_slot(int k) const { return 2 * m + k; }
    int slot_total() const { return 3 * m; }
    bool uses_fractional() const;
};

using Problem = std::variant<FddeProblem, DaeSystem>;

inline constexpr int kBuiltinCount = 8;

// The eight benchmark problems, numbered 1..8.
Problem builtin_problem(int id);

// Structured-text problem definitions: "key = value" lines with '#' comments.
Problem parse_problem_text(const std::string& text);
Problem load_problem(std::istream& is);

// Commented example definition demonstrating every key; parses to a problem
// equivalent to builtin 3.
std::string problem_template_text();

} // namespace fpinn
