#include "fpinn/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "fpinn/gamma.hpp"

namespace fpinn {

namespace {

// ---- scalar arithmetic shared by all evaluation modes -----------------------

double make_const(double c, const double&) { return c; }
double add_t(double a, double b) { return a + b; }
double sub_t(double a, double b) { return a - b; }
double mul_t(double a, double b) { return a * b; }
double div_t(double a, double b) { return a / b; }
double neg_t(double a) { return -a; }
double exp_t(double a) { return std::exp(a); }
double sin_t(double a) { return std::sin(a); }
double cos_t(double a) { return std::cos(a); }
double tan_t(double a) { return std::tan(a); }
double sqrt_t(double a) { return std::sqrt(a); }
double log_t(double a) { return std::log(a); }
double pow_const_t(double a, double c) { return std::pow(a, c); }
double pow_general_t(double a, double b) { return std::pow(a, b); }

Jet make_const(double c, const Jet&) { return {c, 0.0, 0.0}; }
Jet add_t(const Jet& a, const Jet& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
Jet sub_t(const Jet& a, const Jet& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
Jet mul_t(const Jet& a, const Jet& b)
{
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
Jet div_t(const Jet& a, const Jet& b)
{
    const double v = a.v / b.v;
    const double d1 = (a.d1 - v * b.d1) / b.v;
    const double d2 = (a.d2 - 2.0 * d1 * b.d1 - v * b.d2) / b.v;
    return {v, d1, d2};
}
Jet neg_t(const Jet& a) { return {-a.v, -a.d1, -a.d2}; }
// Chain rule for f(u): f'' = fpp u'^2 + fp u''.
Jet chain(const Jet& u, double f, double fp, double fpp)
{
    return {f, fp * u.d1, fpp * u.d1 * u.d1 + fp * u.d2};
}
Jet exp_t(const Jet& u)
{
    const double e = std::exp(u.v);
    return chain(u, e, e, e);
}
Jet sin_t(const Jet& u) { return chain(u, std::sin(u.v), std::cos(u.v), -std::sin(u.v)); }
Jet cos_t(const Jet& u) { return chain(u, std::cos(u.v), -std::sin(u.v), -std::cos(u.v)); }
Jet tan_t(const Jet& u)
{
    const double t = std::tan(u.v);
    const double s = 1.0 + t * t;
    return chain(u, t, s, 2.0 * t * s);
}
Jet sqrt_t(const Jet& u)
{
    const double r = std::sqrt(u.v);
    return chain(u, r, 0.5 / r, -0.25 / (r * u.v));
}
Jet log_t(const Jet& u) { return chain(u, std::log(u.v), 1.0 / u.v, -1.0 / (u.v * u.v)); }
Jet pow_const_t(const Jet& u, double c)
{
    if (c == 0.0)
        return {1.0, 0.0, 0.0};
    const double f = std::pow(u.v, c);
    const double fp = c * std::pow(u.v, c - 1.0);
    const double fpp = (c == 1.0) ? 0.0 : c * (c - 1.0) * std::pow(u.v, c - 2.0);
    return chain(u, f, fp, fpp);
}
Jet pow_general_t(const Jet& a, const Jet& b) { return exp_t(mul_t(b, log_t(a))); }

// Value plus gradient over a fixed-width block of slots.
struct SlotDual {
    double v = 0.0;
    std::array<double, kMaxSlots> g{};
};

SlotDual make_const(double c, const SlotDual&)
{
    SlotDual r;
    r.v = c;
    return r;
}
SlotDual add_t(const SlotDual& a, const SlotDual& b)
{
    SlotDual r;
    r.v = a.v + b.v;
    for (int i = 0; i < kMaxSlots; ++i)
        r.g[i] = a.g[i] + b.g[i];
    return r;
}
SlotDual sub_t(const SlotDual& a, const SlotDual& b)
{
    SlotDual r;
    r.v = a.v - b.v;
    for (int i = 0; i < kMaxSlots; ++i)
        r.g[i] = a.g[i] - b.g[i];
    return r;
}
SlotDual mul_t(const SlotDual& a, const SlotDual& b)
{
    SlotDual r;
    r.v = a.v * b.v;
    for (int i = 0; i < kMaxSlots; ++i)
        r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    return r;
}
SlotDual div_t(const SlotDual& a, const SlotDual& b)
{
    SlotDual r;
    r.v = a.v / b.v;
    for (int i = 0; i < kMaxSlots; ++i)
        r.g[i] = (a.g[i] - r.v * b.g[i]) / b.v;
    return r;
}
SlotDual neg_t(const SlotDual& a)
{
    SlotDual r;
    r.v = -a.v;
    for (int i = 0; i < kMaxSlots; ++i)
        r.g[i] = -a.g[i];
    return r;
}
SlotDual chain(const SlotDual& u, double f, double fp)
{
    SlotDual r;
    r.v = f;
    for (int i = 0; i < kMaxSlots; ++i)
        r.g[i] = fp * u.g[i];
    return r;
}
SlotDual exp_t(const SlotDual& u)
{
    const double e = std::exp(u.v);
    return chain(u, e, e);
}
SlotDual sin_t(const SlotDual& u) { return chain(u, std::sin(u.v), std::cos(u.v)); }
SlotDual cos_t(const SlotDual& u) { return chain(u, std::cos(u.v), -std::sin(u.v)); }
SlotDual tan_t(const SlotDual& u)
{
    const double t = std::tan(u.v);
    return chain(u, t, 1.0 + t * t);
}
SlotDual sqrt_t(const SlotDual& u)
{
    const double r = std::sqrt(u.v);
    return chain(u, r, 0.5 / r);
}
SlotDual log_t(const SlotDual& u) { return chain(u, std::log(u.v), 1.0 / u.v); }
SlotDual pow_const_t(const SlotDual& u, double c)
{
    if (c == 0.0)
        return make_const(1.0, u);
    return chain(u, std::pow(u.v, c), c * std::pow(u.v, c - 1.0));
}
SlotDual pow_general_t(const SlotDual& a, const SlotDual& b)
{
    return exp_t(mul_t(b, log_t(a)));
}

} // namespace

template <class T>
T Expression::eval_generic(const T& x, std::span<const T> slots) const
{
    if (nodes_.empty())
        throw std::logic_error("expression: empty");
    thread_local std::vector<T> vals;
    vals.assign(nodes_.size(), T{});
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.op) {
        case Op::constant: vals[i] = make_const(n.c, x); break;
        case Op::input: vals[i] = x; break;
        case Op::slot:
            if (static_cast<size_t>(n.slot) >= slots.size())
                throw std::out_of_range("expression: slot value missing");
            vals[i] = slots[static_cast<size_t>(n.slot)];
            break;
        case Op::add: vals[i] = add_t(vals[static_cast<size_t>(n.a)], vals[static_cast<size_t>(n.b)]); break;
        case Op::sub: vals[i] = sub_t(vals[static_cast<size_t>(n.a)], vals[static_cast<size_t>(n.b)]); break;
        case Op::mul: vals[i] = mul_t(vals[static_cast<size_t>(n.a)], vals[static_cast<size_t>(n.b)]); break;
        case Op::div: vals[i] = div_t(vals[static_cast<size_t>(n.a)], vals[static_cast<size_t>(n.b)]); break;
        case Op::neg: vals[i] = neg_t(vals[static_cast<size_t>(n.a)]); break;
        case Op::pow_general:
            vals[i] = pow_general_t(vals[static_cast<size_t>(n.a)], vals[static_cast<size_t>(n.b)]);
            break;
        case Op::pow_const: vals[i] = pow_const_t(vals[static_cast<size_t>(n.a)], n.c); break;
        case Op::exp_fn: vals[i] = exp_t(vals[static_cast<size_t>(n.a)]); break;
        case Op::sin_fn: vals[i] = sin_t(vals[static_cast<size_t>(n.a)]); break;
        case Op::cos_fn: vals[i] = cos_t(vals[static_cast<size_t>(n.a)]); break;
        case Op::tan_fn: vals[i] = tan_t(vals[static_cast<size_t>(n.a)]); break;
        case Op::sqrt_fn: vals[i] = sqrt_t(vals[static_cast<size_t>(n.a)]); break;
        case Op::log_fn: vals[i] = log_t(vals[static_cast<size_t>(n.a)]); break;
        }
    }
    return vals.back();
}

double Expression::eval(double x, std::span<const double> slots) const
{
    return eval_generic<double>(x, slots);
}

Jet Expression::eval_jet(double x) const
{
    if (slot_count() > 0)
        throw std::logic_error("expression: jet evaluation cannot involve state slots");
    return eval_generic<Jet>(Jet{x, 1.0, 0.0}, {});
}

double Expression::eval_slot_partials(double x, std::span<const double> slots,
                                      std::span<double> partials) const
{
    const int ns = slot_count();
    if (static_cast<int>(slots.size()) < ns || static_cast<int>(partials.size()) < ns)
        throw std::invalid_argument("expression: slot buffers too small");
    if (slots.size() > static_cast<size_t>(kMaxSlots))
        throw std::invalid_argument("expression: too many slots");
    thread_local std::vector<SlotDual> duals;
    duals.assign(slots.size(), SlotDual{});
    for (size_t i = 0; i < slots.size(); ++i) {
        duals[i].v = slots[i];
        duals[i].g[i] = 1.0;
    }
    SlotDual x_dual;
    x_dual.v = x;
    const SlotDual r = eval_generic<SlotDual>(x_dual, duals);
    for (int i = 0; i < ns; ++i)
        partials[static_cast<size_t>(i)] = r.g[static_cast<size_t>(i)];
    return r.v;
}

int Expression::slot_count() const
{
    int n = 0;
    for (const Node& node : nodes_)
        if (node.op == Op::slot && node.slot + 1 > n)
            n = node.slot + 1;
    return n;
}

std::vector<bool> Expression::slots_used() const
{
    std::vector<bool> used(static_cast<size_t>(slot_count()), false);
    for (const Node& node : nodes_)
        if (node.op == Op::slot)
            used[static_cast<size_t>(node.slot)] = true;
    return used;
}

bool Expression::uses_input() const
{
    for (const Node& node : nodes_)
        if (node.op == Op::input)
            return true;
    return false;
}

// ---- parser -----------------------------------------------------------------

class ExpressionParser {
public:
    ExpressionParser(const std::string& text, const SymbolTable& symbols, Expression& out)
        : text_(text), symbols_(symbols), expr_(out)
    {
    }

    void run()
    {
        const int root = parse_expr();
        skip_space();
        if (pos_ != text_.size())
            fail("unexpected trailing input");
        (void)root;
        if (expr_.nodes_.empty())
            fail("empty expression");
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw std::invalid_argument("expression: " + msg + " at position " +
                                    std::to_string(pos_) + " in '" + text_ + "'");
    }

    void skip_space()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool consume(char c)
    {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek()
    {
        skip_space();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    int push(Expression::Node n)
    {
        expr_.nodes_.push_back(n);
        return static_cast<int>(expr_.nodes_.size()) - 1;
    }
    int push_const(double c) { return push({Op::constant, c, -1, -1, -1}); }
    int push_unary(Op op, int a) { return push({op, 0.0, -1, a, -1}); }
    int push_binary(Op op, int a, int b) { return push({op, 0.0, -1, a, b}); }

    int parse_expr()
    {
        int lhs = parse_term();
        while (true) {
            if (consume('+'))
                lhs = push_binary(Op::add, lhs, parse_term());
            else if (consume('-'))
                lhs = push_binary(Op::sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    int parse_term()
    {
        int lhs = parse_unary();
        while (true) {
            if (consume('*'))
                lhs = push_binary(Op::mul, lhs, parse_unary());
            else if (consume('/'))
                lhs = push_binary(Op::div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    int parse_unary()
    {
        if (consume('-'))
            return push_unary(Op::neg, parse_unary());
        if (consume('+'))
            return parse_unary();
        return parse_power();
    }

    int parse_power()
    {
        const int base = parse_primary();
        if (!consume('^'))
            return base;
        const int expo = parse_unary();
        // Constant exponents get the specialized derivative rule (and keep
        // negative bases with integer exponents meaningful).
        if (expr_.nodes_[static_cast<size_t>(expo)].op == Op::constant) {
            const double c = expr_.nodes_[static_cast<size_t>(expo)].c;
            expr_.nodes_.pop_back();
            return push({Op::pow_const, c, -1, base, -1});
        }
        return push_binary(Op::pow_general, base, expo);
    }

    int parse_primary()
    {
        skip_space();
        if (pos_ >= text_.size())
            fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const int inner = parse_expr();
            if (!consume(')'))
                fail("missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return parse_identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    int parse_number()
    {
        double value = 0.0;
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        const auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc())
            fail("malformed number");
        pos_ += static_cast<size_t>(ptr - begin);
        return push_const(value);
    }

    int parse_identifier()
    {
        const size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);

        if (pos_ < text_.size() && text_[pos_] == '(') {
            // Function call or D(state) fractional-derivative slot.
            if (name == "D")
                return parse_fractional_slot();
            return parse_call(name);
        }

        // Postfix primes and delay tags extend the slot key: y', y''@2, ...
        while (pos_ < text_.size() && text_[pos_] == '\'') {
            name.push_back('\'');
            ++pos_;
        }
        if (pos_ < text_.size() && text_[pos_] == '@') {
            name.push_back('@');
            ++pos_;
            const size_t dstart = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == dstart)
                fail("delay tag '@' needs an index");
            name += text_.substr(dstart, pos_ - dstart);
        }

        if (name == "x")
            return push({Op::input, 0.0, -1, -1, -1});
        if (name == "pi")
            return push_const(M_PI);
        if (const auto it = symbols_.slots.find(name); it != symbols_.slots.end()) {
            if (it->second < 0 || it->second >= kMaxSlots)
                fail("slot index out of range for '" + name + "'");
            return push({Op::slot, 0.0, it->second, -1, -1});
        }
        if (const auto it = symbols_.named.find(name); it != symbols_.named.end())
            return splice(*it->second);
        fail("unknown identifier '" + name + "'");
    }

    int parse_fractional_slot()
    {
        ++pos_; // '('
        skip_space();
        const size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string state = text_.substr(start, pos_ - start);
        if (!consume(')'))
            fail("missing ')' after D(");
        const std::string key = "D(" + state + ")";
        const auto it = symbols_.slots.find(key);
        if (it == symbols_.slots.end())
            fail("unknown fractional derivative '" + key + "'");
        return push({Op::slot, 0.0, it->second, -1, -1});
    }

    int parse_call(const std::string& name)
    {
        ++pos_; // '('
        const size_t arg_start = expr_.nodes_.size();
        const int arg = parse_expr();
        if (!consume(')'))
            fail("missing ')' in call to " + name);
        if (name == "exp") return push_unary(Op::exp_fn, arg);
        if (name == "sin") return push_unary(Op::sin_fn, arg);
        if (name == "cos") return push_unary(Op::cos_fn, arg);
        if (name == "tan") return push_unary(Op::tan_fn, arg);
        if (name == "sqrt") return push_unary(Op::sqrt_fn, arg);
        if (name == "log") return push_unary(Op::log_fn, arg);
        if (name == "sec") {
            const int one = push_const(1.0);
            const int cose = push_unary(Op::cos_fn, arg);
            return push_binary(Op::div, one, cose);
        }
        if (name == "gamma") {
            // Constant arguments only; folded to a number here.
            for (size_t i = arg_start; i < expr_.nodes_.size(); ++i) {
                const Op op = expr_.nodes_[i].op;
                if (op == Op::input || op == Op::slot)
                    fail("gamma requires a constant argument");
            }
            Expression sub;
            sub.nodes_.assign(expr_.nodes_.begin() + static_cast<long>(arg_start),
                              expr_.nodes_.end());
            for (Expression::Node& n : sub.nodes_) {
                if (n.a >= 0) n.a -= static_cast<int>(arg_start);
                if (n.b >= 0) n.b -= static_cast<int>(arg_start);
            }
            const double folded = gamma(sub.eval(0.0));
            expr_.nodes_.resize(arg_start);
            return push_const(folded);
        }
        fail("unknown function '" + name + "'");
    }

    // Inlines a named subexpression by appending its nodes with shifted links.
    int splice(const Expression& sub)
    {
        if (sub.nodes_.empty())
            fail("referenced expression is empty");
        const int offset = static_cast<int>(expr_.nodes_.size());
        for (Expression::Node n : sub.nodes_) {
            if (n.a >= 0) n.a += offset;
            if (n.b >= 0) n.b += offset;
            expr_.nodes_.push_back(n);
        }
        return static_cast<int>(expr_.nodes_.size()) - 1;
    }

    const std::string& text_;
    const SymbolTable& symbols_;
    Expression& expr_;
    size_t pos_ = 0;
};

Expression parse_expression(const std::string& text, const SymbolTable& symbols)
{
    Expression e;
    e.text_ = text;
    ExpressionParser(text, symbols, e).run();
    return e;
}

} // namespace fpinn
