#include "fpinn/problem.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fpinn/network.hpp"

namespace fpinn {

namespace {

const char* const kDefaultStack =
    "legendre:16 dense:32:tanh dense:64:tanh dense:32:tanh legendre:5 dense:1:identity";

const char* const kDaeStack =
    "legendre:40 dense:5:tanh dense:32:tanh dense:5:tanh dense:10:identity dense:1:identity";

const char* const kBuiltins[kBuiltinCount] = {
    // 1: nonlinear DDE with delayed derivative and delayed value
    R"(type = fdde
name = ex1
domain = 0 1
order = 1
delay1 = x - sin(x^2)
delay2 = x - sin(x)
forcing = -exp(-x) - exp(sin(x^2)) + cos(x)*exp(sin(x) - x)
chi = -exp(x)*y'@1 - cos(x)*y@2 + forcing
init = 1
exact = exp(-x)
)",
    // 2: nonlinear DDE with advanced arguments sqrt(x) and sin(x)
    R"(type = fdde
name = ex2
domain = 0 1
order = 1
delay1 = sqrt(x)
delay2 = sin(x)
forcing = exp(x) + sqrt(cos(x))*exp(sqrt(x)) + (sin(sqrt(x)) + exp(x))*exp(sin(x))
chi = -sqrt(cos(x))*y'@1 - (sin(sqrt(x)) + exp(x))*y@2 + forcing
init = 1
exact = exp(x)
)",
    // 3: pantograph equation, q = 1/2
    R"(type = fdde
name = ex3
domain = 0 1
order = 1
delay1 = x/2
chi = (1/2)*y@1 - y - (1/2)*exp(-x/2)
init = 1
exact = exp(-x)
)",
    // 4: pantograph equation with growing solution
    R"(type = fdde
name = ex4
domain = 0 1
order = 1
delay1 = x/2
chi = (1/2)*y + (1/2)*exp(x/2)*y@1
init = 1
exact = exp(x)
)",
    // 5: fractional DDE, constant delay reaching the history interval
    R"(type = fdde
name = ex5
domain = 0 1
order = 0.3
delay1 = x - 1
chi = y@1 - y + 1 - 3*x + 3*x^2 + 2000*x^2.7/(1071*gamma(0.7))
init = 0
history = x^3
exact = x^3
)",
    // 6: nonlinear fractional pantograph equation
    R"(type = fdde
name = ex6
domain = 0 1
order = 0.5
delay1 = x/3
forcing = 8/(3*sqrt(pi))*x^1.5 - 2/sqrt(pi)*x^0.5 - x^4 + 2*x^3 - 10/9*x^2 + x/3
chi = y@1 + y^2 + forcing
init = 0
exact = x^2 - x
)",
    // 7: integer-order differential-algebraic system
    R"(type = dae
name = ex7
domain = 0 1
states = 3
eq1 = y1' - (y1 - y3*y2 + sin(x) + x*cos(x))
eq2 = y2' - (x*y3 + y1^2 + sec(x)^2 - x^2*(cos(x) + sin(x)^2))
eq3 = y1 - y3 + x*(cos(x) - sin(x))
init = 0 0 0
exact1 = x*sin(x)
exact2 = tan(x)
exact3 = x*cos(x)
net = legendre:40 dense:5:tanh dense:32:tanh dense:5:tanh dense:10:identity dense:1:identity
)",
    // 8: linear fractional differential-algebraic system
    R"(type = dae
name = ex8
domain = 0 1
states = 3
alpha = 0.5
eq1 = D(y1) + 2*y1 - (gamma(3.5)/gamma(3))*y2 + y3 - (2*x^2.5 + sin(x))
eq2 = D(y2) + y2 + y3 - ((gamma(3)/gamma(2.5))*x^1.5 + x^2 + sin(x))
eq3 = 2*y1 + y2 - y3 - (2*x^2.5 + x^2 - sin(x))
init = 0 0 0
exact1 = x^2.5
exact2 = x^2
exact3 = sin(x)
net = legendre:40 dense:5:tanh dense:32:tanh dense:5:tanh chebyshev:10 dense:1:identity
)",
};

std::string trim(const std::string& s)
{
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos)
        return {};
    return s.substr(a, b - a + 1);
}

struct RawEntry {
    std::string value;
    int line;
};

[[noreturn]] void fail_line(int line, const std::string& msg)
{
    throw std::invalid_argument("problem: line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_ws(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok)
        out.push_back(tok);
    return out;
}

std::vector<double> parse_doubles(const RawEntry& e, const std::string& key)
{
    std::vector<double> out;
    std::istringstream is(e.value);
    double v;
    while (is >> v)
        out.push_back(v);
    if (!is.eof() || out.empty())
        fail_line(e.line, "'" + key + "' expects numbers");
    return out;
}

class ProblemReader {
public:
    explicit ProblemReader(const std::string& text)
    {
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (const size_t hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            line = trim(line);
            if (line.empty())
                continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                fail_line(lineno, "expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty() || value.empty())
                fail_line(lineno, "expected 'key = value'");
            if (entries_.count(key))
                fail_line(lineno, "duplicate key '" + key + "'");
            entries_[key] = {value, lineno};
        }
    }

    Problem read()
    {
        const RawEntry type = take("type");
        Problem p;
        if (type.value == "fdde")
            p = read_fdde();
        else if (type.value == "dae")
            p = read_dae();
        else
            fail_line(type.line, "type must be 'fdde' or 'dae'");
        if (!entries_.empty()) {
            const auto& [key, entry] = *entries_.begin();
            fail_line(entry.line, "unrecognized key '" + key + "'");
        }
        return p;
    }

private:
    RawEntry take(const std::string& key)
    {
        const auto it = entries_.find(key);
        if (it == entries_.end())
            throw std::invalid_argument("problem: missing required key '" + key + "'");
        RawEntry e = it->second;
        entries_.erase(it);
        return e;
    }

    std::optional<RawEntry> take_optional(const std::string& key)
    {
        const auto it = entries_.find(key);
        if (it == entries_.end())
            return std::nullopt;
        RawEntry e = it->second;
        entries_.erase(it);
        return e;
    }

    Expression parse_checked(const RawEntry& e, const SymbolTable& sym, const std::string& key)
    {
        try {
            return parse_expression(e.value, sym);
        } catch (const std::invalid_argument& err) {
            fail_line(e.line, std::string("in '" + key + "': ") + err.what());
        }
    }

    void read_common(double& lo, double& hi, std::string& name,
                     std::vector<std::string>& stack, const char* fallback_stack)
    {
        if (const auto n = take_optional("name"))
            name = n->value;
        const RawEntry dom = take("domain");
        const std::vector<double> d = parse_doubles(dom, "domain");
        if (d.size() != 2 || !(d[0] < d[1]))
            fail_line(dom.line, "domain expects 'lo hi' with lo < hi");
        lo = d[0];
        hi = d[1];
        const auto net = take_optional("net");
        const std::string stack_text = net ? net->value : fallback_stack;
        stack = split_ws(stack_text);
        try {
            (void)parse_layer_stack(stack);
        } catch (const std::invalid_argument& err) {
            fail_line(net ? net->line : 0, err.what());
        }
    }

    FddeProblem read_fdde()
    {
        FddeProblem p;
        read_common(p.lo, p.hi, p.name, p.net_stack, kDefaultStack);

        const RawEntry ord = take("order");
        const std::vector<double> q = parse_doubles(ord, "order");
        if (q.size() != 1)
            fail_line(ord.line, "order expects one number");
        try {
            p.order = FractionalOrder(q[0]);
        } catch (const std::domain_error& err) {
            fail_line(ord.line, err.what());
        }
        if (q[0] > 2.0)
            fail_line(ord.line, "orders above 2 are not supported");

        SymbolTable delay_sym; // delays, history and exact are functions of x only
        for (int j = 1;; ++j) {
            const auto d = take_optional("delay" + std::to_string(j));
            if (!d)
                break;
            p.delays.push_back(parse_checked(*d, delay_sym, "delay" + std::to_string(j)));
        }

        SymbolTable chi_sym;
        chi_sym.slots = {{"y", FddeProblem::slot_y},
                         {"y'", FddeProblem::slot_d1},
                         {"y''", FddeProblem::slot_d2}};
        for (size_t j = 0; j < p.delays.size(); ++j) {
            const std::string tag = "@" + std::to_string(j + 1);
            chi_sym.slots["y" + tag] = FddeProblem::delayed_value_slot(static_cast<int>(j));
            chi_sym.slots["y'" + tag] = FddeProblem::delayed_deriv_slot(static_cast<int>(j));
        }
        Expression forcing;
        if (const auto f = take_optional("forcing")) {
            forcing = parse_checked(*f, chi_sym, "forcing");
            chi_sym.named["forcing"] = &forcing;
        }
        p.chi = parse_checked(take("chi"), chi_sym, "chi");

        const RawEntry init = take("init");
        p.initial_values = parse_doubles(init, "init");
        if (static_cast<int>(p.initial_values.size()) != p.order.initial_value_count())
            fail_line(init.line, "init expects " +
                                     std::to_string(p.order.initial_value_count()) +
                                     " value(s) for this order");

        if (const auto h = take_optional("history"))
            p.history = parse_checked(*h, delay_sym, "history");
        if (const auto e = take_optional("exact"))
            p.exact = parse_checked(*e, delay_sym, "exact");
        return p;
    }

    DaeSystem read_dae()
    {
        DaeSystem s;
        read_common(s.lo, s.hi, s.name, s.net_stack, kDaeStack);

        const RawEntry states = take("states");
        const std::vector<double> sv = parse_doubles(states, "states");
        if (sv.size() != 1 || sv[0] != std::floor(sv[0]) || sv[0] < 1 || sv[0] > 5)
            fail_line(states.line, "states expects an integer in [1, 5]");
        s.m = static_cast<int>(sv[0]);

        if (const auto a = take_optional("alpha")) {
            const std::vector<double> av = parse_doubles(*a, "alpha");
            if (av.size() != 1 || !(av[0] > 0.0 && av[0] < 1.0))
                fail_line(a->line, "alpha expects one number in (0, 1)");
            s.alpha = av[0];
        }

        SymbolTable sym;
        for (int k = 0; k < s.m; ++k) {
            const std::string yk = "y" + std::to_string(k + 1);
            sym.slots[yk] = s.value_slot(k);
            sym.slots[yk + "'"] = s.deriv_slot(k);
            sym.slots["D(" + yk + ")"] = s.frac_slot(k);
        }
        Expression forcing;
        if (const auto f = take_optional("forcing")) {
            forcing = parse_checked(*f, sym, "forcing");
            sym.named["forcing"] = &forcing;
        }
        for (int j = 1; j <= s.m; ++j) {
            const std::string key = "eq" + std::to_string(j);
            s.equations.push_back(parse_checked(take(key), sym, key));
        }

        const RawEntry init = take("init");
        s.initial_values = parse_doubles(init, "init");
        if (static_cast<int>(s.initial_values.size()) != s.m)
            fail_line(init.line, "init expects one value per state");

        SymbolTable exact_sym;
        int have_exact = 0;
        for (int k = 1; k <= s.m; ++k) {
            const auto e = take_optional("exact" + std::to_string(k));
            if (e) {
                s.exact.push_back(parse_checked(*e, exact_sym, "exact" + std::to_string(k)));
                ++have_exact;
            }
        }
        if (have_exact != 0 && have_exact != s.m)
            throw std::invalid_argument(
                "problem: exact solutions must be given for all states or none");

        if (s.uses_fractional() && s.alpha == 0.0)
            throw std::invalid_argument(
                "problem: equations use D() but no alpha was given");
        return s;
    }

    std::map<std::string, RawEntry> entries_;
};

} // namespace

bool DaeSystem::uses_fractional() const
{
    for (int k = 0; k < m; ++k)
        for (const Expression& eq : equations) {
            const std::vector<bool> used = eq.slots_used();
            const size_t slot = static_cast<size_t>(frac_slot(k));
            if (slot < used.size() && used[slot])
                return true;
        }
    return false;
}

Problem builtin_problem(int id)
{
    if (id < 1 || id > kBuiltinCount)
        throw std::out_of_range("problem: builtin id must be 1.." +
                                std::to_string(kBuiltinCount));
    return parse_problem_text(kBuiltins[id - 1]);
}

Problem parse_problem_text(const std::string& text)
{
    return ProblemReader(text).read();
}

Problem load_problem(std::istream& is)
{
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_problem_text(buf.str());
}

std::string problem_template_text()
{
    return R"(# Problem definition file.
# Lines are 'key = value'; '#' starts a comment. Expressions use the input
# variable x, numbers, + - * / ^, parentheses, exp, sin, cos, tan, sec, sqrt,
# log, the constant pi, and gamma(c) with a constant argument.

# 'fdde' solves D^order y(x) = chi; 'dae' solves a coupled system (keys:
# states, alpha, eq1..eqm, exact1..exactm).
type = fdde
name = pantograph-demo
domain = 0 1

# Order of the leading derivative: 1 is classical, fractional in (0,2).
order = 1

# Delay maps, numbered from 1. chi refers to the solution at delay k via y@k
# and to its derivative there via y'@k.
delay1 = x/2

# chi may use x, y, y', y'', y@k, y'@k and any named 'forcing' expression.
chi = (1/2)*y@1 - y - (1/2)*exp(-x/2)

# Initial values at the left endpoint: one per ceil(order).
init = 1

# Optional closed-form solution used for error reports.
exact = exp(-x)

# Optional history function for delays below the domain (e.g. history = x^3).
# Optional network stack; this is the default:
net = legendre:16 dense:32:tanh dense:64:tanh dense:32:tanh legendre:5 dense:1:identity
)";
}

} // namespace fpinn
