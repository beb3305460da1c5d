#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fpinn/expression.hpp"
#include "fpinn/gamma.hpp"

using namespace fpinn;

TEST_CASE("arithmetic and precedence")
{
    CHECK(parse_expression("2 + 3*4").eval(0.0) == doctest::Approx(14.0));
    CHECK(parse_expression("(1+2)*(3+4)").eval(0.0) == doctest::Approx(21.0));
    CHECK(parse_expression("2^3^2").eval(0.0) == doctest::Approx(512.0)); // right assoc
    CHECK(parse_expression("-x^2").eval(3.0) == doctest::Approx(-9.0));
    CHECK(parse_expression("x^-2").eval(2.0) == doctest::Approx(0.25));
    CHECK(parse_expression("7 - 2 - 1").eval(0.0) == doctest::Approx(4.0)); // left assoc
    CHECK(parse_expression("12/3/2").eval(0.0) == doctest::Approx(2.0));
    CHECK(parse_expression("1.5e2 + .5").eval(0.0) == doctest::Approx(150.5));
}

TEST_CASE("functions and constants")
{
    const double x = 0.7;
    CHECK(parse_expression("exp(x)").eval(x) == doctest::Approx(std::exp(x)).epsilon(1e-15));
    CHECK(parse_expression("sin(x)").eval(x) == doctest::Approx(std::sin(x)).epsilon(1e-15));
    CHECK(parse_expression("cos(x)").eval(x) == doctest::Approx(std::cos(x)).epsilon(1e-15));
    CHECK(parse_expression("tan(x)").eval(x) == doctest::Approx(std::tan(x)).epsilon(1e-15));
    CHECK(parse_expression("sec(x)").eval(x) ==
          doctest::Approx(1.0 / std::cos(x)).epsilon(1e-15));
    CHECK(parse_expression("sqrt(x)").eval(x) == doctest::Approx(std::sqrt(x)).epsilon(1e-15));
    CHECK(parse_expression("log(x)").eval(x) == doctest::Approx(std::log(x)).epsilon(1e-15));
    CHECK(parse_expression("pi").eval(0.0) == doctest::Approx(M_PI).epsilon(1e-16));
    CHECK(parse_expression("gamma(0.5)^2").eval(0.0) == doctest::Approx(M_PI).epsilon(1e-14));
    CHECK(parse_expression("gamma(3.7)").eval(0.0) ==
          doctest::Approx(fpinn::gamma(3.7)).epsilon(1e-15));
    // Constant subexpressions fold inside gamma.
    CHECK(parse_expression("gamma(1 + 5/2)").eval(0.0) ==
          doctest::Approx(fpinn::gamma(3.5)).epsilon(1e-15));
}

TEST_CASE("jet evaluation carries exact derivatives")
{
    // f = exp(sin x): f' = cos x e^{sin x}, f'' = (cos^2 x - sin x) e^{sin x}
    const Expression f = parse_expression("exp(sin(x))");
    const double x = 0.7;
    const Jet j = f.eval_jet(x);
    const double e = std::exp(std::sin(x));
    CHECK(j.v == doctest::Approx(e).epsilon(1e-14));
    CHECK(j.d1 == doctest::Approx(std::cos(x) * e).epsilon(1e-14));
    CHECK(j.d2 ==
          doctest::Approx((std::cos(x) * std::cos(x) - std::sin(x)) * e).epsilon(1e-14));

    // Messy composite against central differences.
    const Expression g = parse_expression("x^2.5*exp(-x) + log(x+1)/sqrt(x+2) - tan(x/3)");
    const double h = 1e-6;
    for (double t : {0.3, 0.9, 1.7}) {
        const Jet c = g.eval_jet(t);
        const Jet p = g.eval_jet(t + h);
        const Jet m = g.eval_jet(t - h);
        CHECK(c.d1 == doctest::Approx((p.v - m.v) / (2 * h)).epsilon(1e-8));
        CHECK(c.d2 == doctest::Approx((p.d1 - m.d1) / (2 * h)).epsilon(1e-8));
    }

    // Integer powers stay meaningful for negative bases.
    const Expression cube = parse_expression("(-x)^3");
    CHECK(cube.eval(2.0) == doctest::Approx(-8.0));
    CHECK(cube.eval_jet(2.0).d1 == doctest::Approx(-12.0));

    // Fractional power at the domain edge.
    const Expression frac = parse_expression("x^2.7");
    CHECK(frac.eval_jet(0.0).v == 0.0);
    CHECK(frac.eval_jet(0.0).d1 == 0.0);
    CHECK(frac.eval_jet(1.0).d1 == doctest::Approx(2.7));
}

TEST_CASE("slot references and partial derivatives")
{
    SymbolTable sym;
    sym.slots = {{"y", 0}, {"y'", 1}, {"y@1", 2}, {"y'@1", 3}};
    const Expression chi = parse_expression("y' + 2*y@1*y - sec(x)*y'@1", sym);
    CHECK(chi.slot_count() == 4);
    CHECK(chi.uses_input());

    const double x = 0.4;
    const std::vector<double> slots = {1.3, -0.2, 0.7, 2.1};
    const double sec_x = 1.0 / std::cos(x);
    const double expect = slots[1] + 2.0 * slots[2] * slots[0] - sec_x * slots[3];
    CHECK(chi.eval(x, slots) == doctest::Approx(expect).epsilon(1e-14));

    std::vector<double> partials(4, 0.0);
    CHECK(chi.eval_slot_partials(x, slots, partials) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(partials[0] == doctest::Approx(2.0 * slots[2]).epsilon(1e-14));
    CHECK(partials[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(partials[2] == doctest::Approx(2.0 * slots[0]).epsilon(1e-14));
    CHECK(partials[3] == doctest::Approx(-sec_x).epsilon(1e-14));

    SymbolTable dae;
    dae.slots = {{"y1", 0}, {"D(y1)", 1}};
    const Expression eq = parse_expression("D(y1) + y1^2", dae);
    std::vector<double> p2(2, 0.0);
    const std::vector<double> sv = {3.0, 0.25};
    CHECK(eq.eval_slot_partials(0.0, sv, p2) == doctest::Approx(9.25));
    CHECK(p2[0] == doctest::Approx(6.0));
    CHECK(p2[1] == doctest::Approx(1.0));

    CHECK_THROWS_AS(chi.eval_jet(0.5), std::logic_error);
}

TEST_CASE("named subexpressions inline where referenced")
{
    const Expression forcing = parse_expression("sin(x) + 1");
    SymbolTable sym;
    sym.slots = {{"y", 0}};
    sym.named = {{"forcing", &forcing}};
    const Expression chi = parse_expression("2*forcing - y", sym);
    const std::vector<double> slots = {0.5};
    CHECK(chi.eval(0.3, slots) ==
          doctest::Approx(2.0 * (std::sin(0.3) + 1.0) - 0.5).epsilon(1e-14));
}

TEST_CASE("cancellation identity used by the history-extension problem")
{
    // (x-1)^3 - x^3 + 1 - 3x + 3x^2 is identically zero.
    const Expression e = parse_expression("(x-1)^3 - x^3 + 1 - 3*x + 3*x^2");
    for (int k = 0; k <= 50; ++k)
        CHECK(std::abs(e.eval(k / 50.0)) < 1e-12);
}

TEST_CASE("parse errors carry positions")
{
    auto message_of = [](const std::string& text) {
        try {
            parse_expression(text);
        } catch (const std::invalid_argument& err) {
            return std::string(err.what());
        }
        return std::string();
    };
    CHECK(message_of("1 +").find("position") != std::string::npos);
    CHECK(message_of("(x").find("')'") != std::string::npos);
    CHECK(message_of("foo(x)").find("foo") != std::string::npos);
    CHECK(message_of("z * 2").find("z") != std::string::npos);
    CHECK(message_of("x 2").find("trailing") != std::string::npos);
    CHECK(message_of("gamma(x)").find("constant") != std::string::npos);
    CHECK(message_of("").find("position") != std::string::npos);

    SymbolTable sym;
    sym.slots = {{"y", 0}};
    CHECK_THROWS_AS(parse_expression("y@", sym), std::invalid_argument);
    CHECK_THROWS_AS(parse_expression("y@2", sym), std::invalid_argument); // unknown tag
    CHECK_THROWS_AS(parse_expression("D(q)", sym), std::invalid_argument);
}
