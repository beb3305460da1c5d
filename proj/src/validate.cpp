#include "fpinn/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <variant>

#include "fpinn/caputo.hpp"
#include "fpinn/gamma.hpp"
#include "fpinn/network.hpp"
#include "fpinn/optimize.hpp"
#include "fpinn/polynomial.hpp"
#include "fpinn/problem.hpp"
#include "fpinn/residual.hpp"

namespace fpinn {

namespace {

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

SuiteResult gamma_suite() {
    SuiteResult r{"gamma special values", true, ""};
    const double pi = std::numbers::pi;
    const struct {
        double x, expected;
    } known[] = {
        {0.5, std::sqrt(pi)}, {1.0, 1.0},   {2.0, 1.0},
        {3.0, 2.0},           {6.0, 120.0}, {4.5, 6.5625 * std::sqrt(pi)},
    };
    double worst = 0.0;
    for (const auto& k : known)
        worst = std::max(worst, std::abs(fpinn::gamma(k.x) / k.expected - 1.0));
    for (double x : {0.3, 0.71, 0.999}) {
        const double lhs = fpinn::gamma(x) * fpinn::gamma(1.0 - x);
        const double rhs = pi / std::sin(pi * x);
        worst = std::max(worst, std::abs(lhs / rhs - 1.0));
    }
    r.passed = worst < 1e-12;
    r.detail = "worst relative error " + num(worst);
    return r;
}

SuiteResult monomial_suite() {
    SuiteResult r{"fractional derivative of t^2", true, ""};
    std::ostringstream detail;
    for (double alpha : {0.3, 0.5, 0.7}) {
        std::vector<double> errs;
        for (int n : {25, 50, 100, 200}) {
            const Grid g = Grid::uniform(0.0, 1.0, n);
            const CaputoMatrix m(g, alpha);
            std::vector<double> f(g.size());
            for (int i = 0; i < g.size(); ++i) f[i] = g.nodes()[i] * g.nodes()[i];
            const std::vector<double> d = m.apply(f);
            double e = 0.0;
            for (int i = 0; i < g.size(); ++i)
                e = std::max(e, std::abs(d[i] - caputo_monomial(2.0, alpha, g.nodes()[i])));
            errs.push_back(e);
        }
        double order = 0.0;
        for (size_t k = 0; k + 1 < errs.size(); ++k) order += std::log2(errs[k] / errs[k + 1]);
        order /= static_cast<double>(errs.size() - 1);
        const bool ok = errs[2] <= 2e-2 && std::abs(order - (2.0 - alpha)) <= 0.35;
        if (!ok) r.passed = false;
        detail << "alpha " << alpha << ": err(n=100) " << num(errs[2]) << ", order " << num(order)
               << "; ";
    }
    r.detail = detail.str();
    return r;
}

SuiteResult telescoping_suite(std::uint64_t seed) {
    SuiteResult r{"weight rows annihilate constants", true, ""};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> alpha_dist(0.05, 0.95);
    std::uniform_int_distribution<int> n_dist(8, 120);
    std::uniform_real_distribution<double> lo_dist(-1.0, 1.0);
    std::uniform_real_distribution<double> len_dist(0.5, 3.0);
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const double lo = lo_dist(rng);
        const int n = n_dist(rng);
        const Grid g = trial % 3 == 0 ? Grid::graded(lo, lo + len_dist(rng), n, 2.0)
                                      : Grid::uniform(lo, lo + len_dist(rng), n);
        const CaputoMatrix m(g, alpha_dist(rng));
        double w = 0.0;
        if (!rows_telescope(m.size(), [&](int i, int k) { return m.entry(i, k); }, 1e-12, &w))
            r.passed = false;
        worst = std::max(worst, w);
    }
    r.detail = "worst scaled row sum " + num(worst);
    return r;
}

SuiteResult basis_suite(std::uint64_t seed) {
    SuiteResult r{"orthogonal basis identities", true, ""};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> x_dist(-1.0, 1.0);
    const int n_max = 12;
    double worst = 0.0;

    const std::vector<double> at_one = legendre_eval(n_max, 1.0);
    const std::vector<double> at_neg = legendre_eval(n_max, -1.0);
    for (int n = 0; n <= n_max; ++n) {
        worst = std::max(worst, std::abs(at_one[n] - 1.0));
        worst = std::max(worst, std::abs(at_neg[n] - (n % 2 == 0 ? 1.0 : -1.0)));
    }
    for (int trial = 0; trial < 50; ++trial) {
        const double x = x_dist(rng);
        const std::vector<double> p = legendre_eval(n_max, x);
        for (int n = 1; n < n_max; ++n) {
            const double res =
                (n + 1.0) * p[n + 1] - (2.0 * n + 1.0) * x * p[n] + static_cast<double>(n) * p[n - 1];
            worst = std::max(worst, std::abs(res));
        }
        const double theta = std::acos(x);
        const std::vector<double> t = chebyshev_eval(n_max, x);
        for (int n = 0; n <= n_max; ++n)
            worst = std::max(worst, std::abs(t[n] - std::cos(n * theta)));
    }
    r.passed = worst < 1e-12;
    r.detail = "worst identity residual " + num(worst);
    return r;
}

SuiteResult derivative_matrix_suite(std::uint64_t seed) {
    SuiteResult r{"basis derivative matrix", true, ""};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const int m = 9;
    const std::vector<double> a = legendre_derivative_matrix(m);
    std::vector<double> c(m + 1);
    for (double& v : c) v = dist(rng);
    // coefficients of p' from c' = A^T c, checked against differentiated values
    std::vector<double> cd(m + 1, 0.0);
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m; ++j) cd[j] += a[static_cast<size_t>(i) * (m + 1) + j] * c[i];
    double worst = 0.0;
    std::vector<double> p(m + 1), d1(m + 1);
    for (int trial = 0; trial < 40; ++trial) {
        const double x = dist(rng);
        poly_eval_derivs(PolyBasis::legendre, m, x, p, d1, {}, {});
        double lhs = 0.0, rhs = 0.0;
        for (int i = 0; i <= m; ++i) {
            lhs += cd[i] * p[i];
            rhs += c[i] * d1[i];
        }
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    r.passed = worst < 1e-10;
    r.detail = "worst mismatch " + num(worst);
    return r;
}

SuiteResult network_gradient_suite(std::uint64_t seed) {
    SuiteResult r{"network gradient finite differences", true, ""};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> x_dist(-0.8, 0.8);
    const std::vector<std::vector<std::string>> stacks = {
        {"legendre:8", "dense:8:tanh", "dense:1:identity"},
        {"legendre:6", "dense:5:tanh", "dense:5:tanh", "dense:2:identity"},
        {"chebyshev:7", "dense:4:tanh", "dense:1:identity"},
    };
    double worst = 0.0;
    for (const auto& tokens : stacks) {
        Network net(parse_layer_stack(tokens), -1.0, 1.0);
        net.init_parameters(seed ^ 0x9e3779b97f4a7c15ull);
        const int np = net.parameter_count();
        const int nout = net.output_dim();
        std::vector<double> av(nout, 0.0);
        for (int i = 0; i < nout; ++i) av[i] = 1.0 + 0.25 * i;

        for (int point = 0; point < 3; ++point) {
            const double x = x_dist(rng);
            EvalCache cache;
            net.forward_cached(x, 1, cache);
            std::vector<double> grad(np, 0.0);
            net.accumulate_gradient(cache, av, {}, {}, grad);

            std::vector<double> params(net.parameters().begin(), net.parameters().end());
            auto weighted = [&](std::span<const double> p) {
                Network probe = net;
                probe.set_parameters(p);
                const std::vector<double> v = probe.forward(x);
                double s = 0.0;
                for (int i = 0; i < nout; ++i) s += av[i] * v[i];
                return s;
            };
            std::uniform_int_distribution<int> pick(0, np - 1);
            for (int probe = 0; probe < 12; ++probe) {
                const int k = pick(rng);
                const double h = 1e-6 * std::max(1.0, std::abs(params[k]));
                std::vector<double> plus = params, minus = params;
                plus[k] += h;
                minus[k] -= h;
                const double fd = (weighted(plus) - weighted(minus)) / (2.0 * h);
                const double scale = std::max({1.0, std::abs(fd), std::abs(grad[k])});
                worst = std::max(worst, std::abs(grad[k] - fd) / scale);
            }
            // input derivative against a centered difference of the value
            const DerivativeBundle b = net.forward_with_input_derivatives(x, 1);
            const double h = 1e-6;
            const std::vector<double> vp = net.forward(x + h);
            const std::vector<double> vm = net.forward(x - h);
            for (int i = 0; i < nout; ++i) {
                const double fd = (vp[i] - vm[i]) / (2.0 * h);
                const double scale = std::max({1.0, std::abs(fd), std::abs(b.d1[i])});
                worst = std::max(worst, std::abs(b.d1[i] - fd) / scale);
            }
        }
    }
    r.passed = worst < 1e-6;
    r.detail = "worst relative deviation " + num(worst);
    return r;
}

SuiteResult two_loop_suite(std::uint64_t seed) {
    SuiteResult r{"lbfgs two-loop equivalence", true, ""};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 1 + static_cast<int>(rng() % 5);
        const int mem = 1 + static_cast<int>(rng() % 3);
        LbfgsState state(mem);
        int pushed = 0;
        while (pushed < mem + 1) {
            std::vector<double> s(dim), y(dim);
            for (int i = 0; i < dim; ++i) {
                s[i] = dist(rng);
                y[i] = s[i] + 0.4 * dist(rng);
            }
            if (state.push(s, y)) ++pushed;
        }
        std::vector<double> g(dim);
        for (double& v : g) v = dist(rng);
        const std::vector<double> d = state.direction(g);
        const std::vector<double> h = state.dense_inverse_hessian(dim);
        for (int i = 0; i < dim; ++i) {
            double hi = 0.0;
            for (int j = 0; j < dim; ++j) hi += h[static_cast<size_t>(i) * dim + j] * g[j];
            worst = std::max(worst, std::abs(d[i] + hi));
        }
    }
    r.passed = worst < 1e-10;
    r.detail = "worst direction mismatch " + num(worst);
    return r;
}

double fdde_order(const FddeProblem& p, int n) {
    const Grid g1 = Grid::uniform(p.lo, p.hi, n);
    const Grid g2 = Grid::uniform(p.lo, p.hi, 2 * n);
    const CaputoMatrix m1(g1, p.order.alpha);
    const CaputoMatrix m2(g2, p.order.alpha);
    const double e1 = max_abs(fdde_exact_residuals(p, g1, &m1));
    const double e2 = max_abs(fdde_exact_residuals(p, g2, &m2));
    return std::log2(e1 / e2);
}

double dae_order(const DaeSystem& s, int n) {
    const Grid g1 = Grid::uniform(s.lo, s.hi, n);
    const Grid g2 = Grid::uniform(s.lo, s.hi, 2 * n);
    const CaputoMatrix m1(g1, s.alpha);
    const CaputoMatrix m2(g2, s.alpha);
    double e1 = 0.0, e2 = 0.0;
    for (const auto& row : dae_exact_residuals(s, g1, &m1)) e1 = std::max(e1, max_abs(row));
    for (const auto& row : dae_exact_residuals(s, g2, &m2)) e2 = std::max(e2, max_abs(row));
    return std::log2(e1 / e2);
}

SuiteResult exact_residual_suite() {
    SuiteResult r{"exact solutions annihilate residuals", true, ""};
    std::ostringstream detail;
    double worst = 0.0;
    for (int id : {1, 2, 3, 4}) {
        const auto p = std::get<FddeProblem>(builtin_problem(id));
        const Grid g = Grid::uniform(p.lo, p.hi, 64);
        worst = std::max(worst, max_abs(fdde_exact_residuals(p, g, nullptr)));
    }
    {
        const auto s = std::get<DaeSystem>(builtin_problem(7));
        const Grid g = Grid::uniform(s.lo, s.hi, 64);
        for (const auto& row : dae_exact_residuals(s, g, nullptr))
            worst = std::max(worst, max_abs(row));
    }
    if (worst > 1e-8) r.passed = false;
    detail << "integer-order worst residual " << num(worst) << "; ";

    for (int id : {5, 6}) {
        const auto p = std::get<FddeProblem>(builtin_problem(id));
        const double order = fdde_order(p, 64);
        const double target = 2.0 - p.order.alpha;
        if (std::abs(order - target) > 0.35) r.passed = false;
        detail << "example " << id << " order " << num(order) << "; ";
    }
    {
        const auto s = std::get<DaeSystem>(builtin_problem(8));
        const double order = dae_order(s, 64);
        if (std::abs(order - (2.0 - s.alpha)) > 0.35) r.passed = false;
        detail << "example 8 order " << num(order);
    }
    r.detail = detail.str();
    return r;
}

} // namespace

bool rows_telescope(int size, const std::function<double(int, int)>& entry, double rel_tol,
                    double* worst) {
    double worst_scaled = 0.0;
    bool ok = true;
    for (int i = 1; i < size; ++i) {
        double sum = 0.0, max_mag = 0.0;
        for (int k = 0; k <= i; ++k) {
            const double w = entry(i, k);
            sum += w;
            max_mag = std::max(max_mag, std::abs(w));
        }
        const double scaled = max_mag > 0.0 ? std::abs(sum) / max_mag : std::abs(sum);
        worst_scaled = std::max(worst_scaled, scaled);
        if (scaled > rel_tol) ok = false;
    }
    if (worst) *worst = worst_scaled;
    return ok;
}

std::vector<SuiteResult> run_validation(std::uint64_t seed) {
    std::vector<SuiteResult> results;
    results.push_back(gamma_suite());
    results.push_back(monomial_suite());
    results.push_back(telescoping_suite(seed));
    results.push_back(basis_suite(seed + 1));
    results.push_back(derivative_matrix_suite(seed + 2));
    results.push_back(network_gradient_suite(seed + 3));
    results.push_back(two_loop_suite(seed + 4));
    results.push_back(exact_residual_suite());
    return results;
}

bool all_passed(const std::vector<SuiteResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return true;
}

} // namespace fpinn
