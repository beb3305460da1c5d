#include "fpinn/polynomial.hpp"

#include <cmath>
#include <stdexcept>

namespace fpinn {

namespace {

void check_degree(int n_max)
{
    if (n_max < 0)
        throw std::invalid_argument("poly: maximum degree must be non-negative");
}

// Output spans are either empty (order not requested) or sized n_max + 1.
void check_span(std::span<double> s, int n_max)
{
    if (!s.empty() && s.size() != static_cast<size_t>(n_max) + 1)
        throw std::invalid_argument("poly: output span has wrong size");
}

} // namespace

void legendre_eval(int n_max, double x, std::span<double> out)
{
    check_degree(n_max);
    out[0] = 1.0;
    if (n_max == 0)
        return;
    out[1] = x;
    for (int n = 1; n < n_max; ++n)
        out[static_cast<size_t>(n) + 1] =
            ((2 * n + 1) * x * out[static_cast<size_t>(n)] - n * out[static_cast<size_t>(n) - 1]) / (n + 1);
}

std::vector<double> legendre_eval(int n_max, double x)
{
    std::vector<double> out(static_cast<size_t>(n_max) + 1);
    legendre_eval(n_max, x, out);
    return out;
}

void chebyshev_eval(int n_max, double x, std::span<double> out)
{
    check_degree(n_max);
    out[0] = 1.0;
    if (n_max == 0)
        return;
    out[1] = x;
    for (int n = 1; n < n_max; ++n)
        out[static_cast<size_t>(n) + 1] =
            2.0 * x * out[static_cast<size_t>(n)] - out[static_cast<size_t>(n) - 1];
}

std::vector<double> chebyshev_eval(int n_max, double x)
{
    std::vector<double> out(static_cast<size_t>(n_max) + 1);
    chebyshev_eval(n_max, x, out);
    return out;
}

void poly_eval_derivs(PolyBasis basis, int n_max, double x,
                      std::span<double> p, std::span<double> d1,
                      std::span<double> d2, std::span<double> d3)
{
    check_degree(n_max);
    if (p.size() != static_cast<size_t>(n_max) + 1)
        throw std::invalid_argument("poly: value span has wrong size");
    check_span(d1, n_max);
    check_span(d2, n_max);
    check_span(d3, n_max);
    const bool w1 = !d1.empty();
    const bool w2 = !d2.empty();
    const bool w3 = !d3.empty();
    p[0] = 1.0;
    if (w1) d1[0] = 0.0;
    if (w2) d2[0] = 0.0;
    if (w3) d3[0] = 0.0;
    if (n_max == 0)
        return;
    p[1] = x;
    if (w1) d1[1] = 1.0;
    if (w2) d2[1] = 0.0;
    if (w3) d3[1] = 0.0;

    // Differentiated recurrences. Legendre:
    //   (n+1) P_{n+1}    = (2n+1)(x P_n)             - n P_{n-1}
    //   (n+1) P'_{n+1}   = (2n+1)(P_n + x P'_n)      - n P'_{n-1}
    //   (n+1) P''_{n+1}  = (2n+1)(2P'_n + x P''_n)   - n P''_{n-1}
    //   (n+1) P'''_{n+1} = (2n+1)(3P''_n + x P'''_n) - n P'''_{n-1}
    // Chebyshev mirrors with coefficients (2, 1) instead of (2n+1, n)/(n+1).
    for (int n = 1; n < n_max; ++n) {
        const size_t i = static_cast<size_t>(n);
        if (basis == PolyBasis::legendre) {
            const double a = 2.0 * n + 1.0, b = static_cast<double>(n), c = n + 1.0;
            p[i + 1] = (a * x * p[i] - b * p[i - 1]) / c;
            if (w1) d1[i + 1] = (a * (p[i] + x * d1[i]) - b * d1[i - 1]) / c;
            if (w2) d2[i + 1] = (a * (2.0 * d1[i] + x * d2[i]) - b * d2[i - 1]) / c;
            if (w3) d3[i + 1] = (a * (3.0 * d2[i] + x * d3[i]) - b * d3[i - 1]) / c;
        } else {
            p[i + 1] = 2.0 * x * p[i] - p[i - 1];
            if (w1) d1[i + 1] = 2.0 * (p[i] + x * d1[i]) - d1[i - 1];
            if (w2) d2[i + 1] = 2.0 * (2.0 * d1[i] + x * d2[i]) - d2[i - 1];
            if (w3) d3[i + 1] = 2.0 * (3.0 * d2[i] + x * d3[i]) - d3[i - 1];
        }
    }
}

std::vector<double> legendre_derivative_matrix(int m)
{
    if (m < 1)
        throw std::invalid_argument("legendre_derivative_matrix: order must be >= 1");
    const size_t dim = static_cast<size_t>(m) + 1;
    std::vector<double> a(dim * dim, 0.0);
    for (int i = 1; i <= m; ++i)
        for (int j = i - 1; j >= 0; j -= 2)
            a[static_cast<size_t>(i) * dim + j] = 2.0 * j + 1.0;
    return a;
}

} // namespace fpinn
