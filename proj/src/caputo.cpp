#include "fpinn/caputo.hpp"

#include <cmath>
#include <stdexcept>

#include "fpinn/gamma.hpp"
#include "fpinn/parallel.hpp"

namespace fpinn {

namespace {

void check_alpha(double alpha)
{
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::domain_error("caputo: alpha must lie in (0, 1)");
}

// mu_k^{(i)} = [(t_i - t_k)^{1-a} - (t_i - t_{k+1})^{1-a}] / (t_{k+1} - t_k),
// the exact integral of (t_i - x)^{-a} over [t_k, t_{k+1}] scaled by 1-a and
// the interval length. Positive for k < i.
double mu(const Grid& g, double one_minus_alpha, int i, int k)
{
    if (k < 0 || k >= i)
        return 0.0;
    const double ti = g.node(i);
    const double left = std::pow(ti - g.node(k), one_minus_alpha);
    const double right = std::pow(ti - g.node(k + 1), one_minus_alpha);
    return (left - right) / (g.node(k + 1) - g.node(k));
}

// Writes row i of the weight matrix into out[0..i]. The nodal weights come
// from regrouping sum_k mu_k (f_{k+1} - f_k): w_k = (mu_{k-1} - mu_k)/Gamma(2-a).
void fill_row(const Grid& g, double alpha, double inv_gamma2a, int i, double* out)
{
    const double oma = 1.0 - alpha;
    double mu_prev = 0.0; // mu_{-1}
    for (int k = 0; k < i; ++k) {
        const double mu_k = mu(g, oma, i, k);
        out[k] = (mu_prev - mu_k) * inv_gamma2a;
        mu_prev = mu_k;
    }
    out[i] = mu_prev * inv_gamma2a; // mu_i = 0
}

} // namespace

FractionalOrder::FractionalOrder(double order)
{
    if (!std::isfinite(order) || !(order > 0.0))
        throw std::domain_error("FractionalOrder: order must be a finite positive real");
    q = order;
    n_int = static_cast<int>(std::floor(order));
    alpha = order - n_int;
}

std::vector<double> l1_row_weights(const Grid& grid, double alpha, int i)
{
    check_alpha(alpha);
    if (i < 0 || i >= grid.size())
        throw std::out_of_range("l1_row_weights: row index outside grid");
    std::vector<double> row(static_cast<size_t>(i) + 1, 0.0);
    if (i == 0)
        return row; // the derivative at the lower terminal vanishes
    fill_row(grid, alpha, 1.0 / gamma(2.0 - alpha), i, row.data());
    return row;
}

CaputoMatrix::CaputoMatrix(const Grid& grid, double alpha, int threads)
    : alpha_(alpha), grid_(grid), weights_(static_cast<size_t>(grid.size()) * grid.size(), 0.0)
{
    check_alpha(alpha);
    const int n1 = grid_.size();
    const double inv_gamma2a = 1.0 / gamma(2.0 - alpha);
    // Row 0 stays zero. Rows are independent.
    parallel_for(n1 - 1, threads, [&](int begin, int end) {
        for (int r = begin; r < end; ++r) {
            const int i = r + 1;
            fill_row(grid_, alpha_, inv_gamma2a, i, weights_.data() + static_cast<size_t>(i) * n1);
        }
    });
}

void CaputoMatrix::apply(std::span<const double> values, std::span<double> out) const
{
    const int n1 = size();
    if (static_cast<int>(values.size()) != n1 || static_cast<int>(out.size()) != n1)
        throw std::invalid_argument("CaputoMatrix::apply: length mismatch with grid");
    out[0] = 0.0;
    for (int i = 1; i < n1; ++i) {
        const double* row = weights_.data() + static_cast<size_t>(i) * n1;
        double acc = 0.0;
        for (int k = 0; k <= i; ++k)
            acc += row[k] * values[static_cast<size_t>(k)];
        out[static_cast<size_t>(i)] = acc;
    }
}

std::vector<double> CaputoMatrix::apply(std::span<const double> values) const
{
    std::vector<double> out(values.size());
    apply(values, out);
    return out;
}

void CaputoMatrix::apply_transpose(std::span<const double> values, std::span<double> out) const
{
    const int n1 = size();
    if (static_cast<int>(values.size()) != n1 || static_cast<int>(out.size()) != n1)
        throw std::invalid_argument("CaputoMatrix::apply_transpose: length mismatch with grid");
    for (int k = 0; k < n1; ++k)
        out[static_cast<size_t>(k)] = 0.0;
    for (int i = 1; i < n1; ++i) {
        const double v = values[static_cast<size_t>(i)];
        if (v == 0.0)
            continue;
        const double* row = weights_.data() + static_cast<size_t>(i) * n1;
        for (int k = 0; k <= i; ++k)
            out[static_cast<size_t>(k)] += row[k] * v;
    }
}

long long CaputoMatrix::assembly_operations() const
{
    const long long n = grid_.intervals();
    return n * (n + 1) / 2 + n; // sum over rows i of (i+1) weight evaluations
}

CaputoMatrix assemble_matrix(const Grid& grid, double alpha)
{
    return CaputoMatrix(grid, alpha);
}

double caputo_monomial(double p, double alpha, double t)
{
    check_alpha(alpha);
    if (p == 0.0)
        return 0.0;
    if (!(p > 0.0))
        throw std::domain_error("caputo_monomial: exponent must be positive");
    if (t < 0.0)
        throw std::domain_error("caputo_monomial: t must be non-negative");
    return gamma(p + 1.0) / gamma(p + 1.0 - alpha) * std::pow(t, p - alpha);
}

std::vector<double> compose_higher_order(const CaputoMatrix& matrix,
                                         std::span<const double> integer_derivative_values)
{
    if (static_cast<int>(integer_derivative_values.size()) != matrix.size())
        throw std::invalid_argument("compose_higher_order: length mismatch with grid");
    return matrix.apply(integer_derivative_values);
}

} // namespace fpinn
