#pragma once

#include <span>
#include <vector>

#include "fpinn/grid.hpp"

namespace fpinn {

/// Decomposition of a derivative order q > 0 into q = n_int + alpha with
/// integer n_int and fractional part alpha in [0, 1).
struct FractionalOrder {
    double q = 1.0;
    int n_int = 1;
    double alpha = 0.0;

    explicit FractionalOrder(double order);
    bool is_integer() const { return alpha == 0.0; }
    /// Number of initial values k_0 .. k_{ceil(q)-1} the problem carries.
    int initial_value_count() const { return is_integer() ? n_int : n_int + 1; }
};

/// L1 quadrature weights for the Caputo derivative of order alpha at node
/// t_i: returns w_0..w_i such that sum_k w_k f(t_k) approximates
/// D^alpha f(t_i). Row 0 is all zeros by convention.
std::vector<double> l1_row_weights(const Grid& grid, double alpha, int i);

/// Dense lower-triangular operational matrix of L1 weights. Assembled once,
/// then every fractional differentiation during training is the matrix-vector
/// product apply(). Immutable after construction; safe to share across
/// threads.
class CaputoMatrix {
public:
    CaputoMatrix(const Grid& grid, double alpha, int threads = 1);

    double alpha() const { return alpha_; }
    const Grid& grid() const { return grid_; }
    int size() const { return grid_.size(); }
    double entry(int i, int k) const { return weights_[static_cast<size_t>(i) * size() + k]; }

    /// out_i = sum_k w_k^{(i)} f_k, i.e. samples of D^alpha f at the nodes.
    /// Entry 0 is zero.
    void apply(std::span<const double> values, std::span<double> out) const;
    std::vector<double> apply(std::span<const double> values) const;

    /// Transposed product, used when back-propagating through apply().
    void apply_transpose(std::span<const double> values, std::span<double> out) const;

    /// Weight computations performed during assembly (row i costs i+1).
    long long assembly_operations() const;

private:
    double alpha_;
    Grid grid_;
    std::vector<double> weights_; // row-major (n+1) x (n+1)
};

/// Convenience: CaputoMatrix(grid, alpha).
CaputoMatrix assemble_matrix(const Grid& grid, double alpha);

/// Closed-form Caputo derivative of t^p for p > 0, 0 < alpha < 1:
/// Gamma(p+1)/Gamma(p+1-alpha) * t^(p-alpha). Independent oracle for the L1
/// scheme. p = 0 returns 0 (derivative of a constant).
double caputo_monomial(double p, double alpha, double t);

/// Caputo derivative of total order n_int + alpha via the composition
/// D^(n_int+alpha) f = D^alpha (f^(n_int)): the caller supplies samples of
/// the n_int-th integer derivative at the grid nodes and the alpha-order
/// matrix does the rest.
std::vector<double> compose_higher_order(const CaputoMatrix& matrix,
                                         std::span<const double> integer_derivative_values);

} // namespace fpinn
