#pragma once

#include <span>
#include <vector>

namespace fpinn {

/// Basis family used by the orthogonal-polynomial network blocks.
enum class PolyBasis { legendre, chebyshev };

/// Fills out[0..n_max] with P_0(x)..P_{n_max}(x) via the three-term
/// recurrence (n+1)P_{n+1} = (2n+1)xP_n - nP_{n-1}. Arguments a hair outside
/// [-1,1] are accepted (tanh keeps in-network inputs inside).
void legendre_eval(int n_max, double x, std::span<double> out);
std::vector<double> legendre_eval(int n_max, double x);

/// Chebyshev values T_0..T_{n_max}, T_{n+1} = 2xT_n - T_{n-1}.
void chebyshev_eval(int n_max, double x, std::span<double> out);
std::vector<double> chebyshev_eval(int n_max, double x);

/// Basis values together with first, second and third derivatives, obtained
/// by differentiating the three-term recurrences. Any of the derivative
/// spans may be empty to skip that order.
void poly_eval_derivs(PolyBasis basis, int n_max, double x,
                      std::span<double> p, std::span<double> d1,
                      std::span<double> d2, std::span<double> d3);

/// Strictly lower-triangular matrix A with V'(x) = A V(x) for the Legendre
/// value vector V = (P_0..P_m): a_{i,j} = 2j+1 at j = i-1, i-3, ..., zero
/// elsewhere. Row-major (m+1) x (m+1).
std::vector<double> legendre_derivative_matrix(int m);

} // namespace fpinn
