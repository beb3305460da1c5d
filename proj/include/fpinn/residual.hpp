#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fpinn/caputo.hpp"
#include "fpinn/network.hpp"
#include "fpinn/problem.hpp"

namespace fpinn {

struct LossConfig {
    enum class Reduction { paper_l2_norm, mean_square };
    double lambda = 10.0;
    Reduction reduction = Reduction::paper_l2_norm;
};

// Collocation residuals R_i = [D^q phi]_i - chi(t_i, slots) for i = 1..n;
// entry 0 is structurally zero and excluded from the loss. The matrix is
// required for fractional orders and ignored for integer ones. With
// use_history true, a delay landing below the domain uses the problem's
// history function and an absent history is an error; with false the network
// itself is evaluated at the out-of-domain point.
std::vector<double> fdde_residuals(const FddeProblem& problem, const Network& net,
                                   const Grid& grid, const CaputoMatrix* matrix,
                                   bool use_history = true);

// B_p = phi^(p)(lo) - k_p for each supplied initial value.
std::vector<double> fdde_boundary(const FddeProblem& problem, const Network& net);

// paper_l2_norm: lambda * ||R||_2 + sum B_p^2 (rows 1..n).
// mean_square:   lambda * mean(R_i^2)  + sum B_p^2.
double fdde_loss(std::span<const double> residuals, std::span<const double> boundary,
                 const LossConfig& cfg);

// One residual vector per equation, rows 1..n, entry 0 zero.
std::vector<std::vector<double>> dae_residuals(const DaeSystem& system,
                                               const std::vector<Network>& nets,
                                               const Grid& grid,
                                               const CaputoMatrix* matrix);

std::vector<double> dae_boundary(const DaeSystem& system, const std::vector<Network>& nets);

// lambda * (1/m) * sum_j ||R_j||_2 + sum_j B_j^2 (mean-square variant mirrors
// fdde_loss per equation).
double dae_loss(const std::vector<std::vector<double>>& residuals,
                std::span<const double> boundary, const LossConfig& cfg);

// Residuals with the closed-form solution substituted for the network: the
// same assembly path, sourcing values and derivatives from problem.exact
// (history used below the domain when supplied). Quantifies the pure
// discretization error of the fractional operator.
std::vector<double> fdde_exact_residuals(const FddeProblem& problem, const Grid& grid,
                                         const CaputoMatrix* matrix);

std::vector<std::vector<double>> dae_exact_residuals(const DaeSystem& system, const Grid& grid,
                                                     const CaputoMatrix* matrix);

// Differentiable training objective over a flat parameter vector.
class Objective {
public:
    virtual ~Objective() = default;
    virtual int parameter_count() const = 0;
    virtual int state_count() const = 0;
    virtual double value(std::span<const double> params) const = 0;
    virtual double value_and_gradient(std::span<const double> params,
                                      std::span<double> grad) const = 0;
    virtual std::vector<double> initial_parameters(std::uint64_t seed) const = 0;
    // Predicted state values at one input point.
    virtual std::vector<double> predict(std::span<const double> params, double x) const = 0;
    virtual double matrix_assembly_seconds() const = 0;
};

class FddeObjective : public Objective {
public:
    FddeObjective(FddeProblem problem, Grid grid, LossConfig cfg = {}, int threads = 1,
                  bool use_history = true);

    int parameter_count() const override;
    int state_count() const override { return 1; }
    double value(std::span<const double> params) const override;
    double value_and_gradient(std::span<const double> params,
                              std::span<double> grad) const override;
    std::vector<double> initial_parameters(std::uint64_t seed) const override;
    std::vector<double> predict(std::span<const double> params, double x) const override;
    double matrix_assembly_seconds() const override { return assembly_seconds_; }

    const FddeProblem& problem() const { return problem_; }
    const Grid& grid() const { return grid_; }
    const CaputoMatrix* matrix() const { return matrix_.get(); }

private:
    FddeProblem problem_;
    Grid grid_;
    LossConfig cfg_;
    int threads_;
    bool use_history_;
    Network proto_;
    std::unique_ptr<CaputoMatrix> matrix_;
    double assembly_seconds_ = 0.0;
};

class DaeObjective : public Objective {
public:
    DaeObjective(DaeSystem system, Grid grid, LossConfig cfg = {}, int threads = 1);

    int parameter_count() const override;
    int state_count() const override { return system_.m; }
    double value(std::span<const double> params) const override;
    double value_and_gradient(std::span<const double> params,
                              std::span<double> grad) const override;
    std::vector<double> initial_parameters(std::uint64_t seed) const override;
    std::vector<double> predict(std::span<const double> params, double x) const override;
    double matrix_assembly_seconds() const override { return assembly_seconds_; }

    const DaeSystem& system() const { return system_; }
    const Grid& grid() const { return grid_; }

private:
    DaeSystem system_;
    Grid grid_;
    LossConfig cfg_;
    int threads_;
    std::vector<Network> protos_;
    std::unique_ptr<CaputoMatrix> matrix_;
    double assembly_seconds_ = 0.0;
};

} // namespace fpinn
