#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "fpinn/residual.hpp"

namespace fpinn {

// Bias-corrected first-order optimizer state. Moments are kept per parameter
// and must match the parameter vector length.
struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    int step_count = 0;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(int dim, double lr = 0.01);
};

// One in-place update. A non-finite gradient is an error and leaves both the
// parameters and the state untouched.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> gradient);

// Bounded memory of (s, y, rho) curvature pairs. Pairs failing the relative
// curvature test y's > 1e-12 ||y|| ||s|| are rejected to keep the implicit
// inverse Hessian positive definite.
class LbfgsState {
public:
    explicit LbfgsState(int memory_size = 10);

    // Returns false when the pair was rejected.
    bool push(std::span<const double> s, std::span<const double> y);
    void clear() { pairs_.clear(); }
    int size() const { return static_cast<int>(pairs_.size()); }
    int memory_size() const { return memory_size_; }

    // s'y / y'y of the newest pair; 1 with empty memory.
    double gamma() const;

    // -H_k * gradient via the two-loop recursion.
    std::vector<double> direction(std::span<const double> gradient) const;

    // H_k assembled densely (row-major dim x dim) by applying the update
    //   H <- (I - rho s y')H(I - rho y s') + rho s s'
    // over the memory window, oldest first, starting from gamma*I. Reference
    // path for validating the two-loop recursion; meant for small dims.
    std::vector<double> dense_inverse_hessian(int dim) const;

private:
    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    int memory_size_;
    std::deque<Pair> pairs_;
};

std::vector<double> lbfgs_direction(const LbfgsState& state, std::span<const double> gradient);

struct LineSearchResult {
    bool success = false;
    double step = 0.0;
    double value = 0.0;           // objective at the accepted step
    int probes = 0;               // objective/gradient evaluations spent
    std::vector<double> gradient; // gradient at the accepted step
};

// Strong-Wolfe search along a descent direction (bracket then bisection
// zoom). Throws when the direction is not a descent direction; returns
// success = false when no acceptable step is found within max_probes.
LineSearchResult line_search(const Objective& objective, std::span<const double> params,
                             std::span<const double> direction, double value0,
                             std::span<const double> grad0, double initial_step,
                             double c1 = 1e-4, double c2 = 0.9, int max_probes = 25);

struct TrainSchedule {
    int adam_epochs = 2000;
    int lbfgs_iterations = 500;
    double learning_rate = 0.01;
    int lbfgs_memory = 10;
    double loss_floor = 1e-14;
    double gradient_floor = 1e-12;
    double divergence_factor = 1e6;
};

struct TrainResult {
    std::vector<double> parameters;
    std::vector<double> loss_trace; // initial loss, then one entry per step
    double final_loss = 0.0;
    double final_gradient_norm = 0.0;
    int adam_steps = 0;
    int lbfgs_steps = 0;
    bool converged = false;          // hit the loss or gradient floor
    bool diverged = false;
    bool line_search_failed = false; // quasi-Newton phase ended early
    std::string stop_reason;
};

// Adam phase followed by an L-BFGS phase. Stops early at the configured
// floors; flags divergence when the loss exceeds divergence_factor times the
// initial loss. A failed line search falls back to steepest descent once
// (after clearing the memory) before giving up.
TrainResult train(const Objective& objective, std::vector<double> initial,
                  const TrainSchedule& schedule);

} // namespace fpinn
