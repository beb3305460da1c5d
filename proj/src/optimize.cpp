#include "fpinn/optimize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fpinn {

namespace {

double dot(std::span<const double> a, std::span<const double> b)
{
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> v)
{
    return std::sqrt(dot(v, v));
}

} // namespace

AdamState::AdamState(int dim, double lr)
    : first_moment(static_cast<size_t>(dim), 0.0),
      second_moment(static_cast<size_t>(dim), 0.0), learning_rate(lr)
{
    if (dim < 0)
        throw std::invalid_argument("adam: negative dimension");
    if (!(lr > 0.0))
        throw std::invalid_argument("adam: learning rate must be positive");
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> gradient)
{
    const size_t dim = params.size();
    if (gradient.size() != dim || state.first_moment.size() != dim ||
        state.second_moment.size() != dim)
        throw std::invalid_argument("adam: shape mismatch");
    if (!(state.beta1 > 0.0 && state.beta1 < 1.0 && state.beta2 > 0.0 && state.beta2 < 1.0))
        throw std::invalid_argument("adam: moment decay rates must lie in (0, 1)");
    for (double g : gradient)
        if (!std::isfinite(g))
            throw std::runtime_error("adam: non-finite gradient");

    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
    for (size_t i = 0; i < dim; ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * gradient[i];
        v = state.beta2 * v + (1.0 - state.beta2) * gradient[i] * gradient[i];
        params[i] -= state.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + state.epsilon);
    }
}

LbfgsState::LbfgsState(int memory_size) : memory_size_(memory_size)
{
    if (memory_size < 1)
        throw std::invalid_argument("lbfgs: memory size must be positive");
}

bool LbfgsState::push(std::span<const double> s, std::span<const double> y)
{
    if (s.size() != y.size() || s.empty())
        throw std::invalid_argument("lbfgs: pair shape mismatch");
    if (!pairs_.empty() && pairs_.front().s.size() != s.size())
        throw std::invalid_argument("lbfgs: pair dimension changed");
    const double sy = dot(s, y);
    if (sy <= 1e-12 * norm2(s) * norm2(y))
        return false;
    Pair pair;
    pair.s.assign(s.begin(), s.end());
    pair.y.assign(y.begin(), y.end());
    pair.rho = 1.0 / sy;
    pairs_.push_back(std::move(pair));
    if (static_cast<int>(pairs_.size()) > memory_size_)
        pairs_.pop_front();
    return true;
}

double LbfgsState::gamma() const
{
    if (pairs_.empty())
        return 1.0;
    const Pair& p = pairs_.back();
    return dot(p.s, p.y) / dot(p.y, p.y);
}

std::vector<double> LbfgsState::direction(std::span<const double> gradient) const
{
    if (!pairs_.empty() && pairs_.front().s.size() != gradient.size())
        throw std::invalid_argument("lbfgs: gradient dimension mismatch");
    std::vector<double> q(gradient.begin(), gradient.end());
    std::vector<double> alpha(pairs_.size(), 0.0);
    for (size_t i = pairs_.size(); i-- > 0;) {
        const Pair& p = pairs_[i];
        alpha[i] = p.rho * dot(p.s, q);
        for (size_t k = 0; k < q.size(); ++k)
            q[k] -= alpha[i] * p.y[k];
    }
    const double g = gamma();
    for (double& v : q)
        v *= g;
    for (size_t i = 0; i < pairs_.size(); ++i) {
        const Pair& p = pairs_[i];
        const double beta = p.rho * dot(p.y, q);
        for (size_t k = 0; k < q.size(); ++k)
            q[k] += (alpha[i] - beta) * p.s[k];
    }
    for (double& v : q)
        v = -v;
    return q;
}

std::vector<double> LbfgsState::dense_inverse_hessian(int dim) const
{
    if (!pairs_.empty() && pairs_.front().s.size() != static_cast<size_t>(dim))
        throw std::invalid_argument("lbfgs: dimension mismatch");
    const size_t d = static_cast<size_t>(dim);
    std::vector<double> h(d * d, 0.0);
    const double g = gamma();
    for (size_t i = 0; i < d; ++i)
        h[i * d + i] = g;
    std::vector<double> vh(d * d, 0.0), next(d * d, 0.0);
    for (const Pair& p : pairs_) {
        // vh = (I - rho s y') H
        for (size_t r = 0; r < d; ++r)
            for (size_t c = 0; c < d; ++c) {
                double acc = h[r * d + c];
                for (size_t k = 0; k < d; ++k)
                    acc -= p.rho * p.s[r] * p.y[k] * h[k * d + c];
                vh[r * d + c] = acc;
            }
        // next = vh (I - rho y s') + rho s s'
        for (size_t r = 0; r < d; ++r)
            for (size_t c = 0; c < d; ++c) {
                double acc = vh[r * d + c];
                for (size_t k = 0; k < d; ++k)
                    acc -= vh[r * d + k] * p.rho * p.y[k] * p.s[c];
                next[r * d + c] = acc + p.rho * p.s[r] * p.s[c];
            }
        h = next;
    }
    return h;
}

std::vector<double> lbfgs_direction(const LbfgsState& state, std::span<const double> gradient)
{
    return state.direction(gradient);
}

LineSearchResult line_search(const Objective& objective, std::span<const double> params,
                             std::span<const double> direction, double value0,
                             std::span<const double> grad0, double initial_step, double c1,
                             double c2, int max_probes)
{
    const size_t dim = params.size();
    if (direction.size() != dim || grad0.size() != dim)
        throw std::invalid_argument("line search: shape mismatch");
    if (!(initial_step > 0.0))
        throw std::invalid_argument("line search: initial step must be positive");
    const double d0 = dot(grad0, direction);
    if (!(d0 < 0.0))
        throw std::invalid_argument("line search: not a descent direction");

    LineSearchResult res;
    std::vector<double> x(dim), g(dim);
    auto probe = [&](double a, double& f, double& slope) {
        for (size_t i = 0; i < dim; ++i)
            x[i] = params[i] + a * direction[i];
        f = objective.value_and_gradient(x, g);
        slope = dot(g, direction);
        ++res.probes;
    };
    auto accept = [&](double a, double f) {
        res.success = true;
        res.step = a;
        res.value = f;
        res.gradient = g;
    };
    // Fallback for the regime where objective differences sink below
    // rounding and the strict tests reject every probe: remember the best
    // non-ascending probe, preferring one that also meets the curvature
    // condition, and take it when the probe budget runs out. Memory hygiene
    // is preserved downstream by the curvature filter on (s, y) pairs.
    struct Candidate {
        bool set = false;
        double a = 0.0, f = 0.0;
        std::vector<double> g;
    };
    Candidate relaxed_wolfe, relaxed_any;
    auto remember_relaxed = [&](double a, double f, double slope) {
        if (!std::isfinite(f) || f > value0) return;
        auto keep = [&](Candidate& c) {
            if (c.set && f >= c.f) return;
            c.set = true;
            c.a = a;
            c.f = f;
            c.g = g;
        };
        keep(relaxed_any);
        if (std::abs(slope) <= -c2 * d0) keep(relaxed_wolfe);
    };
    auto accept_relaxed = [&]() {
        Candidate& c = relaxed_wolfe.set ? relaxed_wolfe : relaxed_any;
        if (!c.set) return false;
        res.success = true;
        res.step = c.a;
        res.value = c.f;
        res.gradient = std::move(c.g);
        return true;
    };

    // Safeguarded cubic step inside (lo, hi) from Hermite data at both ends;
    // falls back to the midpoint when the cubic has no usable minimizer.
    auto interior = [](double alo, double flo, double slo, double ahi, double fhi, double shi) {
        const double lo = std::min(alo, ahi), hi = std::max(alo, ahi);
        const double width = hi - lo;
        double a = lo + 0.5 * width;
        const double d1 = slo + shi - 3.0 * (flo - fhi) / (alo - ahi);
        const double disc = d1 * d1 - slo * shi;
        if (disc >= 0.0) {
            const double d2 = std::copysign(std::sqrt(disc), ahi - alo);
            const double denom = shi - slo + 2.0 * d2;
            if (denom != 0.0) {
                const double cand = ahi - (ahi - alo) * (shi + d2 - d1) / denom;
                if (std::isfinite(cand)) a = cand;
            }
        }
        return std::clamp(a, lo + 0.1 * width, hi - 0.1 * width);
    };

    auto zoom = [&](double alo, double flo, double slo, double ahi, double fhi, double shi) {
        while (res.probes < max_probes) {
            const double a = interior(alo, flo, slo, ahi, fhi, shi);
            double f, slope;
            probe(a, f, slope);
            remember_relaxed(a, f, slope);
            // When the Armijo increment is below rounding, sufficient decrease
            // is unmeasurable; take any curvature point that does not ascend.
            const bool saturated = c1 * std::abs(a * d0) <=
                                   8.0 * std::numeric_limits<double>::epsilon() *
                                       std::max(std::abs(value0), std::abs(flo));
            if (saturated && std::isfinite(f) && f <= value0 && std::abs(slope) <= -c2 * d0) {
                accept(a, f);
                return;
            }
            if (!std::isfinite(f) || f > value0 + c1 * a * d0 || f >= flo) {
                ahi = a;
                fhi = f;
                shi = slope;
                continue;
            }
            if (std::abs(slope) <= -c2 * d0) {
                accept(a, f);
                return;
            }
            if (slope * (ahi - alo) >= 0.0) {
                ahi = alo;
                fhi = flo;
                shi = slo;
            }
            alo = a;
            flo = f;
            slo = slope;
        }
    };

    double alpha_prev = 0.0;
    double f_prev = value0;
    double slope_prev = d0;
    double alpha = initial_step;
    bool first = true;
    while (res.probes < max_probes) {
        double f, slope;
        probe(alpha, f, slope);
        remember_relaxed(alpha, f, slope);
        if (!std::isfinite(f) || f > value0 + c1 * alpha * d0 || (!first && f >= f_prev)) {
            zoom(alpha_prev, f_prev, slope_prev, alpha, f, slope);
            break;
        }
        if (std::abs(slope) <= -c2 * d0) {
            accept(alpha, f);
            return res;
        }
        if (slope >= 0.0) {
            zoom(alpha, f, slope, alpha_prev, f_prev, slope_prev);
            break;
        }
        alpha_prev = alpha;
        f_prev = f;
        slope_prev = slope;
        alpha = std::min(2.0 * alpha, 1e10);
        first = false;
    }
    if (!res.success) accept_relaxed();
    return res;
}

TrainResult train(const Objective& objective, std::vector<double> initial,
                  const TrainSchedule& schedule)
{
    if (static_cast<int>(initial.size()) != objective.parameter_count())
        throw std::invalid_argument("train: parameter vector length mismatch");
    if (schedule.adam_epochs < 0 || schedule.lbfgs_iterations < 0)
        throw std::invalid_argument("train: negative iteration counts");

    TrainResult res;
    std::vector<double>& params = initial;
    std::vector<double> grad(params.size(), 0.0);
    double loss = objective.value_and_gradient(params, grad);
    const double initial_loss = loss;
    double gnorm = norm2(grad);
    res.loss_trace.push_back(loss);

    auto should_stop = [&]() {
        if (!std::isfinite(loss)) {
            res.diverged = true;
            res.stop_reason = "diverged: non-finite loss";
            return true;
        }
        if (initial_loss > 0.0 && loss > schedule.divergence_factor * initial_loss) {
            res.diverged = true;
            res.stop_reason = "diverged: loss " + std::to_string(loss) + " from " +
                              std::to_string(initial_loss);
            return true;
        }
        if (loss < schedule.loss_floor) {
            res.converged = true;
            res.stop_reason = "loss below floor";
            return true;
        }
        if (gnorm < schedule.gradient_floor) {
            res.converged = true;
            res.stop_reason = "gradient norm below floor";
            return true;
        }
        return false;
    };

    bool stopped = should_stop();

    AdamState adam(static_cast<int>(params.size()), schedule.learning_rate);
    for (int e = 0; e < schedule.adam_epochs && !stopped; ++e) {
        adam_step(adam, params, grad);
        loss = objective.value_and_gradient(params, grad);
        gnorm = norm2(grad);
        res.loss_trace.push_back(loss);
        ++res.adam_steps;
        stopped = should_stop();
    }

    LbfgsState memory(schedule.lbfgs_memory);
    for (int it = 0; it < schedule.lbfgs_iterations && !stopped; ++it) {
        std::vector<double> dir = memory.direction(grad);
        if (!(dot(grad, dir) < 0.0)) {
            memory.clear();
            dir.assign(grad.begin(), grad.end());
            for (double& v : dir)
                v = -v;
        }
        const double step0 =
            memory.size() > 0 ? 1.0 : std::min(1.0, 1.0 / std::max(1e-12, gnorm));
        LineSearchResult ls = line_search(objective, params, dir, loss, grad, step0);
        if (!ls.success && memory.size() > 0) {
            // Retry once along steepest descent with a fresh memory.
            memory.clear();
            dir.assign(grad.begin(), grad.end());
            for (double& v : dir)
                v = -v;
            ls = line_search(objective, params, dir, loss, grad,
                             std::min(1.0, 1.0 / std::max(1e-12, gnorm)));
        }
        if (!ls.success) {
            res.line_search_failed = true;
            res.stop_reason = "line search failed";
            break;
        }
        std::vector<double> s(params.size()), y(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            s[i] = ls.step * dir[i];
            params[i] += s[i];
            y[i] = ls.gradient[i] - grad[i];
        }
        memory.push(s, y);
        grad = ls.gradient;
        loss = ls.value;
        gnorm = norm2(grad);
        res.loss_trace.push_back(loss);
        ++res.lbfgs_steps;
        stopped = should_stop();
    }

    if (res.stop_reason.empty())
        res.stop_reason = "schedule complete";
    res.parameters = std::move(params);
    res.final_loss = loss;
    res.final_gradient_norm = gnorm;
    return res;
}

} // namespace fpinn
