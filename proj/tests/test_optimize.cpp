#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "fpinn/grid.hpp"
#include "fpinn/optimize.hpp"

using namespace fpinn;

namespace {

// f(x) = 0.5 x'Qx - b'x with symmetric positive definite Q.
class QuadraticObjective : public Objective {
public:
    QuadraticObjective(std::vector<double> q, std::vector<double> b)
        : q_(std::move(q)), b_(std::move(b)), dim_(static_cast<int>(b_.size()))
    {
    }

    static QuadraticObjective random(int dim, std::mt19937_64& rng)
    {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> m(static_cast<size_t>(dim * dim));
        for (double& v : m)
            v = u(rng);
        // Q = M'M + I is symmetric positive definite.
        std::vector<double> q(static_cast<size_t>(dim * dim), 0.0);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) {
                double acc = r == c ? 1.0 : 0.0;
                for (int k = 0; k < dim; ++k)
                    acc += m[static_cast<size_t>(k * dim + r)] *
                           m[static_cast<size_t>(k * dim + c)];
                q[static_cast<size_t>(r * dim + c)] = acc;
            }
        std::vector<double> b(static_cast<size_t>(dim));
        for (double& v : b)
            v = u(rng);
        return QuadraticObjective(std::move(q), std::move(b));
    }

    int parameter_count() const override { return dim_; }
    int state_count() const override { return 1; }
    double value(std::span<const double> x) const override
    {
        double acc = 0.0;
        for (int r = 0; r < dim_; ++r) {
            double qx = 0.0;
            for (int c = 0; c < dim_; ++c)
                qx += q_[static_cast<size_t>(r * dim_ + c)] * x[static_cast<size_t>(c)];
            acc += 0.5 * x[static_cast<size_t>(r)] * qx -
                   b_[static_cast<size_t>(r)] * x[static_cast<size_t>(r)];
        }
        return acc;
    }
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const override
    {
        for (int r = 0; r < dim_; ++r) {
            double qx = 0.0;
            for (int c = 0; c < dim_; ++c)
                qx += q_[static_cast<size_t>(r * dim_ + c)] * x[static_cast<size_t>(c)];
            grad[static_cast<size_t>(r)] = qx - b_[static_cast<size_t>(r)];
        }
        return value(x);
    }
    std::vector<double> initial_parameters(std::uint64_t seed) const override
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> x(static_cast<size_t>(dim_));
        for (double& v : x)
            v = u(rng);
        return x;
    }
    std::vector<double> predict(std::span<const double> x, double) const override
    {
        return {value(x)};
    }
    double matrix_assembly_seconds() const override { return 0.0; }

private:
    std::vector<double> q_, b_;
    int dim_;
};

class QuarticObjective : public Objective {
public:
    int parameter_count() const override { return 1; }
    int state_count() const override { return 1; }
    double value(std::span<const double> x) const override { return std::pow(x[0], 4); }
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const override
    {
        grad[0] = 4.0 * std::pow(x[0], 3);
        return value(x);
    }
    std::vector<double> initial_parameters(std::uint64_t) const override { return {1.0}; }
    std::vector<double> predict(std::span<const double> x, double) const override
    {
        return {x[0]};
    }
    double matrix_assembly_seconds() const override { return 0.0; }
};

double norm2(std::span<const double> v)
{
    double acc = 0.0;
    for (double x : v)
        acc += x * x;
    return std::sqrt(acc);
}

} // namespace

TEST_CASE("first adam step moves by about the learning rate")
{
    const std::vector<double> g = {3.0, -2.0, 0.5, 0.0};
    std::vector<double> p = {1.0, 1.0, 1.0, 1.0};
    AdamState st(4, 0.01);
    adam_step(st, p, g);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(1.0 + 0.01).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p[3] == 1.0); // zero gradient coordinate stays put
    CHECK(st.step_count == 1);
}

TEST_CASE("adam: zero gradient, determinism, error handling")
{
    std::vector<double> p = {0.3, -0.7};
    AdamState st(2);
    adam_step(st, p, std::vector<double>{0.0, 0.0});
    CHECK(p == std::vector<double>{0.3, -0.7});

    // Identical runs produce identical trajectories.
    std::vector<double> a = {1.0, 2.0}, b = {1.0, 2.0};
    AdamState sa(2), sb(2);
    for (int i = 0; i < 5; ++i) {
        const std::vector<double> g = {0.1 * i - 0.2, 0.3};
        adam_step(sa, a, g);
        adam_step(sb, b, g);
    }
    CHECK(a == b);
    CHECK(sa.first_moment == sb.first_moment);

    // Non-finite gradient leaves everything untouched.
    const std::vector<double> before = a;
    const AdamState snap = sa;
    const std::vector<double> nan_grad = {1.0, std::nan("")};
    CHECK_THROWS_AS(adam_step(sa, a, nan_grad), std::runtime_error);
    CHECK(a == before);
    CHECK(sa.step_count == snap.step_count);
    CHECK(sa.first_moment == snap.first_moment);

    CHECK_THROWS_AS(adam_step(sa, a, std::vector<double>{1.0}), std::invalid_argument);
    AdamState bad(2);
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(adam_step(bad, a, std::vector<double>{0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(AdamState(2, 0.0), std::invalid_argument);
}

TEST_CASE("adam: positive gradient scaling keeps the first-step signs")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> g(6);
        for (double& v : g)
            v = u(rng);
        std::vector<double> p1(6, 0.0), p2(6, 0.0);
        AdamState s1(6), s2(6);
        std::vector<double> scaled = g;
        for (double& v : scaled)
            v *= 7.3;
        adam_step(s1, p1, g);
        adam_step(s2, p2, scaled);
        for (int i = 0; i < 6; ++i)
            CHECK(std::signbit(p1[static_cast<size_t>(i)]) ==
                  std::signbit(p2[static_cast<size_t>(i)]));
    }
}

TEST_CASE("two-loop direction with empty and trivial memory")
{
    LbfgsState st(5);
    const std::vector<double> g = {1.0, -2.0, 0.5};
    const std::vector<double> d = st.direction(g);
    CHECK(d == std::vector<double>{-1.0, 2.0, -0.5});
    CHECK(st.gamma() == 1.0);

    // s = y keeps the identity action: direction stays -g.
    const std::vector<double> s = {0.4, 0.1, -0.3};
    CHECK(st.push(s, s));
    const std::vector<double> d2 = st.direction(g);
    for (int i = 0; i < 3; ++i)
        CHECK(d2[static_cast<size_t>(i)] ==
              doctest::Approx(-g[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("curvature rejection and memory eviction")
{
    LbfgsState st(3);
    const std::vector<double> s = {1.0, 0.0};
    const std::vector<double> y_bad = {-1.0, 0.1};
    CHECK_FALSE(st.push(s, y_bad)); // s'y < 0
    CHECK(st.size() == 0);
    CHECK_FALSE(st.push(s, std::vector<double>{0.0, 1.0})); // s'y = 0
    CHECK(st.size() == 0);

    for (int i = 0; i < 5; ++i) {
        const std::vector<double> si = {1.0 + i, 0.5};
        CHECK(st.push(si, si));
    }
    CHECK(st.size() == 3);

    CHECK_THROWS_AS(st.push(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(st.direction(std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(LbfgsState(0), std::invalid_argument);
}

TEST_CASE("two-loop recursion matches the dense inverse-Hessian recursion")
{
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 1 + static_cast<int>(rng() % 5);
        const int mem = 1 + static_cast<int>(rng() % 3);
        LbfgsState st(mem);
        int added = 0;
        while (added < mem) {
            std::vector<double> s(static_cast<size_t>(dim)), y(static_cast<size_t>(dim));
            for (double& v : s)
                v = u(rng);
            // y = s plus a perturbation keeps most pairs curvature-valid.
            for (int i = 0; i < dim; ++i)
                y[static_cast<size_t>(i)] = s[static_cast<size_t>(i)] + 0.4 * u(rng);
            if (st.push(s, y))
                ++added;
        }
        std::vector<double> g(static_cast<size_t>(dim));
        for (double& v : g)
            v = u(rng);

        const std::vector<double> two_loop = lbfgs_direction(st, g);
        const std::vector<double> h = st.dense_inverse_hessian(dim);
        for (int r = 0; r < dim; ++r) {
            double hg = 0.0;
            for (int c = 0; c < dim; ++c)
                hg += h[static_cast<size_t>(r * dim + c)] * g[static_cast<size_t>(c)];
            CHECK(std::abs(two_loop[static_cast<size_t>(r)] + hg) <= 1e-10);
        }
    }
}

TEST_CASE("line search accepts the exact minimizer of a quadratic")
{
    const QuadraticObjective obj({1.0}, {0.0}); // f = x^2 / 2
    const std::vector<double> x = {1.0};
    const std::vector<double> d = {-1.0};
    std::vector<double> g = {1.0};
    const LineSearchResult res = line_search(obj, x, d, 0.5, g, 1.0);
    CHECK(res.success);
    CHECK(res.step == doctest::Approx(1.0));
    CHECK(res.value == doctest::Approx(0.0));
    CHECK(res.probes == 1);
    REQUIRE(res.gradient.size() == 1);
    CHECK(res.gradient[0] == doctest::Approx(0.0));
}

TEST_CASE("line search satisfies Armijo on a quartic and rejects ascent")
{
    const QuarticObjective obj;
    const std::vector<double> x = {1.0};
    const std::vector<double> d = {-1.0};
    const std::vector<double> g = {4.0};
    const LineSearchResult res = line_search(obj, x, d, 1.0, g, 1.0);
    CHECK(res.success);
    CHECK(res.probes <= 25);
    CHECK(res.value < 1.0 - 1e-4 * res.step * 4.0);

    const std::vector<double> ascent = {1.0};
    CHECK_THROWS_AS(line_search(obj, x, ascent, 1.0, g, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(line_search(obj, x, d, 1.0, g, 0.0), std::invalid_argument);
}

TEST_CASE("quasi-Newton phase solves convex quadratics to tight tolerance")
{
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        const QuadraticObjective obj = QuadraticObjective::random(5, rng);
        TrainSchedule sched;
        sched.adam_epochs = 0;
        sched.lbfgs_iterations = 50;
        sched.gradient_floor = 1e-11;
        // The synthetic quadratic has a negative minimum; the absolute loss
        // floor is meaningful only for nonnegative objectives.
        sched.loss_floor = -std::numeric_limits<double>::infinity();
        const TrainResult res = train(obj, obj.initial_parameters(trial + 1), sched);
        CHECK(res.final_gradient_norm < 1e-8);

        // With memory >= dim the solve needs at most 3*dim steps to reach 1e-10.
        TrainSchedule tight = sched;
        tight.lbfgs_iterations = 15;
        tight.gradient_floor = 1e-10;
        const TrainResult fast = train(obj, obj.initial_parameters(trial + 1), tight);
        CHECK(fast.final_gradient_norm <= 1e-10);
        CHECK(fast.lbfgs_steps <= 15);
    }
}

TEST_CASE("train: zero-iteration schedule returns the input unchanged")
{
    std::mt19937_64 rng(3);
    const QuadraticObjective obj = QuadraticObjective::random(4, rng);
    const std::vector<double> x0 = obj.initial_parameters(9);
    TrainSchedule sched;
    sched.adam_epochs = 0;
    sched.lbfgs_iterations = 0;
    sched.loss_floor = -std::numeric_limits<double>::infinity();
    const TrainResult res = train(obj, x0, sched);
    CHECK(res.parameters == x0);
    CHECK(res.loss_trace.size() == 1);
    CHECK(res.adam_steps == 0);
    CHECK(res.lbfgs_steps == 0);
    CHECK(res.stop_reason == "schedule complete");
}

TEST_CASE("train: divergence is flagged with a diagnostic")
{
    const QuadraticObjective obj({1.0}, {0.0});
    TrainSchedule sched;
    sched.adam_epochs = 10;
    sched.lbfgs_iterations = 0;
    sched.learning_rate = 1e6; // one step overshoots by six orders
    const TrainResult res = train(obj, {1.0}, sched);
    CHECK(res.diverged);
    CHECK(res.stop_reason.find("diverged") == 0);
    CHECK(res.adam_steps < 10);
}

TEST_CASE("train: accepted steps decrease the loss monotonically")
{
    FddeProblem p = std::get<FddeProblem>(builtin_problem(3));
    p.net_stack = {"legendre:4", "dense:5:tanh", "dense:1:identity"};
    const FddeObjective obj(p, Grid::uniform(p.lo, p.hi, 8), LossConfig{});
    TrainSchedule sched;
    sched.adam_epochs = 0;
    sched.lbfgs_iterations = 30;
    const TrainResult res = train(obj, obj.initial_parameters(1), sched);
    REQUIRE(res.loss_trace.size() >= 2);
    for (size_t i = 1; i < res.loss_trace.size(); ++i)
        CHECK(res.loss_trace[i] < res.loss_trace[i - 1]);
}

TEST_CASE("train: fixed seed and schedule reproduce the loss trace")
{
    FddeProblem p = std::get<FddeProblem>(builtin_problem(3));
    p.net_stack = {"legendre:4", "dense:5:tanh", "dense:1:identity"};
    const FddeObjective obj(p, Grid::uniform(p.lo, p.hi, 8), LossConfig{});
    TrainSchedule sched;
    sched.adam_epochs = 30;
    sched.lbfgs_iterations = 5;
    const TrainResult a = train(obj, obj.initial_parameters(4), sched);
    const TrainResult b = train(obj, obj.initial_parameters(4), sched);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.parameters == b.parameters);
}
