#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fpinn/network.hpp"

using namespace fpinn;

namespace {

Network example_net()
{
    return Network(parse_layer_stack({"legendre:16", "dense:32:tanh", "dense:64:tanh",
                                      "dense:32:tanh", "legendre:5", "dense:1:identity"}),
                   0.0, 1.0);
}

// Mixed objective touching values, first and second input derivatives:
//   L = sum_x (f(x) - 1)^2 + f'(x)^2 + 0.5 f''(x)^2
double mixed_objective(const Network& net, const std::vector<double>& xs)
{
    double loss = 0.0;
    for (double x : xs) {
        const DerivativeBundle b = net.forward_with_input_derivatives(x, 2);
        loss += (b.value[0] - 1.0) * (b.value[0] - 1.0) + b.d1[0] * b.d1[0] +
                0.5 * b.d2[0] * b.d2[0];
    }
    return loss;
}

std::vector<double> mixed_objective_gradient(const Network& net, const std::vector<double>& xs)
{
    std::vector<double> grad(static_cast<size_t>(net.parameter_count()), 0.0);
    EvalCache cache;
    for (double x : xs) {
        net.forward_cached(x, 2, cache);
        const double v = cache.stage_v.back()[0];
        const double d1 = cache.stage_d1.back()[0];
        const double d2 = cache.stage_d2.back()[0];
        const std::vector<double> av = {2.0 * (v - 1.0)};
        const std::vector<double> ad1 = {2.0 * d1};
        const std::vector<double> ad2 = {d2};
        net.accumulate_gradient(cache, av, ad1, ad2, grad);
    }
    return grad;
}

} // namespace

TEST_CASE("trivial forward evaluations")
{
    // Single dense identity layer W=[2], b=[1] on the native range.
    Network net({LayerSpec{LayerKind::dense, 1, 1, Activation::identity, false}});
    net.set_parameters(std::vector<double>{2.0, 1.0});
    CHECK(net.forward(3.0)[0] == doctest::Approx(7.0));

    // Single legendre block with zeroed affine map: tanh(0)=0, [P0(0), P1(0)].
    Network block({LayerSpec{LayerKind::legendre_block, 1, 2, Activation::tanh, false}});
    CHECK(block.forward(0.37)[0] == doctest::Approx(1.0));
    CHECK(block.forward(0.37)[1] == doctest::Approx(0.0));

    // Single dense tanh layer W=[1], b=[0] at x=0.
    Network th({LayerSpec{LayerKind::dense, 1, 1, Activation::tanh, false}});
    th.set_parameters(std::vector<double>{1.0, 0.0});
    CHECK(th.forward(0.0)[0] == doctest::Approx(0.0));
    CHECK(th.forward_with_input_derivatives(0.0, 1).d1[0] == doctest::Approx(1.0));
}

TEST_CASE("input range normalization scales derivatives")
{
    // Identity chain on [0,4]: f(tau) = tau/2 - 1, so d1 = 0.5 and d2 = 0.
    Network net({LayerSpec{LayerKind::dense, 1, 1, Activation::identity, false}}, 0.0, 4.0);
    net.set_parameters(std::vector<double>{1.0, 0.0});
    const DerivativeBundle b = net.forward_with_input_derivatives(3.0, 2);
    CHECK(b.value[0] == doctest::Approx(0.5));
    CHECK(b.d1[0] == doctest::Approx(0.5));
    CHECK(b.d2[0] == doctest::Approx(0.0));
}

TEST_CASE("legendre block derivative has odd symmetry at zero")
{
    // Output P2(tanh x): derivative 3 tanh(x) tanh'(x) vanishes at x = 0.
    Network net({LayerSpec{LayerKind::legendre_block, 1, 3, Activation::tanh, false}});
    net.set_parameters(std::vector<double>{1.0, 0.0});
    const DerivativeBundle b = net.forward_with_input_derivatives(0.0, 1);
    CHECK(b.d1[2] == doctest::Approx(0.0));
}

TEST_CASE("input derivatives match finite differences")
{
    Network net(parse_layer_stack({"legendre:8", "dense:12:tanh", "dense:3:identity"}));
    net.init_parameters(11);
    const double h = 1e-5;
    for (double x : {-0.7, -0.2, 0.31, 0.9}) {
        const DerivativeBundle c = net.forward_with_input_derivatives(x, 2);
        const DerivativeBundle p = net.forward_with_input_derivatives(x + h, 2);
        const DerivativeBundle m = net.forward_with_input_derivatives(x - h, 2);
        for (size_t i = 0; i < 3; ++i) {
            const double fd1 = (p.value[i] - m.value[i]) / (2 * h);
            const double fd2 = (p.d1[i] - m.d1[i]) / (2 * h);
            CHECK(std::abs(c.d1[i] - fd1) <= std::max(1e-6 * std::abs(fd1), 1e-9));
            CHECK(std::abs(c.d2[i] - fd2) <= std::max(1e-6 * std::abs(fd2), 1e-9));
        }
    }
}

TEST_CASE("gradient of plain output for a dense identity layer")
{
    Network net({LayerSpec{LayerKind::dense, 1, 1, Activation::identity, false}});
    net.set_parameters(std::vector<double>{2.0, 1.0});
    EvalCache cache;
    net.forward_cached(0.6, 0, cache);
    std::vector<double> grad(2, 0.0);
    net.accumulate_gradient(cache, std::vector<double>{1.0}, {}, {}, grad);
    CHECK(grad[0] == doctest::Approx(0.6)); // dL/dW = x
    CHECK(grad[1] == doctest::Approx(1.0)); // dL/db = 1
}

TEST_CASE("parameter gradients match finite differences on the large stack")
{
    for (std::uint64_t seed : {3u, 17u, 202u}) {
        Network net = example_net();
        net.init_parameters(seed);
        const std::vector<double> xs = {0.05, 0.3, 0.55, 0.8, 1.0};
        const std::vector<double> grad = mixed_objective_gradient(net, xs);

        std::vector<double> params(net.parameters().begin(), net.parameters().end());
        const double h = 1e-5;
        std::mt19937_64 pick(seed * 7919 + 1);
        // Probing every coordinate is too slow for a unit test; sample widely.
        for (int probe = 0; probe < 120; ++probe) {
            const size_t k = pick() % params.size();
            std::vector<double> pp = params, pm = params;
            pp[k] += h;
            pm[k] -= h;
            net.set_parameters(pp);
            const double lp = mixed_objective(net, xs);
            net.set_parameters(pm);
            const double lm = mixed_objective(net, xs);
            net.set_parameters(params);
            const double fd = (lp - lm) / (2 * h);
            CHECK(std::abs(grad[k] - fd) <= std::max(1e-6 * std::abs(fd), 1e-9));
        }
    }
}

TEST_CASE("per-output affine blocks train independently per channel")
{
    LayerSpec spec{LayerKind::legendre_block, 2, 3, Activation::tanh, true};
    CHECK(spec.weight_count() == 6);
    CHECK(spec.bias_count() == 3);

    Network net({LayerSpec{LayerKind::dense, 1, 2, Activation::tanh, false},
                 spec,
                 LayerSpec{LayerKind::dense, 3, 1, Activation::identity, false}});
    net.init_parameters(5);
    const std::vector<double> xs = {-0.5, 0.1, 0.7};
    const std::vector<double> grad = mixed_objective_gradient(net, xs);
    std::vector<double> params(net.parameters().begin(), net.parameters().end());
    const double h = 1e-5;
    for (size_t k = 0; k < params.size(); ++k) {
        std::vector<double> pp = params, pm = params;
        pp[k] += h;
        pm[k] -= h;
        net.set_parameters(pp);
        const double lp = mixed_objective(net, xs);
        net.set_parameters(pm);
        const double lm = mixed_objective(net, xs);
        net.set_parameters(params);
        const double fd = (lp - lm) / (2 * h);
        CHECK(std::abs(grad[k] - fd) <= std::max(1e-6 * std::abs(fd), 1e-9));
    }
}

TEST_CASE("initialization is seeded and biases start at zero")
{
    Network a = example_net();
    Network b = example_net();
    a.init_parameters(99);
    b.init_parameters(99);
    bool identical = true;
    for (int k = 0; k < a.parameter_count(); ++k)
        identical = identical && a.parameters()[static_cast<size_t>(k)] ==
                                     b.parameters()[static_cast<size_t>(k)];
    CHECK(identical);

    b.init_parameters(100);
    bool differs = false;
    for (int k = 0; k < a.parameter_count(); ++k)
        differs = differs || a.parameters()[static_cast<size_t>(k)] !=
                                 b.parameters()[static_cast<size_t>(k)];
    CHECK(differs);

    // Every bias slot is zero right after init.
    const auto& layers = a.layers();
    for (size_t l = 0; l < layers.size(); ++l) {
        const int off = a.layer_parameter_offset(static_cast<int>(l)) +
                        layers[l].weight_count();
        for (int k = 0; k < layers[l].bias_count(); ++k)
            CHECK(a.parameters()[static_cast<size_t>(off + k)] == 0.0);
    }

    // Weight magnitudes respect the 1/sqrt(fan_in) envelope.
    for (size_t l = 0; l < layers.size(); ++l) {
        const int off = a.layer_parameter_offset(static_cast<int>(l));
        const double bound = 1.0 / std::sqrt(static_cast<double>(layers[l].in_width));
        for (int k = 0; k < layers[l].weight_count(); ++k)
            CHECK(std::abs(a.parameters()[static_cast<size_t>(off + k)]) <= bound);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly")
{
    Network net = example_net();
    net.init_parameters(1234);
    std::stringstream ss;
    net.save(ss);
    const Network back = Network::load(ss);
    REQUIRE(back.parameter_count() == net.parameter_count());
    CHECK(back.domain_lo() == net.domain_lo());
    CHECK(back.domain_hi() == net.domain_hi());
    REQUIRE(back.layers().size() == net.layers().size());
    for (size_t l = 0; l < net.layers().size(); ++l) {
        CHECK(back.layers()[l].kind == net.layers()[l].kind);
        CHECK(back.layers()[l].in_width == net.layers()[l].in_width);
        CHECK(back.layers()[l].out_width == net.layers()[l].out_width);
    }
    for (int k = 0; k < net.parameter_count(); ++k)
        CHECK(back.parameters()[static_cast<size_t>(k)] ==
              net.parameters()[static_cast<size_t>(k)]);

    std::stringstream bad("fpinn-network 2\n");
    CHECK_THROWS_AS(Network::load(bad), std::runtime_error);
}

TEST_CASE("evaluation is bitwise reproducible")
{
    Network net = example_net();
    net.init_parameters(77);
    const std::vector<double> a = net.forward(0.42);
    const std::vector<double> b = net.forward(0.42);
    CHECK(a[0] == b[0]);
    const std::vector<double> xs = {0.1, 0.9};
    const std::vector<double> g1 = mixed_objective_gradient(net, xs);
    const std::vector<double> g2 = mixed_objective_gradient(net, xs);
    bool same = true;
    for (size_t k = 0; k < g1.size(); ++k)
        same = same && g1[k] == g2[k];
    CHECK(same);
}

TEST_CASE("structural validation and numeric guards")
{
    CHECK_THROWS_AS(Network({}), std::invalid_argument);
    CHECK_THROWS_AS(Network({LayerSpec{LayerKind::dense, 2, 1, Activation::tanh, false}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        Network({LayerSpec{LayerKind::dense, 1, 4, Activation::tanh, false},
                 LayerSpec{LayerKind::dense, 3, 1, Activation::tanh, false}}),
        std::invalid_argument);

    Network net({LayerSpec{LayerKind::dense, 1, 1, Activation::identity, false}});
    net.set_parameters(std::vector<double>{1e308, 1e308});
    CHECK_THROWS_AS(net.forward(0.9), std::runtime_error);
    CHECK_THROWS_AS(net.forward(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(net.forward_with_input_derivatives(0.1, 3), std::invalid_argument);
    std::vector<double> small(1);
    CHECK_THROWS_AS(net.set_parameters(small), std::invalid_argument);
}

TEST_CASE("layer stack parser")
{
    const std::vector<LayerSpec> s =
        parse_layer_stack({"legendre:16", "dense:32:tanh", "dense:1:linear"});
    REQUIRE(s.size() == 3);
    CHECK(s[0].kind == LayerKind::legendre_block);
    CHECK(s[0].in_width == 1);
    CHECK(s[0].out_width == 16);
    CHECK(s[1].in_width == 16);
    CHECK(s[1].activation == Activation::tanh);
    CHECK(s[2].activation == Activation::identity);

    CHECK_THROWS_AS(parse_layer_stack({"dense:4"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_layer_stack({"conv:4:tanh"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_layer_stack({"dense:x:tanh"}), std::invalid_argument);
    CHECK_THROWS_AS(parse_layer_stack({}), std::invalid_argument);
}
