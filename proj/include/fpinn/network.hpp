#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fpinn/polynomial.hpp"

namespace fpinn {

enum class Activation { tanh, identity };
enum class LayerKind { dense, legendre_block, chebyshev_block };

// One trainable layer. Dense layers apply activation(W u + b). Polynomial
// blocks map their input through an affine functional to a scalar s and emit
// [v_0(tanh s), ..., v_{out-1}(tanh s)]; with per_output_affine each output
// owns its own affine functional instead of sharing one.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    int in_width = 1;
    int out_width = 1;
    Activation activation = Activation::tanh;
    bool per_output_affine = false;

    int weight_count() const;
    int bias_count() const;
    int parameter_count() const { return weight_count() + bias_count(); }
};

// Output of a derivative-carrying evaluation. d2 is filled only when order 2
// was requested.
struct DerivativeBundle {
    std::vector<double> value;
    std::vector<double> d1;
    std::vector<double> d2;
};

// Everything one evaluation leaves behind for the reverse pass: the jets
// entering each layer (stage 0 is the normalized input, stage L the output)
// and each layer's pre-activation jets.
struct EvalCache {
    int order = 0;
    std::vector<std::vector<double>> stage_v, stage_d1, stage_d2;
    std::vector<std::vector<double>> pre_v, pre_d1, pre_d2;
};

class Network {
public:
    // Layers must chain: first in_width 1, each out_width feeding the next
    // in_width. The physical input range [lo, hi] is affinely normalized to
    // [-1, 1] ahead of the first layer.
    explicit Network(std::vector<LayerSpec> layers, double lo = -1.0, double hi = 1.0);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    int output_dim() const { return layers_.back().out_width; }
    int parameter_count() const { return static_cast<int>(params_.size()); }
    int layer_parameter_offset(int layer) const { return offsets_[static_cast<size_t>(layer)]; }
    double domain_lo() const { return lo_; }
    double domain_hi() const { return hi_; }

    std::span<const double> parameters() const { return params_; }
    void set_parameters(std::span<const double> p);

    // Weights uniform on +-1/sqrt(fan_in) from a seeded generator with a
    // platform-independent bit mapping; biases zero.
    void init_parameters(std::uint64_t seed);

    std::vector<double> forward(double x) const;
    DerivativeBundle forward_with_input_derivatives(double x, int order) const;

    // Forward evaluation that retains the jets needed by accumulate_gradient.
    void forward_cached(double x, int order, EvalCache& cache) const;

    // Adds to grad the gradient w.r.t. all parameters of
    //   sum_i av[i]*value_i + ad1[i]*d1_i + ad2[i]*d2_i
    // for the evaluation recorded in cache. Empty spans mean zero seeds; ad1
    // requires cache order >= 1 and ad2 order == 2.
    void accumulate_gradient(const EvalCache& cache,
                             std::span<const double> av,
                             std::span<const double> ad1,
                             std::span<const double> ad2,
                             std::span<double> grad) const;

    void save(std::ostream& os) const;
    static Network load(std::istream& is);

private:
    std::vector<LayerSpec> layers_;
    std::vector<int> offsets_;
    std::vector<double> params_;
    double lo_, hi_;
};

// Builds the layer stack used throughout: parses compact layer descriptions
// like "legendre:16", "dense:32:tanh", "dense:1:identity", "chebyshev:10".
std::vector<LayerSpec> parse_layer_stack(const std::vector<std::string>& tokens);

} // namespace fpinn
