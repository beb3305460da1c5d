#include "fpinn/network.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fpinn {

namespace {

// tanh and its first three derivatives expressed through g = tanh(z).
struct TanhDerivs {
    double s1, s2, s3;
};

TanhDerivs tanh_derivs(double g)
{
    const double s1 = 1.0 - g * g;
    return {s1, -2.0 * g * s1, s1 * (6.0 * g * g - 2.0)};
}

PolyBasis block_basis(LayerKind kind)
{
    return kind == LayerKind::legendre_block ? PolyBasis::legendre : PolyBasis::chebyshev;
}

void check_finite(const std::vector<double>& v, int layer)
{
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error("network: non-finite value after layer " +
                                     std::to_string(layer));
}

} // namespace

int LayerSpec::weight_count() const
{
    if (kind == LayerKind::dense || per_output_affine)
        return in_width * out_width;
    return in_width;
}

int LayerSpec::bias_count() const
{
    if (kind == LayerKind::dense || per_output_affine)
        return out_width;
    return 1;
}

Network::Network(std::vector<LayerSpec> layers, double lo, double hi)
    : layers_(std::move(layers)), lo_(lo), hi_(hi)
{
    if (layers_.empty())
        throw std::invalid_argument("network: at least one layer required");
    if (!(lo_ < hi_) || !std::isfinite(lo_) || !std::isfinite(hi_))
        throw std::invalid_argument("network: invalid input range");
    if (layers_.front().in_width != 1)
        throw std::invalid_argument("network: first layer must take one input");
    int total = 0;
    for (size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec& s = layers_[l];
        if (s.in_width < 1 || s.out_width < 1)
            throw std::invalid_argument("network: layer widths must be positive");
        if (l > 0 && layers_[l - 1].out_width != s.in_width)
            throw std::invalid_argument("network: layer widths do not chain");
        offsets_.push_back(total);
        total += s.parameter_count();
    }
    params_.assign(static_cast<size_t>(total), 0.0);
}

void Network::set_parameters(std::span<const double> p)
{
    if (p.size() != params_.size())
        throw std::invalid_argument("network: parameter vector has wrong length");
    params_.assign(p.begin(), p.end());
}

void Network::init_parameters(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    // Mapping chosen over uniform_real_distribution for identical streams on
    // every platform.
    auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec& s = layers_[l];
        double* block = params_.data() + offsets_[l];
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.in_width));
        const int nw = s.weight_count();
        for (int k = 0; k < nw; ++k)
            block[k] = (2.0 * unit() - 1.0) * scale;
        for (int k = 0; k < s.bias_count(); ++k)
            block[nw + k] = 0.0;
    }
}

void Network::forward_cached(double x, int order, EvalCache& cache) const
{
    if (!std::isfinite(x))
        throw std::invalid_argument("network: non-finite input");
    if (order < 0 || order > 2)
        throw std::invalid_argument("network: derivative order must be 0, 1 or 2");

    const size_t nl = layers_.size();
    cache.order = order;
    cache.stage_v.resize(nl + 1);
    cache.stage_d1.resize(nl + 1);
    cache.stage_d2.resize(nl + 1);
    cache.pre_v.resize(nl);
    cache.pre_d1.resize(nl);
    cache.pre_d2.resize(nl);

    const double scale = 2.0 / (hi_ - lo_);
    cache.stage_v[0] = {scale * (x - lo_) - 1.0};
    cache.stage_d1[0] = {scale};
    cache.stage_d2[0] = {0.0};

    for (size_t l = 0; l < nl; ++l) {
        const LayerSpec& s = layers_[l];
        const double* w = params_.data() + offsets_[l];
        const double* b = w + s.weight_count();
        const std::vector<double>& u = cache.stage_v[l];
        const std::vector<double>& ud1 = cache.stage_d1[l];
        const std::vector<double>& ud2 = cache.stage_d2[l];
        const size_t in = static_cast<size_t>(s.in_width);
        const size_t out = static_cast<size_t>(s.out_width);

        const size_t pre_n = (s.kind == LayerKind::dense || s.per_output_affine) ? out : 1;
        std::vector<double>& z = cache.pre_v[l];
        std::vector<double>& zd1 = cache.pre_d1[l];
        std::vector<double>& zd2 = cache.pre_d2[l];
        z.assign(pre_n, 0.0);
        zd1.assign(pre_n, 0.0);
        zd2.assign(pre_n, 0.0);
        for (size_t j = 0; j < pre_n; ++j) {
            const double* row = w + j * in;
            double zv = b[j], z1 = 0.0, z2 = 0.0;
            for (size_t k = 0; k < in; ++k) {
                zv += row[k] * u[k];
                if (order >= 1) z1 += row[k] * ud1[k];
                if (order >= 2) z2 += row[k] * ud2[k];
            }
            z[j] = zv;
            zd1[j] = z1;
            zd2[j] = z2;
        }

        std::vector<double>& y = cache.stage_v[l + 1];
        std::vector<double>& yd1 = cache.stage_d1[l + 1];
        std::vector<double>& yd2 = cache.stage_d2[l + 1];
        y.assign(out, 0.0);
        yd1.assign(out, 0.0);
        yd2.assign(out, 0.0);

        if (s.kind == LayerKind::dense) {
            for (size_t j = 0; j < out; ++j) {
                if (s.activation == Activation::tanh) {
                    const double g = std::tanh(z[j]);
                    const TanhDerivs t = tanh_derivs(g);
                    y[j] = g;
                    if (order >= 1) yd1[j] = t.s1 * zd1[j];
                    if (order >= 2) yd2[j] = t.s2 * zd1[j] * zd1[j] + t.s1 * zd2[j];
                } else {
                    y[j] = z[j];
                    if (order >= 1) yd1[j] = zd1[j];
                    if (order >= 2) yd2[j] = zd2[j];
                }
            }
        } else {
            const PolyBasis basis = block_basis(s.kind);
            std::vector<double> p(out), p1(out), p2(out);
            for (size_t j = 0; j < pre_n; ++j) {
                const double g = std::tanh(z[j]);
                const TanhDerivs t = tanh_derivs(g);
                const double g1 = (order >= 1) ? t.s1 * zd1[j] : 0.0;
                const double g2 = (order >= 2) ? t.s2 * zd1[j] * zd1[j] + t.s1 * zd2[j] : 0.0;
                poly_eval_derivs(basis, static_cast<int>(out) - 1, g, p,
                                 order >= 1 ? std::span<double>(p1) : std::span<double>(),
                                 order >= 2 ? std::span<double>(p2) : std::span<double>(), {});
                const size_t lo_i = s.per_output_affine ? j : 0;
                const size_t hi_i = s.per_output_affine ? j + 1 : out;
                for (size_t i = lo_i; i < hi_i; ++i) {
                    y[i] = p[i];
                    if (order >= 1) yd1[i] = p1[i] * g1;
                    if (order >= 2) yd2[i] = p2[i] * g1 * g1 + p1[i] * g2;
                }
            }
        }
        check_finite(y, static_cast<int>(l));
    }
}

std::vector<double> Network::forward(double x) const
{
    EvalCache cache;
    forward_cached(x, 0, cache);
    return cache.stage_v.back();
}

DerivativeBundle Network::forward_with_input_derivatives(double x, int order) const
{
    if (order < 1 || order > 2)
        throw std::invalid_argument("network: derivative order must be 1 or 2");
    EvalCache cache;
    forward_cached(x, order, cache);
    DerivativeBundle b;
    b.value = cache.stage_v.back();
    b.d1 = cache.stage_d1.back();
    if (order == 2)
        b.d2 = cache.stage_d2.back();
    return b;
}

void Network::accumulate_gradient(const EvalCache& cache,
                                  std::span<const double> av,
                                  std::span<const double> ad1,
                                  std::span<const double> ad2,
                                  std::span<double> grad) const
{
    if (grad.size() != params_.size())
        throw std::invalid_argument("network: gradient vector has wrong length");
    const size_t out_dim = static_cast<size_t>(output_dim());
    auto check_seed = [&](std::span<const double> s, int need) {
        if (s.empty())
            return;
        if (s.size() != out_dim)
            throw std::invalid_argument("network: adjoint seed has wrong length");
        if (cache.order < need)
            throw std::invalid_argument("network: cache order too low for adjoint seed");
    };
    check_seed(av, 0);
    check_seed(ad1, 1);
    check_seed(ad2, 2);

    const size_t nl = layers_.size();
    // Adjoints of the jets (value, d1, d2) at the current stage, walked from
    // the output back to the input.
    std::vector<double> a(out_dim, 0.0), a1(out_dim, 0.0), a2(out_dim, 0.0);
    for (size_t i = 0; i < out_dim; ++i) {
        if (!av.empty()) a[i] = av[i];
        if (!ad1.empty()) a1[i] = ad1[i];
        if (!ad2.empty()) a2[i] = ad2[i];
    }

    std::vector<double> na, na1, na2;
    for (size_t l = nl; l-- > 0;) {
        const LayerSpec& s = layers_[l];
        const double* w = params_.data() + offsets_[l];
        double* gw = grad.data() + offsets_[l];
        double* gb = gw + s.weight_count();
        const std::vector<double>& u = cache.stage_v[l];
        const std::vector<double>& ud1 = cache.stage_d1[l];
        const std::vector<double>& ud2 = cache.stage_d2[l];
        const std::vector<double>& z = cache.pre_v[l];
        const std::vector<double>& zd1 = cache.pre_d1[l];
        const std::vector<double>& zd2 = cache.pre_d2[l];
        const size_t in = static_cast<size_t>(s.in_width);
        const size_t out = static_cast<size_t>(s.out_width);

        na.assign(in, 0.0);
        na1.assign(in, 0.0);
        na2.assign(in, 0.0);

        // Reduces the adjoint triple on one pre-activation scalar through the
        // affine map z_j = w_j . u + b_j.
        auto pull_affine = [&](size_t j, double az, double az1, double az2) {
            const double* row = w + j * in;
            double* grow = gw + j * in;
            for (size_t k = 0; k < in; ++k) {
                grow[k] += az * u[k] + az1 * ud1[k] + az2 * ud2[k];
                na[k] += row[k] * az;
                na1[k] += row[k] * az1;
                na2[k] += row[k] * az2;
            }
            gb[j] += az;
        };

        if (s.kind == LayerKind::dense) {
            for (size_t j = 0; j < out; ++j) {
                double az, az1, az2;
                if (s.activation == Activation::tanh) {
                    const double g = cache.stage_v[l + 1][j];
                    const TanhDerivs t = tanh_derivs(g);
                    az = a[j] * t.s1 + a1[j] * t.s2 * zd1[j] +
                         a2[j] * (t.s3 * zd1[j] * zd1[j] + t.s2 * zd2[j]);
                    az1 = a1[j] * t.s1 + 2.0 * a2[j] * t.s2 * zd1[j];
                    az2 = a2[j] * t.s1;
                } else {
                    az = a[j];
                    az1 = a1[j];
                    az2 = a2[j];
                }
                pull_affine(j, az, az1, az2);
            }
        } else {
            const PolyBasis basis = block_basis(s.kind);
            const size_t pre_n = z.size();
            std::vector<double> p(out), p1(out), p2(out), p3(out);
            for (size_t j = 0; j < pre_n; ++j) {
                const double g = std::tanh(z[j]);
                const TanhDerivs t = tanh_derivs(g);
                const double g1 = t.s1 * zd1[j];
                const double g2 = t.s2 * zd1[j] * zd1[j] + t.s1 * zd2[j];
                poly_eval_derivs(basis, static_cast<int>(out) - 1, g, p, p1, p2, p3);
                double ag = 0.0, ag1 = 0.0, ag2 = 0.0;
                const size_t lo_i = s.per_output_affine ? j : 0;
                const size_t hi_i = s.per_output_affine ? j + 1 : out;
                for (size_t i = lo_i; i < hi_i; ++i) {
                    ag += a[i] * p1[i] + a1[i] * p2[i] * g1 +
                          a2[i] * (p3[i] * g1 * g1 + p2[i] * g2);
                    ag1 += a1[i] * p1[i] + 2.0 * a2[i] * p2[i] * g1;
                    ag2 += a2[i] * p1[i];
                }
                const double az = ag * t.s1 + ag1 * t.s2 * zd1[j] +
                                  ag2 * (t.s3 * zd1[j] * zd1[j] + t.s2 * zd2[j]);
                const double az1 = ag1 * t.s1 + 2.0 * ag2 * t.s2 * zd1[j];
                const double az2 = ag2 * t.s1;
                pull_affine(j, az, az1, az2);
            }
        }
        a.swap(na);
        a1.swap(na1);
        a2.swap(na2);
    }
}

void Network::save(std::ostream& os) const
{
    os << "fpinn-network 1\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g %.17g", lo_, hi_);
    os << "range " << buf << "\n";
    os << "layers " << layers_.size() << "\n";
    for (const LayerSpec& s : layers_) {
        const char* kind = s.kind == LayerKind::dense ? "dense"
                         : s.kind == LayerKind::legendre_block ? "legendre" : "chebyshev";
        os << "layer " << kind << ' ' << s.in_width << ' ' << s.out_width << ' ';
        if (s.kind == LayerKind::dense)
            os << (s.activation == Activation::tanh ? "tanh" : "identity");
        else
            os << (s.per_output_affine ? "per_output" : "shared");
        os << "\n";
    }
    os << "parameters " << params_.size() << "\n";
    for (double p : params_) {
        std::snprintf(buf, sizeof buf, "%.17g", p);
        os << buf << "\n";
    }
}

Network Network::load(std::istream& is)
{
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "fpinn-network" || version != 1)
        throw std::runtime_error("network: unrecognized checkpoint header");
    double lo = 0.0, hi = 0.0;
    size_t nl = 0;
    if (!(is >> tag >> lo >> hi) || tag != "range")
        throw std::runtime_error("network: bad checkpoint range line");
    if (!(is >> tag >> nl) || tag != "layers")
        throw std::runtime_error("network: bad checkpoint layer count");
    std::vector<LayerSpec> layers;
    for (size_t l = 0; l < nl; ++l) {
        std::string kind, variant;
        LayerSpec s;
        if (!(is >> tag >> kind >> s.in_width >> s.out_width >> variant) || tag != "layer")
            throw std::runtime_error("network: bad checkpoint layer line");
        if (kind == "dense") {
            s.kind = LayerKind::dense;
            if (variant == "tanh")
                s.activation = Activation::tanh;
            else if (variant == "identity")
                s.activation = Activation::identity;
            else
                throw std::runtime_error("network: unknown activation " + variant);
        } else if (kind == "legendre" || kind == "chebyshev") {
            s.kind = kind == "legendre" ? LayerKind::legendre_block : LayerKind::chebyshev_block;
            if (variant == "per_output")
                s.per_output_affine = true;
            else if (variant != "shared")
                throw std::runtime_error("network: unknown block variant " + variant);
        } else {
            throw std::runtime_error("network: unknown layer kind " + kind);
        }
        layers.push_back(s);
    }
    size_t np = 0;
    if (!(is >> tag >> np) || tag != "parameters")
        throw std::runtime_error("network: bad checkpoint parameter count");
    Network net(std::move(layers), lo, hi);
    if (np != net.params_.size())
        throw std::runtime_error("network: checkpoint parameter count mismatch");
    for (size_t k = 0; k < np; ++k)
        if (!(is >> net.params_[k]))
            throw std::runtime_error("network: truncated checkpoint parameters");
    return net;
}

std::vector<LayerSpec> parse_layer_stack(const std::vector<std::string>& tokens)
{
    if (tokens.empty())
        throw std::invalid_argument("network: empty layer stack");
    std::vector<LayerSpec> layers;
    int prev_width = 1;
    for (const std::string& tok : tokens) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : tok) {
            if (c == ':') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        parts.push_back(cur);
        if (parts.size() < 2)
            throw std::invalid_argument("network: bad layer token '" + tok + "'");
        LayerSpec s;
        s.in_width = prev_width;
        try {
            s.out_width = std::stoi(parts[1]);
        } catch (const std::exception&) {
            throw std::invalid_argument("network: bad width in '" + tok + "'");
        }
        if (parts[0] == "dense") {
            s.kind = LayerKind::dense;
            if (parts.size() < 3)
                throw std::invalid_argument("network: dense layer needs an activation: '" +
                                            tok + "'");
            if (parts[2] == "tanh")
                s.activation = Activation::tanh;
            else if (parts[2] == "identity" || parts[2] == "linear")
                s.activation = Activation::identity;
            else
                throw std::invalid_argument("network: unknown activation '" + parts[2] + "'");
        } else if (parts[0] == "legendre" || parts[0] == "chebyshev") {
            s.kind = parts[0] == "legendre" ? LayerKind::legendre_block
                                            : LayerKind::chebyshev_block;
            if (parts.size() >= 3) {
                if (parts[2] == "per_output")
                    s.per_output_affine = true;
                else if (parts[2] != "shared")
                    throw std::invalid_argument("network: unknown block variant '" +
                                                parts[2] + "'");
            }
        } else {
            throw std::invalid_argument("network: unknown layer kind '" + parts[0] + "'");
        }
        layers.push_back(s);
        prev_width = s.out_width;
    }
    return layers;
}

} // namespace fpinn
