#include "fpinn/residual.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fpinn/parallel.hpp"

namespace fpinn {

namespace {

constexpr double kNormFloor = 1e-300;

void check_grid_matches(const Grid& grid, double lo, double hi)
{
    const double tol = 1e-12 * (hi - lo);
    if (std::abs(grid.origin() - lo) > tol || std::abs(grid.end() - hi) > tol)
        throw std::invalid_argument("residual: grid does not span the problem domain");
}

const CaputoMatrix* check_matrix(const CaputoMatrix* matrix, const Grid& grid, double alpha,
                                 bool needed)
{
    if (!needed)
        return nullptr;
    if (!matrix)
        throw std::invalid_argument("residual: fractional order needs a CaputoMatrix");
    if (matrix->size() != grid.size() || matrix->alpha() != alpha)
        throw std::invalid_argument("residual: matrix does not match grid and order");
    return matrix;
}

// Derivative orders each evaluation site must carry for an FDDE.
struct FddeLayout {
    int base_order = 0;              // main grid nodes
    std::vector<int> delay_order;    // per delay; -1 when never referenced
    bool lead_d1 = false;            // q = 1
    bool lead_d2 = false;            // q = 2
    bool lead_matrix_values = false; // 0 < q < 1
    bool lead_matrix_d1 = false;     // 1 < q < 2
};

FddeLayout fdde_layout(const FddeProblem& p)
{
    FddeLayout lay;
    const std::vector<bool> used = p.chi.slots_used();
    auto slot_used = [&used](int s) {
        return s >= 0 && static_cast<size_t>(s) < used.size() && used[static_cast<size_t>(s)];
    };

    const FractionalOrder& q = p.order;
    if (q.is_integer()) {
        if (q.n_int == 1)
            lay.lead_d1 = true;
        else if (q.n_int == 2)
            lay.lead_d2 = true;
        else
            throw std::invalid_argument("residual: integer orders above 2 unsupported");
    } else if (q.n_int == 0) {
        lay.lead_matrix_values = true;
    } else if (q.n_int == 1) {
        lay.lead_matrix_d1 = true;
    } else {
        throw std::invalid_argument("residual: orders above 2 unsupported");
    }

    lay.base_order = 0;
    if (slot_used(FddeProblem::slot_d1) || lay.lead_d1 || lay.lead_matrix_d1)
        lay.base_order = 1;
    if (slot_used(FddeProblem::slot_d2) || lay.lead_d2)
        lay.base_order = 2;
    // Initial values beyond the first require derivatives at the left node.
    lay.base_order = std::max(lay.base_order, q.initial_value_count() - 1);

    lay.delay_order.assign(p.delays.size(), -1);
    for (size_t j = 0; j < p.delays.size(); ++j) {
        const int vj = FddeProblem::delayed_value_slot(static_cast<int>(j));
        const int dj = FddeProblem::delayed_deriv_slot(static_cast<int>(j));
        if (slot_used(dj))
            lay.delay_order[j] = 1;
        else if (slot_used(vj))
            lay.delay_order[j] = 0;
    }
    return lay;
}

// One full FDDE pass: loss value, optionally gradient, optionally the raw
// residual/boundary vectors.
double fdde_assemble(const FddeProblem& p, const Grid& grid, const CaputoMatrix* matrix,
                     const Network& net, const LossConfig& cfg, bool use_history, int threads,
                     std::span<double> grad, std::vector<double>* out_res,
                     std::vector<double>* out_bnd)
{
    check_grid_matches(grid, p.lo, p.hi);
    matrix = check_matrix(matrix, grid, p.order.alpha, !p.order.is_integer());
    if (net.output_dim() != 1)
        throw std::invalid_argument("residual: network must have one output");
    if (p.slot_total() > kMaxSlots)
        throw std::invalid_argument("residual: too many delays");
    const bool with_grad = !grad.empty();
    if (with_grad && grad.size() != static_cast<size_t>(net.parameter_count()))
        throw std::invalid_argument("residual: gradient buffer has wrong length");

    const FddeLayout lay = fdde_layout(p);
    const int n1 = grid.size();
    const int nslots = p.slot_total();
    const int ndelays = static_cast<int>(p.delays.size());

    // Phase 1: evaluate the network at all sites.
    std::vector<EvalCache> caches(static_cast<size_t>(n1));
    parallel_for(n1, threads, [&](int begin, int end) {
        for (int i = begin; i < end; ++i)
            net.forward_cached(grid.node(i), lay.base_order, caches[static_cast<size_t>(i)]);
    });

    // Delayed sites: either a network cache or a history jet per (delay, node).
    std::vector<std::vector<EvalCache>> dcaches(static_cast<size_t>(ndelays));
    std::vector<std::vector<Jet>> dhistory(static_cast<size_t>(ndelays));
    std::vector<std::vector<char>> from_history(static_cast<size_t>(ndelays));
    for (int j = 0; j < ndelays; ++j) {
        if (lay.delay_order[static_cast<size_t>(j)] < 0)
            continue;
        dcaches[static_cast<size_t>(j)].resize(static_cast<size_t>(n1));
        dhistory[static_cast<size_t>(j)].resize(static_cast<size_t>(n1));
        from_history[static_cast<size_t>(j)].assign(static_cast<size_t>(n1), 0);
        const int order = std::max(lay.delay_order[static_cast<size_t>(j)], 0);
        parallel_for(n1, threads, [&, j, order](int begin, int end) {
            for (int i = std::max(begin, 1); i < end; ++i) {
                const double d = p.delays[static_cast<size_t>(j)].eval(grid.node(i));
                if (d < p.lo && use_history) {
                    if (!p.history)
                        throw std::runtime_error(
                            "residual: delay reaches below the domain but the problem has "
                            "no history function");
                    dhistory[static_cast<size_t>(j)][static_cast<size_t>(i)] =
                        p.history->eval_jet(d);
                    from_history[static_cast<size_t>(j)][static_cast<size_t>(i)] = 1;
                } else {
                    net.forward_cached(d, order,
                                       dcaches[static_cast<size_t>(j)][static_cast<size_t>(i)]);
                }
            }
        });
    }

    // Phase 2: leading term.
    std::vector<double> lead(static_cast<size_t>(n1), 0.0);
    if (lay.lead_d1) {
        for (int i = 0; i < n1; ++i)
            lead[static_cast<size_t>(i)] = caches[static_cast<size_t>(i)].stage_d1.back()[0];
    } else if (lay.lead_d2) {
        for (int i = 0; i < n1; ++i)
            lead[static_cast<size_t>(i)] = caches[static_cast<size_t>(i)].stage_d2.back()[0];
    } else {
        std::vector<double> samples(static_cast<size_t>(n1));
        for (int i = 0; i < n1; ++i)
            samples[static_cast<size_t>(i)] =
                lay.lead_matrix_values ? caches[static_cast<size_t>(i)].stage_v.back()[0]
                                       : caches[static_cast<size_t>(i)].stage_d1.back()[0];
        matrix->apply(samples, lead);
    }

    // Phase 3: residuals and (optionally) chi slot partials.
    std::vector<double> residuals(static_cast<size_t>(n1), 0.0);
    std::vector<double> partials;
    if (with_grad)
        partials.assign(static_cast<size_t>(n1) * static_cast<size_t>(nslots), 0.0);
    parallel_for(n1, threads, [&](int begin, int end) {
        std::vector<double> slots(static_cast<size_t>(nslots), 0.0);
        for (int i = std::max(begin, 1); i < end; ++i) {
            const EvalCache& c = caches[static_cast<size_t>(i)];
            slots[FddeProblem::slot_y] = c.stage_v.back()[0];
            slots[FddeProblem::slot_d1] = lay.base_order >= 1 ? c.stage_d1.back()[0] : 0.0;
            slots[FddeProblem::slot_d2] = lay.base_order >= 2 ? c.stage_d2.back()[0] : 0.0;
            for (int j = 0; j < ndelays; ++j) {
                if (lay.delay_order[static_cast<size_t>(j)] < 0)
                    continue;
                const size_t vs = static_cast<size_t>(FddeProblem::delayed_value_slot(j));
                const size_t ds = static_cast<size_t>(FddeProblem::delayed_deriv_slot(j));
                if (from_history[static_cast<size_t>(j)][static_cast<size_t>(i)]) {
                    const Jet& h = dhistory[static_cast<size_t>(j)][static_cast<size_t>(i)];
                    slots[vs] = h.v;
                    slots[ds] = h.d1;
                } else {
                    const EvalCache& dc =
                        dcaches[static_cast<size_t>(j)][static_cast<size_t>(i)];
                    slots[vs] = dc.stage_v.back()[0];
                    slots[ds] =
                        lay.delay_order[static_cast<size_t>(j)] >= 1 ? dc.stage_d1.back()[0]
                                                                     : 0.0;
                }
            }
            const double x = grid.node(i);
            double chi;
            if (with_grad) {
                std::span<double> part(partials.data() +
                                           static_cast<size_t>(i) * static_cast<size_t>(nslots),
                                       static_cast<size_t>(nslots));
                chi = p.chi.eval_slot_partials(x, slots, part);
            } else {
                chi = p.chi.eval(x, slots);
            }
            residuals[static_cast<size_t>(i)] = lead[static_cast<size_t>(i)] - chi;
        }
    });

    // Boundary residuals from the left node's cache.
    const int nb = p.order.initial_value_count();
    std::vector<double> boundary(static_cast<size_t>(nb), 0.0);
    for (int pth = 0; pth < nb; ++pth) {
        const EvalCache& c0 = caches[0];
        const double v = pth == 0   ? c0.stage_v.back()[0]
                         : pth == 1 ? c0.stage_d1.back()[0]
                                    : c0.stage_d2.back()[0];
        boundary[static_cast<size_t>(pth)] = v - p.initial_values[static_cast<size_t>(pth)];
    }

    // Loss and residual weights dL/dR_i. Entry 0 is zero, so summing the
    // whole vector matches the standalone reducers exactly.
    double loss = 0.0;
    std::vector<double> w;
    if (with_grad)
        w.assign(static_cast<size_t>(n1), 0.0);
    double ss = 0.0;
    for (int i = 1; i < n1; ++i)
        ss += residuals[static_cast<size_t>(i)] * residuals[static_cast<size_t>(i)];
    if (cfg.reduction == LossConfig::Reduction::paper_l2_norm) {
        const double norm = std::sqrt(ss);
        loss += cfg.lambda * norm;
        if (with_grad && norm > kNormFloor)
            for (int i = 1; i < n1; ++i)
                w[static_cast<size_t>(i)] = cfg.lambda * residuals[static_cast<size_t>(i)] / norm;
    } else {
        loss += cfg.lambda * ss / n1;
        if (with_grad)
            for (int i = 1; i < n1; ++i)
                w[static_cast<size_t>(i)] =
                    2.0 * cfg.lambda * residuals[static_cast<size_t>(i)] / n1;
    }
    for (double b : boundary)
        loss += b * b;

    if (out_res)
        *out_res = residuals;
    if (out_bnd)
        *out_bnd = boundary;
    if (!with_grad)
        return loss;

    // Leading-term seeds that flow through the matrix: u = A^T w.
    std::vector<double> u;
    if (lay.lead_matrix_values || lay.lead_matrix_d1) {
        u.assign(static_cast<size_t>(n1), 0.0);
        matrix->apply_transpose(w, u);
    }

    // Phase 4: accumulate parameter adjoints node by node. Per-chunk buffers
    // combined in chunk order keep the sum reproducible.
    std::fill(grad.begin(), grad.end(), 0.0);
    const int nthreads = std::max(1, threads);
    std::vector<std::vector<double>> partial_grads;
    if (nthreads > 1)
        partial_grads.assign(static_cast<size_t>(nthreads),
                             std::vector<double>(grad.size(), 0.0));
    parallel_for_chunks(n1, nthreads, [&](int chunk, int begin, int end) {
        std::span<double> g = grad;
        if (nthreads > 1)
            g = partial_grads[static_cast<size_t>(chunk)];
        for (int i = begin; i < end; ++i) {
            const double wi = w[static_cast<size_t>(i)];
            double av = 0.0, ad1 = 0.0, ad2 = 0.0;
            if (lay.lead_d1)
                ad1 += wi;
            else if (lay.lead_d2)
                ad2 += wi;
            else if (lay.lead_matrix_values)
                av += u[static_cast<size_t>(i)];
            else
                ad1 += u[static_cast<size_t>(i)];
            if (i >= 1) {
                const double* part =
                    partials.data() + static_cast<size_t>(i) * static_cast<size_t>(nslots);
                av -= wi * part[FddeProblem::slot_y];
                ad1 -= wi * part[FddeProblem::slot_d1];
                ad2 -= wi * part[FddeProblem::slot_d2];
            }
            if (i == 0) {
                av += 2.0 * boundary[0];
                if (nb >= 2)
                    ad1 += 2.0 * boundary[1];
                if (nb >= 3)
                    ad2 += 2.0 * boundary[2];
            }
            const EvalCache& c = caches[static_cast<size_t>(i)];
            if (av != 0.0 || ad1 != 0.0 || ad2 != 0.0) {
                const double sv[1] = {av}, s1[1] = {ad1}, s2[1] = {ad2};
                net.accumulate_gradient(c, sv,
                                        c.order >= 1 ? std::span<const double>(s1)
                                                     : std::span<const double>(),
                                        c.order >= 2 ? std::span<const double>(s2)
                                                     : std::span<const double>(),
                                        g);
            }
            if (i >= 1) {
                const double* part =
                    partials.data() + static_cast<size_t>(i) * static_cast<size_t>(nslots);
                for (int j = 0; j < ndelays; ++j) {
                    if (lay.delay_order[static_cast<size_t>(j)] < 0 ||
                        from_history[static_cast<size_t>(j)][static_cast<size_t>(i)])
                        continue;
                    const double dav = -wi * part[FddeProblem::delayed_value_slot(j)];
                    const double dad1 = -wi * part[FddeProblem::delayed_deriv_slot(j)];
                    if (dav == 0.0 && dad1 == 0.0)
                        continue;
                    const EvalCache& dc =
                        dcaches[static_cast<size_t>(j)][static_cast<size_t>(i)];
                    const double sv[1] = {dav}, s1[1] = {dad1};
                    net.accumulate_gradient(dc, sv,
                                            dc.order >= 1 ? std::span<const double>(s1)
                                                          : std::span<const double>(),
                                            {}, g);
                }
            }
        }
    });
    if (nthreads > 1) {
        for (const std::vector<double>& pg : partial_grads)
            for (size_t k = 0; k < grad.size(); ++k)
                grad[k] += pg[k];
    }
    for (size_t k = 0; k < grad.size(); ++k)
        if (!std::isfinite(grad[k]))
            throw std::runtime_error("residual: non-finite gradient at parameter " +
                                     std::to_string(k));
    return loss;
}

// Derivative orders per state for a DAE.
struct DaeLayout {
    std::vector<int> state_order; // 0 or 1
    std::vector<char> state_frac; // D(yk) referenced anywhere
    bool any_frac = false;
};

DaeLayout dae_layout(const DaeSystem& s)
{
    DaeLayout lay;
    lay.state_order.assign(static_cast<size_t>(s.m), 0);
    lay.state_frac.assign(static_cast<size_t>(s.m), 0);
    for (const Expression& eq : s.equations) {
        const std::vector<bool> used = eq.slots_used();
        auto slot_used = [&used](int slot) {
            return static_cast<size_t>(slot) < used.size() && used[static_cast<size_t>(slot)];
        };
        for (int k = 0; k < s.m; ++k) {
            if (slot_used(s.deriv_slot(k)))
                lay.state_order[static_cast<size_t>(k)] = 1;
            if (slot_used(s.frac_slot(k))) {
                lay.state_frac[static_cast<size_t>(k)] = 1;
                lay.any_frac = true;
            }
        }
    }
    return lay;
}

double dae_assemble(const DaeSystem& s, const Grid& grid, const CaputoMatrix* matrix,
                    const std::vector<Network>& nets, const LossConfig& cfg, int threads,
                    std::span<double> grad, std::vector<std::vector<double>>* out_res,
                    std::vector<double>* out_bnd)
{
    check_grid_matches(grid, s.lo, s.hi);
    if (static_cast<int>(nets.size()) != s.m)
        throw std::invalid_argument("residual: one network per state required");
    for (const Network& net : nets)
        if (net.output_dim() != 1)
            throw std::invalid_argument("residual: networks must have one output");
    const DaeLayout lay = dae_layout(s);
    matrix = check_matrix(matrix, grid, s.alpha, lay.any_frac);

    int total_params = 0;
    std::vector<int> offsets;
    for (const Network& net : nets) {
        offsets.push_back(total_params);
        total_params += net.parameter_count();
    }
    const bool with_grad = !grad.empty();
    if (with_grad && grad.size() != static_cast<size_t>(total_params))
        throw std::invalid_argument("residual: gradient buffer has wrong length");

    const int n1 = grid.size();
    const int nslots = s.slot_total();

    // Per-state caches over all nodes.
    std::vector<std::vector<EvalCache>> caches(static_cast<size_t>(s.m));
    for (int k = 0; k < s.m; ++k) {
        caches[static_cast<size_t>(k)].resize(static_cast<size_t>(n1));
        const int order = lay.state_order[static_cast<size_t>(k)];
        parallel_for(n1, threads, [&, k, order](int begin, int end) {
            for (int i = begin; i < end; ++i)
                nets[static_cast<size_t>(k)].forward_cached(
                    grid.node(i), order, caches[static_cast<size_t>(k)][static_cast<size_t>(i)]);
        });
    }

    // Fractional derivative samples per state that needs them.
    std::vector<std::vector<double>> frac(static_cast<size_t>(s.m));
    for (int k = 0; k < s.m; ++k) {
        if (!lay.state_frac[static_cast<size_t>(k)])
            continue;
        std::vector<double> values(static_cast<size_t>(n1));
        for (int i = 0; i < n1; ++i)
            values[static_cast<size_t>(i)] =
                caches[static_cast<size_t>(k)][static_cast<size_t>(i)].stage_v.back()[0];
        frac[static_cast<size_t>(k)] = matrix->apply(values);
    }

    // Residuals and slot partials per equation.
    std::vector<std::vector<double>> residuals(
        static_cast<size_t>(s.m), std::vector<double>(static_cast<size_t>(n1), 0.0));
    std::vector<std::vector<double>> partials;
    if (with_grad)
        partials.assign(static_cast<size_t>(s.m),
                        std::vector<double>(static_cast<size_t>(n1) *
                                                static_cast<size_t>(nslots),
                                            0.0));
    parallel_for(n1, threads, [&](int begin, int end) {
        std::vector<double> slots(static_cast<size_t>(nslots), 0.0);
        for (int i = std::max(begin, 1); i < end; ++i) {
            for (int k = 0; k < s.m; ++k) {
                const EvalCache& c = caches[static_cast<size_t>(k)][static_cast<size_t>(i)];
                slots[static_cast<size_t>(s.value_slot(k))] = c.stage_v.back()[0];
                slots[static_cast<size_t>(s.deriv_slot(k))] =
                    lay.state_order[static_cast<size_t>(k)] >= 1 ? c.stage_d1.back()[0] : 0.0;
                slots[static_cast<size_t>(s.frac_slot(k))] =
                    lay.state_frac[static_cast<size_t>(k)]
                        ? frac[static_cast<size_t>(k)][static_cast<size_t>(i)]
                        : 0.0;
            }
            const double x = grid.node(i);
            for (int j = 0; j < s.m; ++j) {
                if (with_grad) {
                    std::span<double> part(
                        partials[static_cast<size_t>(j)].data() +
                            static_cast<size_t>(i) * static_cast<size_t>(nslots),
                        static_cast<size_t>(nslots));
                    residuals[static_cast<size_t>(j)][static_cast<size_t>(i)] =
                        s.equations[static_cast<size_t>(j)].eval_slot_partials(x, slots, part);
                } else {
                    residuals[static_cast<size_t>(j)][static_cast<size_t>(i)] =
                        s.equations[static_cast<size_t>(j)].eval(x, slots);
                }
            }
        }
    });

    std::vector<double> boundary(static_cast<size_t>(s.m), 0.0);
    for (int k = 0; k < s.m; ++k)
        boundary[static_cast<size_t>(k)] =
            caches[static_cast<size_t>(k)][0].stage_v.back()[0] -
            s.initial_values[static_cast<size_t>(k)];

    double loss = 0.0;
    std::vector<std::vector<double>> w;
    if (with_grad)
        w.assign(static_cast<size_t>(s.m), std::vector<double>(static_cast<size_t>(n1), 0.0));
    for (int j = 0; j < s.m; ++j) {
        double ss = 0.0;
        for (int i = 1; i < n1; ++i)
            ss += residuals[static_cast<size_t>(j)][static_cast<size_t>(i)] *
                  residuals[static_cast<size_t>(j)][static_cast<size_t>(i)];
        if (cfg.reduction == LossConfig::Reduction::paper_l2_norm) {
            const double norm = std::sqrt(ss);
            loss += cfg.lambda * norm / s.m;
            if (with_grad && norm > kNormFloor)
                for (int i = 1; i < n1; ++i)
                    w[static_cast<size_t>(j)][static_cast<size_t>(i)] =
                        cfg.lambda * residuals[static_cast<size_t>(j)][static_cast<size_t>(i)] /
                        (norm * s.m);
        } else {
            loss += cfg.lambda * ss / (n1 * s.m);
            if (with_grad)
                for (int i = 1; i < n1; ++i)
                    w[static_cast<size_t>(j)][static_cast<size_t>(i)] =
                        2.0 * cfg.lambda *
                        residuals[static_cast<size_t>(j)][static_cast<size_t>(i)] / (n1 * s.m);
        }
    }
    for (double b : boundary)
        loss += b * b;

    if (out_res)
        *out_res = residuals;
    if (out_bnd)
        *out_bnd = boundary;
    if (!with_grad)
        return loss;

    std::fill(grad.begin(), grad.end(), 0.0);
    // Per-state seed vectors assembled from every equation's partials.
    for (int k = 0; k < s.m; ++k) {
        std::vector<double> av(static_cast<size_t>(n1), 0.0);
        std::vector<double> ad1(static_cast<size_t>(n1), 0.0);
        std::vector<double> ufrac(static_cast<size_t>(n1), 0.0);
        for (int j = 0; j < s.m; ++j) {
            for (int i = 1; i < n1; ++i) {
                const double wji = w[static_cast<size_t>(j)][static_cast<size_t>(i)];
                if (wji == 0.0)
                    continue;
                const double* part = partials[static_cast<size_t>(j)].data() +
                                     static_cast<size_t>(i) * static_cast<size_t>(nslots);
                av[static_cast<size_t>(i)] += wji * part[s.value_slot(k)];
                ad1[static_cast<size_t>(i)] += wji * part[s.deriv_slot(k)];
                ufrac[static_cast<size_t>(i)] += wji * part[s.frac_slot(k)];
            }
        }
        if (lay.state_frac[static_cast<size_t>(k)]) {
            std::vector<double> pulled(static_cast<size_t>(n1), 0.0);
            matrix->apply_transpose(ufrac, pulled);
            for (int i = 0; i < n1; ++i)
                av[static_cast<size_t>(i)] += pulled[static_cast<size_t>(i)];
        }
        av[0] += 2.0 * boundary[static_cast<size_t>(k)];

        std::span<double> gk(grad.data() + offsets[static_cast<size_t>(k)],
                             static_cast<size_t>(nets[static_cast<size_t>(k)].parameter_count()));
        const int nthreads = std::max(1, threads);
        std::vector<std::vector<double>> partial_grads;
        if (nthreads > 1)
            partial_grads.assign(static_cast<size_t>(nthreads),
                                 std::vector<double>(gk.size(), 0.0));
        parallel_for_chunks(n1, nthreads, [&](int chunk, int begin, int end) {
            std::span<double> g = gk;
            if (nthreads > 1)
                g = partial_grads[static_cast<size_t>(chunk)];
            for (int i = begin; i < end; ++i) {
                const double a = av[static_cast<size_t>(i)];
                const double a1 = ad1[static_cast<size_t>(i)];
                if (a == 0.0 && a1 == 0.0)
                    continue;
                const EvalCache& c = caches[static_cast<size_t>(k)][static_cast<size_t>(i)];
                const double sv[1] = {a}, s1[1] = {a1};
                nets[static_cast<size_t>(k)].accumulate_gradient(
                    c, sv,
                    c.order >= 1 ? std::span<const double>(s1) : std::span<const double>(), {},
                    g);
            }
        });
        if (nthreads > 1)
            for (const std::vector<double>& pg : partial_grads)
                for (size_t q = 0; q < gk.size(); ++q)
                    gk[q] += pg[q];
    }
    for (size_t k = 0; k < grad.size(); ++k)
        if (!std::isfinite(grad[k]))
            throw std::runtime_error("residual: non-finite gradient at parameter " +
                                     std::to_string(k));
    return loss;
}

} // namespace

std::vector<double> fdde_residuals(const FddeProblem& problem, const Network& net,
                                   const Grid& grid, const CaputoMatrix* matrix,
                                   bool use_history)
{
    std::vector<double> res;
    fdde_assemble(problem, grid, matrix, net, LossConfig{}, use_history, 1, {}, &res, nullptr);
    return res;
}

std::vector<double> fdde_boundary(const FddeProblem& problem, const Network& net)
{
    const FddeLayout lay = fdde_layout(problem);
    EvalCache c;
    net.forward_cached(problem.lo, std::max(lay.base_order, 0), c);
    const int nb = problem.order.initial_value_count();
    std::vector<double> boundary(static_cast<size_t>(nb), 0.0);
    for (int pth = 0; pth < nb; ++pth) {
        const double v = pth == 0   ? c.stage_v.back()[0]
                         : pth == 1 ? c.stage_d1.back()[0]
                                    : c.stage_d2.back()[0];
        boundary[static_cast<size_t>(pth)] = v - problem.initial_values[static_cast<size_t>(pth)];
    }
    return boundary;
}

double fdde_loss(std::span<const double> residuals, std::span<const double> boundary,
                 const LossConfig& cfg)
{
    if (cfg.lambda <= 0.0)
        throw std::invalid_argument("loss: lambda must be positive");
    double ss = 0.0;
    for (double r : residuals)
        ss += r * r;
    double loss = 0.0;
    if (cfg.reduction == LossConfig::Reduction::paper_l2_norm)
        loss = cfg.lambda * std::sqrt(ss);
    else
        loss = residuals.empty() ? 0.0
                                 : cfg.lambda * ss / static_cast<double>(residuals.size());
    for (double b : boundary)
        loss += b * b;
    return loss;
}

std::vector<std::vector<double>> dae_residuals(const DaeSystem& system,
                                               const std::vector<Network>& nets,
                                               const Grid& grid, const CaputoMatrix* matrix)
{
    std::vector<std::vector<double>> res;
    dae_assemble(system, grid, matrix, nets, LossConfig{}, 1, {}, &res, nullptr);
    return res;
}

std::vector<double> dae_boundary(const DaeSystem& system, const std::vector<Network>& nets)
{
    if (static_cast<int>(nets.size()) != system.m)
        throw std::invalid_argument("residual: one network per state required");
    std::vector<double> boundary(static_cast<size_t>(system.m), 0.0);
    for (int k = 0; k < system.m; ++k)
        boundary[static_cast<size_t>(k)] =
            nets[static_cast<size_t>(k)].forward(system.lo)[0] -
            system.initial_values[static_cast<size_t>(k)];
    return boundary;
}

double dae_loss(const std::vector<std::vector<double>>& residuals,
                std::span<const double> boundary, const LossConfig& cfg)
{
    if (cfg.lambda <= 0.0)
        throw std::invalid_argument("loss: lambda must be positive");
    if (residuals.empty())
        throw std::invalid_argument("loss: no residual vectors");
    const double m = static_cast<double>(residuals.size());
    double loss = 0.0;
    for (const std::vector<double>& r : residuals) {
        double ss = 0.0;
        for (double v : r)
            ss += v * v;
        if (cfg.reduction == LossConfig::Reduction::paper_l2_norm)
            loss += cfg.lambda * std::sqrt(ss) / m;
        else
            loss += r.empty() ? 0.0
                              : cfg.lambda * ss / (static_cast<double>(r.size()) * m);
    }
    for (double b : boundary)
        loss += b * b;
    return loss;
}

std::vector<double> fdde_exact_residuals(const FddeProblem& problem, const Grid& grid,
                                         const CaputoMatrix* matrix)
{
    check_grid_matches(grid, problem.lo, problem.hi);
    matrix = check_matrix(matrix, grid, problem.order.alpha, !problem.order.is_integer());
    if (!problem.exact)
        throw std::invalid_argument("residual: problem has no exact solution");
    const FddeLayout lay = fdde_layout(problem);
    const int n1 = grid.size();
    const int nslots = problem.slot_total();
    const int ndelays = static_cast<int>(problem.delays.size());

    std::vector<Jet> jets(static_cast<size_t>(n1));
    for (int i = 0; i < n1; ++i)
        jets[static_cast<size_t>(i)] = problem.exact->eval_jet(grid.node(i));

    std::vector<double> lead(static_cast<size_t>(n1), 0.0);
    if (lay.lead_d1) {
        for (int i = 0; i < n1; ++i)
            lead[static_cast<size_t>(i)] = jets[static_cast<size_t>(i)].d1;
    } else if (lay.lead_d2) {
        for (int i = 0; i < n1; ++i)
            lead[static_cast<size_t>(i)] = jets[static_cast<size_t>(i)].d2;
    } else {
        std::vector<double> samples(static_cast<size_t>(n1));
        for (int i = 0; i < n1; ++i)
            samples[static_cast<size_t>(i)] = lay.lead_matrix_values
                                                  ? jets[static_cast<size_t>(i)].v
                                                  : jets[static_cast<size_t>(i)].d1;
        matrix->apply(samples, lead);
    }

    std::vector<double> residuals(static_cast<size_t>(n1), 0.0);
    std::vector<double> slots(static_cast<size_t>(nslots), 0.0);
    for (int i = 1; i < n1; ++i) {
        const double x = grid.node(i);
        const Jet& jet = jets[static_cast<size_t>(i)];
        slots[FddeProblem::slot_y] = jet.v;
        slots[FddeProblem::slot_d1] = jet.d1;
        slots[FddeProblem::slot_d2] = jet.d2;
        for (int j = 0; j < ndelays; ++j) {
            if (lay.delay_order[static_cast<size_t>(j)] < 0)
                continue;
            const double d = problem.delays[static_cast<size_t>(j)].eval(x);
            const Jet h = (d < problem.lo && problem.history) ? problem.history->eval_jet(d)
                                                              : problem.exact->eval_jet(d);
            slots[static_cast<size_t>(FddeProblem::delayed_value_slot(j))] = h.v;
            slots[static_cast<size_t>(FddeProblem::delayed_deriv_slot(j))] = h.d1;
        }
        residuals[static_cast<size_t>(i)] = lead[static_cast<size_t>(i)] - problem.chi.eval(x, slots);
    }
    return residuals;
}

std::vector<std::vector<double>> dae_exact_residuals(const DaeSystem& system, const Grid& grid,
                                                     const CaputoMatrix* matrix)
{
    check_grid_matches(grid, system.lo, system.hi);
    const DaeLayout lay = dae_layout(system);
    matrix = check_matrix(matrix, grid, system.alpha, lay.any_frac);
    if (system.exact.size() != static_cast<size_t>(system.m))
        throw std::invalid_argument("residual: system has no exact solution");
    const int n1 = grid.size();
    const int nslots = system.slot_total();

    std::vector<std::vector<Jet>> jets(static_cast<size_t>(system.m));
    std::vector<std::vector<double>> frac(static_cast<size_t>(system.m));
    for (int k = 0; k < system.m; ++k) {
        jets[static_cast<size_t>(k)].resize(static_cast<size_t>(n1));
        for (int i = 0; i < n1; ++i)
            jets[static_cast<size_t>(k)][static_cast<size_t>(i)] =
                system.exact[static_cast<size_t>(k)].eval_jet(grid.node(i));
        if (lay.state_frac[static_cast<size_t>(k)]) {
            std::vector<double> values(static_cast<size_t>(n1));
            for (int i = 0; i < n1; ++i)
                values[static_cast<size_t>(i)] =
                    jets[static_cast<size_t>(k)][static_cast<size_t>(i)].v;
            frac[static_cast<size_t>(k)] = matrix->apply(values);
        }
    }

    std::vector<std::vector<double>> residuals(
        static_cast<size_t>(system.m), std::vector<double>(static_cast<size_t>(n1), 0.0));
    std::vector<double> slots(static_cast<size_t>(nslots), 0.0);
    for (int i = 1; i < n1; ++i) {
        const double x = grid.node(i);
        for (int k = 0; k < system.m; ++k) {
            const Jet& jet = jets[static_cast<size_t>(k)][static_cast<size_t>(i)];
            slots[static_cast<size_t>(system.value_slot(k))] = jet.v;
            slots[static_cast<size_t>(system.deriv_slot(k))] = jet.d1;
            slots[static_cast<size_t>(system.frac_slot(k))] =
                lay.state_frac[static_cast<size_t>(k)]
                    ? frac[static_cast<size_t>(k)][static_cast<size_t>(i)]
                    : 0.0;
        }
        for (int j = 0; j < system.m; ++j)
            residuals[static_cast<size_t>(j)][static_cast<size_t>(i)] =
                system.equations[static_cast<size_t>(j)].eval(x, slots);
    }
    return residuals;
}

// ---- objectives ---------------------------------------------------------------

FddeObjective::FddeObjective(FddeProblem problem, Grid grid, LossConfig cfg, int threads,
                             bool use_history)
    : problem_(std::move(problem)), grid_(std::move(grid)), cfg_(cfg), threads_(threads),
      use_history_(use_history),
      proto_(parse_layer_stack(problem_.net_stack), problem_.lo, problem_.hi)
{
    check_grid_matches(grid_, problem_.lo, problem_.hi);
    if (!problem_.order.is_integer()) {
        const auto t0 = std::chrono::steady_clock::now();
        matrix_ = std::make_unique<CaputoMatrix>(grid_, problem_.order.alpha, threads_);
        assembly_seconds_ = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    }
}

int FddeObjective::parameter_count() const
{
    return proto_.parameter_count();
}

double FddeObjective::value(std::span<const double> params) const
{
    Network net = proto_;
    net.set_parameters(params);
    return fdde_assemble(problem_, grid_, matrix_.get(), net, cfg_, use_history_, threads_, {},
                         nullptr, nullptr);
}

double FddeObjective::value_and_gradient(std::span<const double> params,
                                         std::span<double> grad) const
{
    Network net = proto_;
    net.set_parameters(params);
    return fdde_assemble(problem_, grid_, matrix_.get(), net, cfg_, use_history_, threads_,
                         grad, nullptr, nullptr);
}

std::vector<double> FddeObjective::initial_parameters(std::uint64_t seed) const
{
    Network net = proto_;
    net.init_parameters(seed);
    return {net.parameters().begin(), net.parameters().end()};
}

std::vector<double> FddeObjective::predict(std::span<const double> params, double x) const
{
    Network net = proto_;
    net.set_parameters(params);
    return {net.forward(x)[0]};
}

DaeObjective::DaeObjective(DaeSystem system, Grid grid, LossConfig cfg, int threads)
    : system_(std::move(system)), grid_(std::move(grid)), cfg_(cfg), threads_(threads)
{
    check_grid_matches(grid_, system_.lo, system_.hi);
    for (int k = 0; k < system_.m; ++k)
        protos_.emplace_back(parse_layer_stack(system_.net_stack), system_.lo, system_.hi);
    if (system_.uses_fractional()) {
        const auto t0 = std::chrono::steady_clock::now();
        matrix_ = std::make_unique<CaputoMatrix>(grid_, system_.alpha, threads_);
        assembly_seconds_ = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    }
}

int DaeObjective::parameter_count() const
{
    int total = 0;
    for (const Network& net : protos_)
        total += net.parameter_count();
    return total;
}

namespace {

std::vector<Network> with_params(const std::vector<Network>& protos,
                                 std::span<const double> params)
{
    std::vector<Network> nets = protos;
    size_t off = 0;
    for (Network& net : nets) {
        const size_t count = static_cast<size_t>(net.parameter_count());
        if (off + count > params.size())
            throw std::invalid_argument("residual: parameter vector too short");
        net.set_parameters(params.subspan(off, count));
        off += count;
    }
    if (off != params.size())
        throw std::invalid_argument("residual: parameter vector too long");
    return nets;
}

} // namespace

double DaeObjective::value(std::span<const double> params) const
{
    const std::vector<Network> nets = with_params(protos_, params);
    return dae_assemble(system_, grid_, matrix_.get(), nets, cfg_, threads_, {}, nullptr,
                        nullptr);
}

double DaeObjective::value_and_gradient(std::span<const double> params,
                                        std::span<double> grad) const
{
    const std::vector<Network> nets = with_params(protos_, params);
    return dae_assemble(system_, grid_, matrix_.get(), nets, cfg_, threads_, grad, nullptr,
                        nullptr);
}

std::vector<double> DaeObjective::initial_parameters(std::uint64_t seed) const
{
    std::vector<double> params;
    for (size_t k = 0; k < protos_.size(); ++k) {
        Network net = protos_[k];
        net.init_parameters(seed + k);
        params.insert(params.end(), net.parameters().begin(), net.parameters().end());
    }
    return params;
}

std::vector<double> DaeObjective::predict(std::span<const double> params, double x) const
{
    const std::vector<Network> nets = with_params(protos_, params);
    std::vector<double> out;
    for (const Network& net : nets)
        out.push_back(net.forward(x)[0]);
    return out;
}

} // namespace fpinn
