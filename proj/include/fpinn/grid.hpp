#pragma once

#include <vector>

namespace fpinn {

/// Strictly increasing collocation nodes t_0 < t_1 < ... < t_n on a closed
/// interval. Backbone of the fractional-derivative discretization.
class Grid {
public:
    /// Takes ownership of the node list; validates finiteness, ordering and
    /// a minimum relative gap of 1e-12 of the span.
    explicit Grid(std::vector<double> nodes);

    /// n+1 equally spaced nodes on [a, b].
    static Grid uniform(double a, double b, int intervals);

    /// Graded mesh t_k = a + (b-a)(k/n)^r, r >= 1. Clusters nodes near the
    /// left endpoint where Caputo-type solutions may have weak singularities.
    /// r = 1 reduces to the uniform mesh.
    static Grid graded(double a, double b, int intervals, double exponent);

    const std::vector<double>& nodes() const { return nodes_; }
    double node(int k) const { return nodes_[static_cast<size_t>(k)]; }
    double origin() const { return nodes_.front(); }
    double end() const { return nodes_.back(); }
    double span() const { return nodes_.back() - nodes_.front(); }
    /// Number of points, n+1.
    int size() const { return static_cast<int>(nodes_.size()); }
    /// Number of intervals, n.
    int intervals() const { return size() - 1; }

private:
    std::vector<double> nodes_;
};

} // namespace fpinn
