#include "fpinn/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace fpinn {

Grid::Grid(std::vector<double> nodes) : nodes_(std::move(nodes))
{
    if (nodes_.size() < 2)
        throw std::invalid_argument("Grid: need at least two nodes");
    for (double t : nodes_)
        if (!std::isfinite(t))
            throw std::invalid_argument("Grid: nodes must be finite");
    const double span = nodes_.back() - nodes_.front();
    if (!(span > 0.0))
        throw std::invalid_argument("Grid: nodes must be strictly increasing");
    const double min_gap = 1e-12 * span;
    for (size_t k = 1; k < nodes_.size(); ++k)
        if (!(nodes_[k] - nodes_[k - 1] > min_gap))
            throw std::invalid_argument("Grid: nodes must be strictly increasing (duplicate or near-duplicate node)");
}

Grid Grid::uniform(double a, double b, int intervals)
{
    return graded(a, b, intervals, 1.0);
}

Grid Grid::graded(double a, double b, int intervals, double exponent)
{
    if (intervals < 1)
        throw std::invalid_argument("Grid: need at least one interval");
    if (!(b > a))
        throw std::invalid_argument("Grid: interval must satisfy b > a");
    if (!(exponent >= 1.0))
        throw std::invalid_argument("Grid: grading exponent must be >= 1");
    std::vector<double> nodes(static_cast<size_t>(intervals) + 1);
    const double n = static_cast<double>(intervals);
    for (int k = 0; k <= intervals; ++k)
        nodes[static_cast<size_t>(k)] = a + (b - a) * std::pow(k / n, exponent);
    nodes.front() = a;
    nodes.back() = b;
    return Grid(std::move(nodes));
}

} // namespace fpinn
