#pragma once

#include <limits>
#include <span>
#include <vector>

#include "msctl/network.hpp"

namespace msctl {

/// Shortest-time tree toward one destination link, built by label setting on
/// reversed link adjacency. Costs are per-link traversal times; the cost of a
/// route counts every link after the one the vehicle is on.
class PathTree {
public:
    static constexpr double kUnreachable = std::numeric_limits<double>::infinity();

    PathTree(const Network& net, LinkId destination, std::span<const double> link_cost);

    [[nodiscard]] LinkId destination() const { return destination_; }

    /// Cost of the cheapest continuation after leaving `link`.
    [[nodiscard]] double cost_to_go(LinkId link) const { return cost_[link.index()]; }

    /// Cheapest route starting at `from` whose first hop is restricted to
    /// `first_hops` (all successors when empty). Empty if unreachable.
    [[nodiscard]] std::vector<LinkId> route_from(LinkId from, std::span<const LinkId> first_hops = {}) const;

private:
    const Network* net_;
    LinkId destination_;
    std::vector<double> link_cost_;
    std::vector<double> cost_;
    std::vector<std::uint32_t> next_;
};

/// Sum of per-link costs over route[1..].
double route_cost(std::span<const LinkId> route, std::span<const double> link_cost);

}  // namespace msctl
