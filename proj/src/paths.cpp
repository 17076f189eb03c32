#include "msctl/paths.hpp"

#include <queue>
#include <tuple>

namespace msctl {

namespace {
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
}

PathTree::PathTree(const Network& net, LinkId destination, std::span<const double> link_cost)
    : net_(&net),
      destination_(destination),
      link_cost_(link_cost.begin(), link_cost.end()),
      cost_(net.links().size(), kUnreachable),
      next_(net.links().size(), kNone) {
    using Entry = std::tuple<double, std::uint32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    cost_[destination.index()] = 0.0;
    open.emplace(0.0, destination.value);
    std::vector<bool> done(cost_.size(), false);
    while (!open.empty()) {
        auto [c, x] = open.top();
        open.pop();
        if (done[x]) continue;
        done[x] = true;
        const double via = c + link_cost_[x];
        for (LinkId p : net.predecessors(LinkId(x))) {
            const std::size_t pi = p.index();
            if (done[pi]) continue;
            if (via < cost_[pi] || (via == cost_[pi] && x < next_[pi])) {
                cost_[pi] = via;
                next_[pi] = x;
                open.emplace(via, p.value);
            }
        }
    }
}

std::vector<LinkId> PathTree::route_from(LinkId from, std::span<const LinkId> first_hops) const {
    std::vector<LinkId> route{from};
    if (from == destination_) return route;
    LinkId hop;
    if (first_hops.empty()) {
        if (next_[from.index()] == kNone) return {};
        hop = LinkId(next_[from.index()]);
    } else {
        double best = kUnreachable;
        bool found = false;
        for (LinkId x : first_hops) {
            const double c = link_cost_[x.index()] + cost_[x.index()];
            if (c < best || (found && c == best && x < hop)) {
                best = c;
                hop = x;
                found = true;
            }
        }
        if (!found) return {};
    }
    route.push_back(hop);
    while (route.back() != destination_) {
        const std::uint32_t n = next_[route.back().index()];
        if (n == kNone || route.size() > cost_.size()) return {};
        route.push_back(LinkId(n));
    }
    return route;
}

double route_cost(std::span<const LinkId> route, std::span<const double> link_cost) {
    double c = 0.0;
    for (std::size_t i = 1; i < route.size(); ++i) c += link_cost[route[i].index()];
    return c;
}

}  // namespace msctl
