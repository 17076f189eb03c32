#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace msctl {

/// Dense index into one of the network tables. The tag keeps a lane index
/// from being passed where a link index is expected.
template <class Tag>
struct Id {
    std::uint32_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}

    [[nodiscard]] constexpr std::size_t index() const { return value; }

    friend constexpr auto operator<=>(Id, Id) = default;
};

using RegionId = Id<struct RegionTag>;
using LinkId = Id<struct LinkTag>;
using LaneId = Id<struct LaneTag>;
using NodeId = Id<struct NodeTag>;
using PlanId = Id<struct PlanTag>;
using BoundaryId = Id<struct BoundaryTag>;
using ArcId = Id<struct ArcTag>;
using VehicleId = Id<struct VehicleTag>;

}  // namespace msctl

template <class Tag>
struct std::hash<msctl::Id<Tag>> {
    std::size_t operator()(msctl::Id<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
