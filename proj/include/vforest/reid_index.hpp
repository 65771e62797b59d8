#pragma once

// Cross-video identity index.  Each identity maps to the leaves in which it
// was detected; shared identities are the joins between video trees.

#include "vforest/forest.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vforest {

struct Appearance {
    std::string video_id;
    NodeId node = 0;
    double first_ts = 0.0;
    double last_ts = 0.0;

    bool operator==(const Appearance&) const = default;
};

// Closed window in video-local seconds.
struct TimeWindow {
    double from = 0.0;
    double to = 0.0;

    bool intersects(double a, double b) const noexcept { return a <= to && from <= b; }
};

class GlobalIdentityIndex {
public:
    GlobalIdentityIndex() = default;
    explicit GlobalIdentityIndex(std::span<const VideoTree> forest);

    // Leaf appearances whose [first_ts, last_ts] meets the window and whose
    // video lies in one of the locations.  Unknown identities yield [].
    std::vector<Appearance> appearances(const Identity& identity, const std::optional<TimeWindow>& window = {},
                                        const std::optional<std::set<std::string>>& locations = {}) const;

    // Intersection of the per-video identity sets, each restricted to the
    // window.  Throws on an unknown video id or an empty id list.
    IdentitySet identities_common_to(std::span<const std::string> video_ids,
                                     const std::optional<TimeWindow>& window = {}) const;

    const IdentitySet& identities_of(const std::string& video_id) const;
    const std::map<Identity, std::vector<Appearance>>& entries() const noexcept { return entries_; }
    const std::map<std::string, std::string>& locations() const noexcept { return location_of_; }
    bool empty() const noexcept { return entries_.empty(); }

    // Rebuilds the derived per-video sets after entries were assigned.
    static GlobalIdentityIndex from_entries(std::map<Identity, std::vector<Appearance>> entries,
                                            std::map<std::string, std::string> location_of);

    bool operator==(const GlobalIdentityIndex&) const = default;

private:
    std::map<Identity, std::vector<Appearance>> entries_;  // sorted by (video_id, first_ts)
    std::map<std::string, IdentitySet> per_video_;
    std::map<std::string, std::string> location_of_;       // video_id -> location label
};

} // namespace vforest
