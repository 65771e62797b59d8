#include "vforest/reid_index.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <tuple>

namespace vforest {

namespace {

void sort_appearances(std::vector<Appearance>& list) {
    std::sort(list.begin(), list.end(), [](const Appearance& a, const Appearance& b) {
        return std::tie(a.video_id, a.first_ts, a.node) < std::tie(b.video_id, b.first_ts, b.node);
    });
}

} // namespace

GlobalIdentityIndex::GlobalIdentityIndex(std::span<const VideoTree> forest) {
    for (const auto& tree : forest) {
        location_of_[tree.meta.video_id] = tree.meta.location;
        per_video_[tree.meta.video_id];
        for (const auto& node : tree.nodes) {
            if (!node.is_leaf()) {
                continue;
            }
            for (const auto& [id, desc] : node.reid_summary) {
                entries_[id].push_back({tree.meta.video_id, node.id, desc.first_ts, desc.last_ts});
                per_video_[tree.meta.video_id].insert(id);
            }
        }
    }
    for (auto& [_, list] : entries_) {
        sort_appearances(list);
    }
}

GlobalIdentityIndex GlobalIdentityIndex::from_entries(std::map<Identity, std::vector<Appearance>> entries,
                                                      std::map<std::string, std::string> location_of) {
    GlobalIdentityIndex idx;
    idx.entries_ = std::move(entries);
    idx.location_of_ = std::move(location_of);
    for (const auto& [video, _] : idx.location_of_) {
        idx.per_video_[video];
    }
    for (auto& [id, list] : idx.entries_) {
        sort_appearances(list);
        for (const auto& a : list) {
            idx.per_video_[a.video_id].insert(id);
        }
    }
    return idx;
}

std::vector<Appearance> GlobalIdentityIndex::appearances(const Identity& identity,
                                                         const std::optional<TimeWindow>& window,
                                                         const std::optional<std::set<std::string>>& locations) const {
    std::vector<Appearance> out;
    auto it = entries_.find(identity);
    if (it == entries_.end()) {
        return out;
    }
    for (const auto& a : it->second) {
        if (window && !window->intersects(a.first_ts, a.last_ts)) {
            continue;
        }
        if (locations) {
            auto loc = location_of_.find(a.video_id);
            if (loc == location_of_.end() || !locations->count(loc->second)) {
                continue;
            }
        }
        out.push_back(a);
    }
    return out;
}

const IdentitySet& GlobalIdentityIndex::identities_of(const std::string& video_id) const {
    auto it = per_video_.find(video_id);
    if (it == per_video_.end()) {
        throw Error(ErrorCode::invalid_argument, "unknown video id \"" + video_id + "\"");
    }
    return it->second;
}

IdentitySet GlobalIdentityIndex::identities_common_to(std::span<const std::string> video_ids,
                                                      const std::optional<TimeWindow>& window) const {
    if (video_ids.empty()) {
        throw Error(ErrorCode::invalid_argument, "identities_common_to needs at least one video id");
    }
    auto in_range = [&](const std::string& video) {
        IdentitySet ids;
        for (const auto& id : identities_of(video)) {
            if (!window) {
                ids.insert(id);
                continue;
            }
            const auto& list = entries_.at(id);
            bool hit = std::any_of(list.begin(), list.end(), [&](const Appearance& a) {
                return a.video_id == video && window->intersects(a.first_ts, a.last_ts);
            });
            if (hit) {
                ids.insert(id);
            }
        }
        return ids;
    };
    IdentitySet acc = in_range(video_ids.front());
    for (std::size_t i = 1; i < video_ids.size(); ++i) {
        IdentitySet next = in_range(video_ids[i]);
        IdentitySet both;
        std::set_intersection(acc.begin(), acc.end(), next.begin(), next.end(), std::inserter(both, both.end()));
        acc = std::move(both);
    }
    return acc;
}

} // namespace vforest
