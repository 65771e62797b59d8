#pragma once

#include "vforest/forest.hpp"
#include "vforest/reid_index.hpp"

#include <string>
#include <vector>

namespace vforest {

struct Forest {
    std::vector<VideoTree> trees;
    GlobalIdentityIndex identity_index;

    const VideoTree* find(const std::string& video_id) const;
    bool operator==(const Forest&) const = default;
};

inline constexpr int forest_format_version = 1;

// Single JSON document {"version", "trees", "identity_index", "checksum"};
// the checksum is FNV-1a 64 over the compact dump of the first three fields.
std::string serialize_forest(const Forest& forest);
Forest deserialize_forest(const std::string& text);

void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);

} // namespace vforest
