#include "vforest/forest_io.hpp"

#include "vforest/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace vforest {

namespace {

using ojson = nlohmann::ordered_json;

std::string checksum_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ojson meta_json(const VideoMeta& m) {
    ojson j;
    j["video_id"] = m.video_id;
    j["location"] = m.location;
    j["date"] = m.date.to_string();
    j["fps"] = m.fps;
    j["frame_count"] = m.frame_count;
    j["dim"] = m.dim;
    return j;
}

VideoMeta meta_from(const ojson& j) {
    VideoMeta m;
    m.video_id = j.at("video_id").get<std::string>();
    m.location = j.at("location").get<std::string>();
    m.date = Date::parse(j.at("date").get<std::string>());
    m.fps = j.at("fps").get<double>();
    m.frame_count = j.at("frame_count").get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    return m;
}

ojson descriptor_json(const TrajectoryDescriptor& d) {
    ojson j;
    j["id"] = d.identity;
    j["first_ts"] = d.first_ts;
    j["last_ts"] = d.last_ts;
    j["count"] = d.observation_count;
    j["mean"] = {d.mean_position.x, d.mean_position.y};
    ojson samples = ojson::array();
    for (const auto& s : d.samples) {
        samples.push_back({s.t, s.position.x, s.position.y});
    }
    j["samples"] = std::move(samples);
    return j;
}

TrajectoryDescriptor descriptor_from(const ojson& j) {
    TrajectoryDescriptor d;
    d.identity = j.at("id").get<std::string>();
    d.first_ts = j.at("first_ts").get<double>();
    d.last_ts = j.at("last_ts").get<double>();
    d.observation_count = j.at("count").get<std::size_t>();
    d.mean_position = {j.at("mean").at(0).get<double>(), j.at("mean").at(1).get<double>()};
    for (const auto& s : j.at("samples")) {
        d.samples.push_back({s.at(0).get<double>(), {s.at(1).get<double>(), s.at(2).get<double>()}});
    }
    return d;
}

ojson node_json(const TreeNode& n) {
    ojson j;
    j["id"] = n.id;
    j["frames"] = {n.frame_start, n.frame_end};
    j["t"] = {n.t_start, n.t_end};
    j["depth"] = n.depth;
    j["children"] = n.children;
    j["content"] = n.content;
    j["text"] = n.text ? ojson(*n.text) : ojson();
    if (n.segment) {
        j["segment"] = {n.segment->start_index, n.segment->end_index, n.segment->keyframe_index};
    } else {
        j["segment"] = nullptr;
    }
    ojson reid = ojson::array();
    for (const auto& [_, d] : n.reid_summary) {
        reid.push_back(descriptor_json(d));
    }
    j["reid"] = std::move(reid);
    return j;
}

TreeNode node_from(const ojson& j, const std::string& video_id) {
    TreeNode n;
    n.id = j.at("id").get<NodeId>();
    n.frame_start = j.at("frames").at(0).get<std::size_t>();
    n.frame_end = j.at("frames").at(1).get<std::size_t>();
    n.t_start = j.at("t").at(0).get<double>();
    n.t_end = j.at("t").at(1).get<double>();
    n.depth = j.at("depth").get<int>();
    n.children = j.at("children").get<std::vector<NodeId>>();
    n.content = j.at("content").get<Embedding>();
    if (const auto& t = j.at("text"); !t.is_null()) {
        n.text = t.get<std::string>();
    }
    if (const auto& s = j.at("segment"); !s.is_null()) {
        n.segment = Segment{video_id, s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                            s.at(2).get<std::size_t>()};
    }
    for (const auto& d : j.at("reid")) {
        TrajectoryDescriptor desc = descriptor_from(d);
        Identity id = desc.identity;
        n.reid_summary.emplace(std::move(id), std::move(desc));
    }
    return n;
}

ojson tree_json(const VideoTree& t) {
    ojson j;
    j["video"] = meta_json(t.meta);
    j["fanout"] = t.fanout;
    j["leaf_count"] = t.leaf_count;
    j["root"] = t.root;
    ojson nodes = ojson::array();
    for (const auto& n : t.nodes) {
        nodes.push_back(node_json(n));
    }
    j["nodes"] = std::move(nodes);
    return j;
}

VideoTree tree_from(const ojson& j) {
    VideoTree t;
    t.meta = meta_from(j.at("video"));
    t.fanout = j.at("fanout").get<std::size_t>();
    t.leaf_count = j.at("leaf_count").get<std::size_t>();
    t.root = j.at("root").get<NodeId>();
    for (const auto& n : j.at("nodes")) {
        t.nodes.push_back(node_from(n, t.meta.video_id));
    }
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        if (t.nodes[i].id != i) {
            throw Error(ErrorCode::format, "forest file: node ids of " + t.meta.video_id + " are not in order");
        }
    }
    return t;
}

ojson index_json(const GlobalIdentityIndex& idx) {
    ojson j;
    ojson locs = ojson::object();
    for (const auto& [video, loc] : idx.locations()) {
        locs[video] = loc;
    }
    j["locations"] = std::move(locs);
    ojson entries = ojson::object();
    for (const auto& [id, list] : idx.entries()) {
        ojson arr = ojson::array();
        for (const auto& a : list) {
            arr.push_back({a.video_id, a.node, a.first_ts, a.last_ts});
        }
        entries[id] = std::move(arr);
    }
    j["entries"] = std::move(entries);
    return j;
}

GlobalIdentityIndex index_from(const ojson& j) {
    std::map<std::string, std::string> locs;
    for (const auto& [video, loc] : j.at("locations").items()) {
        locs[video] = loc.get<std::string>();
    }
    std::map<Identity, std::vector<Appearance>> entries;
    for (const auto& [id, arr] : j.at("entries").items()) {
        auto& list = entries[id];
        for (const auto& a : arr) {
            list.push_back({a.at(0).get<std::string>(), a.at(1).get<NodeId>(), a.at(2).get<double>(),
                            a.at(3).get<double>()});
        }
    }
    return GlobalIdentityIndex::from_entries(std::move(entries), std::move(locs));
}

ojson body_json(const Forest& forest) {
    ojson body;
    body["version"] = forest_format_version;
    ojson trees = ojson::array();
    for (const auto& t : forest.trees) {
        trees.push_back(tree_json(t));
    }
    body["trees"] = std::move(trees);
    body["identity_index"] = index_json(forest.identity_index);
    return body;
}

} // namespace

const VideoTree* Forest::find(const std::string& video_id) const {
    for (const auto& t : trees) {
        if (t.meta.video_id == video_id) {
            return &t;
        }
    }
    return nullptr;
}

std::string serialize_forest(const Forest& forest) {
    ojson doc = body_json(forest);
    doc["checksum"] = checksum_hex(doc.dump());
    return doc.dump() + "\n";
}

Forest deserialize_forest(const std::string& text) {
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw Error(ErrorCode::format, std::string("forest file is truncated or malformed: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("version")) {
        throw Error(ErrorCode::format, "forest file has no version field");
    }
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != forest_format_version) {
        throw Error(ErrorCode::version_mismatch, "forest file version " + doc["version"].dump() + ", expected " +
                                                     std::to_string(forest_format_version));
    }
    if (!doc.contains("checksum") || !doc["checksum"].is_string() || !doc.contains("trees") ||
        !doc.contains("identity_index")) {
        throw Error(ErrorCode::format, "forest file is missing trees, identity_index or checksum");
    }
    ojson body;
    body["version"] = doc["version"];
    body["trees"] = doc["trees"];
    body["identity_index"] = doc["identity_index"];
    if (checksum_hex(body.dump()) != doc["checksum"].get<std::string>()) {
        throw Error(ErrorCode::checksum, "forest file checksum mismatch");
    }
    Forest forest;
    try {
        for (const auto& t : body["trees"]) {
            forest.trees.push_back(tree_from(t));
        }
        forest.identity_index = index_from(body["identity_index"]);
    } catch (const ojson::exception& e) {
        throw Error(ErrorCode::format, std::string("forest file has an invalid structure: ") + e.what());
    }
    return forest;
}

void save_forest(const Forest& forest, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write forest file: " + path);
    }
    out << serialize_forest(forest);
    if (!out) {
        throw Error(ErrorCode::io, "failed writing forest file: " + path);
    }
}

Forest load_forest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open forest file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_forest(buf.str());
}

} // namespace vforest
