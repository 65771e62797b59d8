#include "vforest/model.hpp"

#include "vforest/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <utility>

namespace vforest {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

bool parse_uint(std::string_view s, unsigned& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

const json& require(const json& rec, const char* key, std::size_t line) {
    auto it = rec.find(key);
    if (it == rec.end()) {
        throw IngestError(line, std::string("missing field \"") + key + "\"");
    }
    return *it;
}

std::string require_string(const json& rec, const char* key, std::size_t line) {
    const json& v = require(rec, key, line);
    if (!v.is_string()) {
        throw IngestError(line, std::string("field \"") + key + "\" must be a string");
    }
    return v.get<std::string>();
}

double require_number(const json& rec, const char* key, std::size_t line) {
    const json& v = require(rec, key, line);
    if (!v.is_number()) {
        throw IngestError(line, std::string("field \"") + key + "\" must be a number");
    }
    double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw IngestError(line, std::string("field \"") + key + "\" must be finite");
    }
    return d;
}

std::size_t require_index(const json& rec, const char* key, std::size_t line) {
    const json& v = require(rec, key, line);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
        throw IngestError(line, std::string("field \"") + key + "\" must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

void check_timestamp(const json& rec, std::size_t idx, double fps, std::size_t line) {
    auto it = rec.find("t");
    if (it == rec.end()) {
        return;
    }
    if (!it->is_number()) {
        throw IngestError(line, "field \"t\" must be a number");
    }
    double expected = static_cast<double>(idx) / fps;
    if (std::abs(it->get<double>() - expected) > timestamp_tolerance) {
        throw IngestError(line, "timestamp disagrees with frame_index / fps");
    }
}

} // namespace

std::optional<Date> Date::try_parse(std::string_view text) noexcept {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    unsigned y = 0, m = 0, d = 0;
    if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) ||
        !parse_uint(text.substr(8, 2), d)) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(y)),
                                    std::chrono::month(m), std::chrono::day(d)};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Date{static_cast<int>(y), m, d};
}

Date Date::parse(std::string_view text) {
    auto d = try_parse(text);
    if (!d) {
        throw Error(ErrorCode::validation, "invalid ISO-8601 date: \"" + std::string(text) + "\"");
    }
    return *d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
    return buf;
}

DetectionIndex::DetectionIndex(std::span<const PersonDetection> sorted_detections,
                               std::size_t frame_count)
    : detections_(sorted_detections), offsets_(frame_count + 1, 0) {
    for (const auto& det : sorted_detections) {
        if (det.frame_index < frame_count) {
            ++offsets_[det.frame_index + 1];
        }
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) {
        offsets_[i] += offsets_[i - 1];
    }
}

std::span<const PersonDetection> DetectionIndex::at(std::size_t frame_index) const noexcept {
    if (frame_index + 1 >= offsets_.size()) {
        return {};
    }
    return detections_.subspan(offsets_[frame_index], offsets_[frame_index + 1] - offsets_[frame_index]);
}

std::span<const PersonDetection> DetectionIndex::range(std::size_t first_frame,
                                                       std::size_t last_frame) const noexcept {
    if (offsets_.empty() || first_frame > last_frame) {
        return {};
    }
    std::size_t n = offsets_.size() - 1;
    if (first_frame >= n) {
        return {};
    }
    last_frame = std::min(last_frame, n - 1);
    return detections_.subspan(offsets_[first_frame], offsets_[last_frame + 1] - offsets_[first_frame]);
}

VideoStream ingest_stream(std::istream& in) {
    VideoStream out;
    bool have_meta = false;
    std::string text;
    std::size_t line = 0;
    // (frame_index, identity) -> line of first occurrence
    std::map<std::pair<std::size_t, Identity>, std::size_t> seen_dets;
    std::vector<std::size_t> det_lines;

    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(text);
        } catch (const json::parse_error& e) {
            throw IngestError(line, std::string("malformed record: ") + e.what());
        }
        if (!rec.is_object()) {
            throw IngestError(line, "record must be a JSON object");
        }
        std::string type = require_string(rec, "type", line);

        if (!have_meta) {
            if (type != "meta") {
                throw IngestError(line, "first record must be of type \"meta\"");
            }
            VideoMeta& m = out.meta;
            m.video_id = require_string(rec, "video_id", line);
            if (m.video_id.empty()) {
                throw IngestError(line, "video_id must be nonempty");
            }
            m.location = require_string(rec, "location", line);
            auto date = Date::try_parse(require_string(rec, "date", line));
            if (!date) {
                throw IngestError(line, "date must be an ISO-8601 calendar date (YYYY-MM-DD)");
            }
            m.date = *date;
            m.fps = require_number(rec, "fps", line);
            if (!(m.fps > 0.0)) {
                throw IngestError(line, "fps must be > 0");
            }
            m.dim = require_index(rec, "dim", line);
            if (m.dim == 0) {
                throw IngestError(line, "dim must be >= 1");
            }
            have_meta = true;
            continue;
        }

        if (type == "frame") {
            std::size_t idx = require_index(rec, "idx", line);
            std::size_t expected = out.frames.size();
            if (idx < expected) {
                throw IngestError(line, "non-monotonic frame_index " + std::to_string(idx));
            }
            if (idx > expected) {
                throw IngestError(line, "gap in frame_index: expected " + std::to_string(expected) +
                                            ", got " + std::to_string(idx));
            }
            const json& emb = require(rec, "emb", line);
            if (!emb.is_array()) {
                throw IngestError(line, "field \"emb\" must be an array");
            }
            if (emb.size() != out.meta.dim) {
                throw IngestError(line, "dimension mismatch: expected " + std::to_string(out.meta.dim) +
                                            ", got " + std::to_string(emb.size()));
            }
            check_timestamp(rec, idx, out.meta.fps, line);
            FrameFeature f;
            f.video_id = out.meta.video_id;
            f.frame_index = idx;
            f.timestamp = static_cast<double>(idx) / out.meta.fps;
            f.embedding.reserve(emb.size());
            for (const auto& v : emb) {
                if (!v.is_number() || !std::isfinite(v.get<double>())) {
                    throw IngestError(line, "embedding values must be finite numbers");
                }
                f.embedding.push_back(v.get<double>());
            }
            out.frames.push_back(std::move(f));
        } else if (type == "det") {
            PersonDetection d;
            d.video_id = out.meta.video_id;
            d.frame_index = require_index(rec, "idx", line);
            d.position.x = require_number(rec, "x", line);
            d.position.y = require_number(rec, "y", line);
            if (d.position.x < 0.0 || d.position.x > 1.0 || d.position.y < 0.0 || d.position.y > 1.0) {
                throw IngestError(line, "position out of [0,1]");
            }
            d.identity = require_string(rec, "id", line);
            if (d.identity.empty()) {
                throw IngestError(line, "identity must be nonempty");
            }
            check_timestamp(rec, d.frame_index, out.meta.fps, line);
            d.timestamp = static_cast<double>(d.frame_index) / out.meta.fps;
            auto [it, inserted] = seen_dets.emplace(std::make_pair(d.frame_index, d.identity), line);
            if (!inserted) {
                throw IngestError(line, "duplicate detection of identity \"" + d.identity + "\" in frame " +
                                            std::to_string(d.frame_index));
            }
            out.detections.push_back(std::move(d));
            det_lines.push_back(line);
        } else if (type == "meta") {
            throw IngestError(line, "duplicate meta record");
        } else {
            throw IngestError(line, "unknown record type \"" + type + "\"");
        }
    }

    if (!have_meta) {
        throw IngestError(line, "missing meta record");
    }
    out.meta.frame_count = out.frames.size();
    for (std::size_t i = 0; i < out.detections.size(); ++i) {
        if (out.detections[i].frame_index >= out.meta.frame_count) {
            throw IngestError(det_lines[i], "detection references unknown frame " +
                                                std::to_string(out.detections[i].frame_index));
        }
    }
    std::stable_sort(out.detections.begin(), out.detections.end(),
                     [](const PersonDetection& a, const PersonDetection& b) {
                         return std::tie(a.frame_index, a.identity) < std::tie(b.frame_index, b.identity);
                     });
    return out;
}

VideoStream ingest_stream_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return ingest_stream(in);
}

VideoStream ingest_stream_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open feature stream: " + path);
    }
    try {
        return ingest_stream(in);
    } catch (const IngestError& e) {
        throw IngestError(e.line(), path + ": " + e.what());
    }
}

void write_stream(const VideoStream& stream, std::ostream& out) {
    const VideoMeta& m = stream.meta;
    ordered_json meta;
    meta["type"] = "meta";
    meta["video_id"] = m.video_id;
    meta["location"] = m.location;
    meta["date"] = m.date.to_string();
    meta["fps"] = m.fps;
    meta["dim"] = m.dim;
    out << meta.dump() << '\n';

    DetectionIndex index = stream.detection_index();
    for (const auto& f : stream.frames) {
        ordered_json rec;
        rec["type"] = "frame";
        rec["idx"] = f.frame_index;
        rec["emb"] = f.embedding;
        out << rec.dump() << '\n';
        for (const auto& d : index.at(f.frame_index)) {
            ordered_json det;
            det["type"] = "det";
            det["idx"] = d.frame_index;
            det["x"] = d.position.x;
            det["y"] = d.position.y;
            det["id"] = d.identity;
            out << det.dump() << '\n';
        }
    }
}

std::string write_stream_text(const VideoStream& stream) {
    std::ostringstream out;
    write_stream(stream, out);
    return out.str();
}

IdentitySet identity_set(std::size_t frame_index, const DetectionIndex& detections) {
    IdentitySet ids;
    for (const auto& d : detections.at(frame_index)) {
        ids.insert(d.identity);
    }
    return ids;
}

IdentitySet identity_set(const FrameFeature& frame, const DetectionIndex& detections) {
    return identity_set(frame.frame_index, detections);
}

} // namespace vforest
