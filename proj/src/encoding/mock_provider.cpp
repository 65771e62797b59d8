#include "vforest/mock_provider.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace vforest {

namespace {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string join_ids(std::span<const PersonDetection> detections) {
    IdentitySet ids;
    for (const auto& d : detections) {
        ids.insert(d.identity);
    }
    if (ids.empty()) {
        return "none";
    }
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) {
            out += ",";
        }
        out += id;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void parse_fail(std::string_view text, const std::string& why) {
    throw Error(ErrorCode::parse, "cannot parse query \"" + std::string(text) + "\": " + why);
}

std::vector<std::string> parse_locations(const std::vector<std::string>& tokens, std::string_view text) {
    std::vector<std::string> locs;
    std::string current;
    auto flush = [&] {
        std::string t = trim(current);
        if (t.empty()) {
            parse_fail(text, "empty location");
        }
        locs.push_back(t);
        current.clear();
    };
    for (const auto& tok : tokens) {
        if (lower(tok) == "and") {
            flush();
            continue;
        }
        std::string piece = tok;
        bool comma = !piece.empty() && piece.back() == ',';
        if (comma) {
            piece.pop_back();
        }
        if (!current.empty()) {
            current += ' ';
        }
        current += piece;
        if (comma) {
            flush();
        }
    }
    flush();
    return locs;
}

} // namespace

Embedding MockProvider::hash_embedding(std::string_view bytes, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(fnv1a64(bytes) ^ seed);
    Embedding v(dim);
    double norm2 = 0.0;
    for (auto& x : v) {
        double u1 = unit_uniform(rng);
        double u2 = unit_uniform(rng);
        x = std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
        norm2 += x * x;
    }
    double norm = std::sqrt(norm2);
    if (norm > 0.0) {
        for (auto& x : v) {
            x /= norm;
        }
    }
    return v;
}

std::string MockProvider::segment_bytes(std::span<const double> keyframe,
                                        std::span<const PersonDetection> detections) {
    std::string bytes;
    bytes.reserve(keyframe.size() * 8);
    for (double x : keyframe) {
        auto bits = std::bit_cast<std::uint64_t>(x);
        for (int b = 0; b < 8; ++b) {
            bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
        }
    }
    IdentitySet ids;
    for (const auto& d : detections) {
        ids.insert(d.identity);
    }
    for (const auto& id : ids) {
        bytes.push_back('\x1F');
        bytes += id;
    }
    return bytes;
}

Embedding MockProvider::do_embed_text(std::string_view text) {
    return hash_embedding("text:" + std::string(text), dim_, seed_);
}

SegmentEncoding MockProvider::do_encode_segment(const SegmentInput& input) {
    SegmentEncoding enc;
    enc.segment = input.segment;
    enc.content = hash_embedding(segment_bytes(input.keyframe_embedding, input.detections), dim_, seed_);
    enc.summary_text = do_caption(input);
    return enc;
}

std::string MockProvider::do_caption(const SegmentInput& input) {
    return "persons " + join_ids(input.detections) + " present, frames " +
           std::to_string(input.segment.start_index) + "-" + std::to_string(input.segment.end_index);
}

nlohmann::json MockProvider::do_parse_query(std::string_view text) {
    return mock_parse_query(text);
}

std::string MockProvider::do_synthesize(std::string_view task, std::span<const std::string> evidence) {
    std::string out = "summary (" + std::string(task) + "): ";
    if (evidence.empty()) {
        return out + "no evidence";
    }
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (i > 0) {
            out += "; ";
        }
        out += evidence[i];
    }
    return out;
}

nlohmann::json mock_parse_query(std::string_view text) {
    std::string body = trim(text);
    while (!body.empty() && (body.back() == '?' || body.back() == '.')) {
        body.pop_back();
    }
    std::vector<std::string> tokens;
    {
        std::istringstream in(body);
        for (std::string t; in >> t;) {
            tokens.push_back(t);
        }
    }
    auto kw = [&](std::size_t i, std::string_view word) {
        return i < tokens.size() && lower(tokens[i]) == word;
    };

    nlohmann::json q;
    std::size_t rest = 0;
    if (kw(0, "who") && kw(1, "appeared") && kw(2, "in")) {
        q["task"] = "common_identity";
        rest = 3;
    } else if (kw(0, "when") && kw(1, "was") && tokens.size() > 3 && kw(3, "in")) {
        q["task"] = "locate";
        q["identities"] = {tokens[2]};
        rest = 4;
    } else if (kw(0, "was") && tokens.size() > 2 && (kw(2, "in") || (kw(2, "present") && kw(3, "in")))) {
        q["task"] = "presence";
        q["identities"] = {tokens[1]};
        rest = kw(2, "in") ? 3 : 4;
    } else if (kw(0, "how") && kw(1, "many") && (kw(2, "people") || kw(2, "persons")) && kw(3, "were") &&
               kw(4, "in")) {
        q["task"] = "count";
        rest = 5;
    } else if (kw(0, "summarize")) {
        q["task"] = "summarize";
        rest = kw(1, "in") ? 2 : 1;
    } else {
        parse_fail(text, "not in the supported grammar");
    }

    std::size_t on = tokens.size();
    for (std::size_t i = tokens.size(); i > rest; --i) {
        if (kw(i - 1, "on")) {
            on = i - 1;
            break;
        }
    }
    std::vector<std::string> loc_tokens(tokens.begin() + static_cast<std::ptrdiff_t>(rest),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(on));
    if (loc_tokens.empty()) {
        parse_fail(text, "missing location");
    }
    std::vector<std::string> locs = parse_locations(loc_tokens, text);
    q["locations"] = locs;

    bool temporal = false;
    if (on < tokens.size()) {
        std::vector<std::string> dt(tokens.begin() + static_cast<std::ptrdiff_t>(on + 1), tokens.end());
        std::optional<Date> from, to;
        if (dt.size() == 1) {
            from = to = Date::try_parse(dt[0]);
        } else if (dt.size() == 3 && (lower(dt[1]) == "to" || lower(dt[1]) == "and")) {
            from = Date::try_parse(dt[0]);
            to = Date::try_parse(dt[2]);
        }
        if (!from || !to) {
            parse_fail(text, "bad date expression");
        }
        if (*to < *from) {
            std::swap(from, to);
        }
        q["date_range"] = {{"from", from->to_string()}, {"to", to->to_string()}};
        temporal = *from != *to;
    }
    bool spatial = locs.size() > 1;
    q["modality"] = spatial && temporal ? "cross_spatiotemporal"
                    : spatial           ? "cross_spatial"
                    : temporal          ? "cross_temporal"
                                        : "single";
    q["description"] = body;
    return q;
}

} // namespace vforest
