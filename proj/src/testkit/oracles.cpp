#include "vforest/testkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>

namespace vforest::testkit {

namespace {

double l2(const Embedding& a, const Embedding& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

IdentitySet ids_at(const std::vector<PersonDetection>& detections, std::size_t frame) {
    IdentitySet out;
    for (const auto& d : detections) {
        if (d.frame_index == frame) {
            out.insert(d.identity);
        }
    }
    return out;
}

std::set<std::string> tokens(const std::string& s) {
    std::set<std::string> out;
    std::string cur;
    for (char ch : s + " ") {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || std::ispunct(c)) {
            if (!cur.empty()) {
                out.insert(cur);
            }
            cur.clear();
        } else {
            cur += static_cast<char>(std::tolower(c));
        }
    }
    return out;
}

} // namespace

std::vector<OracleFlags> oracle_boundary_flags(const std::vector<FrameFeature>& frames,
                                               const std::vector<PersonDetection>& detections, double eps1,
                                               double eps2, std::size_t delta_p) {
    std::vector<OracleFlags> flags(frames.size());
    std::size_t seg_start = 0;
    for (std::size_t j = 1; j < frames.size(); ++j) {
        // centroid of frames seg_start .. j-1, recomputed from scratch
        Embedding mean(frames[j].embedding.size(), 0.0);
        for (std::size_t k = seg_start; k < j; ++k) {
            for (std::size_t i = 0; i < mean.size(); ++i) {
                mean[i] += frames[k].embedding[i];
            }
        }
        for (auto& x : mean) {
            x /= static_cast<double>(j - seg_start);
        }
        IdentitySet prev = ids_at(detections, j - 1);
        IdentitySet curr = ids_at(detections, j);
        std::size_t sym = 0;
        for (const auto& id : prev) {
            sym += curr.count(id) ? 0 : 1;
        }
        for (const auto& id : curr) {
            sym += prev.count(id) ? 0 : 1;
        }
        flags[j].c1 = l2(frames[j].embedding, frames[j - 1].embedding) > eps1;
        flags[j].c2 = l2(frames[j].embedding, mean) > eps2;
        flags[j].c3 = sym >= delta_p;
        if (flags[j].any()) {
            seg_start = j;
        }
    }
    return flags;
}

std::vector<std::pair<std::size_t, std::size_t>> oracle_segment(const std::vector<FrameFeature>& frames,
                                                                const std::vector<PersonDetection>& detections,
                                                                double eps1, double eps2, std::size_t delta_p) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (frames.empty()) {
        return out;
    }
    auto flags = oracle_boundary_flags(frames, detections, eps1, eps2, delta_p);
    std::size_t start = 0;
    for (std::size_t j = 1; j < frames.size(); ++j) {
        if (flags[j].any()) {
            out.emplace_back(start, j - 1);
            start = j;
        }
    }
    out.emplace_back(start, frames.size() - 1);
    return out;
}

double oracle_calibrate(const std::vector<FrameFeature>& frames) {
    if (frames.size() < 2) {
        return INFINITY;
    }
    std::vector<double> d;
    for (std::size_t j = 1; j < frames.size(); ++j) {
        d.push_back(l2(frames[j].embedding, frames[j - 1].embedding));
    }
    double mean = 0.0;
    for (double x : d) {
        mean += x;
    }
    mean /= static_cast<double>(d.size());
    double var = 0.0;
    for (double x : d) {
        var += (x - mean) * (x - mean);
    }
    var /= static_cast<double>(d.size());
    return mean + 2.0 * std::sqrt(var);
}

OracleSearchResult oracle_search(const std::vector<OracleNode>& nodes, std::size_t root, double tau_rel,
                                 const IdentitySet& required, bool use_reid, std::optional<int> max_depth,
                                 bool leaf_fallback) {
    OracleSearchResult result;
    std::vector<std::size_t> emitted;      // literal hits
    std::vector<std::size_t> terminal_miss;

    auto pruned = [&](std::size_t v) {
        if (!use_reid || required.empty()) {
            return false;
        }
        return !std::includes(nodes[v].identities.begin(), nodes[v].identities.end(), required.begin(),
                              required.end());
    };
    auto is_terminal = [&](std::size_t v) {
        return nodes[v].children.empty() || (max_depth && nodes[v].depth >= *max_depth);
    };

    std::function<void(std::size_t)> walk = [&](std::size_t v) {
        if (pruned(v)) {
            return;
        }
        result.scored.insert(v);
        if (nodes[v].relevance >= tau_rel) {
            emitted.push_back(v);
            return;
        }
        if (is_terminal(v)) {
            terminal_miss.push_back(v);
            return;
        }
        for (auto c : nodes[v].children) {
            walk(c);
        }
    };
    walk(root);

    // preorder position and subtree membership
    std::vector<std::size_t> order;
    std::function<void(std::size_t)> pre = [&](std::size_t v) {
        order.push_back(v);
        for (auto c : nodes[v].children) {
            pre(c);
        }
    };
    pre(root);
    std::vector<std::size_t> pos(nodes.size(), 0), parent(nodes.size(), nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        pos[order[i]] = i;
        for (auto c : nodes[order[i]].children) {
            parent[c] = order[i];
        }
    }
    auto in_subtree = [&](std::size_t x, std::size_t v) {
        for (std::size_t y = x; y != nodes.size(); y = parent[y]) {
            if (y == v) {
                return true;
            }
        }
        return false;
    };
    auto subtree_has_hit = [&](std::size_t v) {
        return std::any_of(emitted.begin(), emitted.end(), [&](std::size_t h) { return in_subtree(h, v); });
    };

    std::vector<std::pair<std::size_t, bool>> hits;
    for (auto h : emitted) {
        hits.emplace_back(h, false);
    }
    if (leaf_fallback) {
        // Maximal scored subtrees without a hit whose parent's subtree has one
        // (or the root itself), each contributing its best terminal miss.
        for (auto v : result.scored) {
            if (subtree_has_hit(v)) {
                continue;
            }
            bool maximal = v == root || subtree_has_hit(parent[v]);
            if (!maximal) {
                continue;
            }
            std::optional<std::size_t> best;
            for (auto m : terminal_miss) {
                if (in_subtree(m, v) &&
                    (!best || nodes[m].relevance > nodes[*best].relevance ||
                     (nodes[m].relevance == nodes[*best].relevance && pos[m] < pos[*best]))) {
                    best = m;
                }
            }
            if (best) {
                hits.emplace_back(*best, true);
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) { return pos[a.first] < pos[b.first]; });
    result.hits = std::move(hits);
    return result;
}

double oracle_jaccard(const std::string& a, const std::string& b) {
    auto ta = tokens(a);
    auto tb = tokens(b);
    std::set<std::string> uni = ta;
    uni.insert(tb.begin(), tb.end());
    if (uni.empty()) {
        return 1.0;
    }
    std::size_t inter = 0;
    for (const auto& t : ta) {
        inter += tb.count(t);
    }
    return static_cast<double>(inter) / static_cast<double>(uni.size());
}

void oracle_kb_upsert(std::vector<OracleFact>& kb, const OracleFact& incoming, int c_max, double tau_sim,
                      const OracleSimilarity& similarity) {
    // (a) exact match
    for (auto& e : kb) {
        if (e.date == incoming.date && e.location == incoming.location && e.description == incoming.description) {
            e.confidence = e.confidence + 1 > c_max ? c_max : e.confidence + 1;
            return;
        }
    }
    // (b) conflict: highest similarity, earliest on ties
    std::size_t best = kb.size();
    double best_sim = -1.0;
    for (std::size_t i = 0; i < kb.size(); ++i) {
        const auto& e = kb[i];
        if (e.date != incoming.date || e.location != incoming.location || e.description == incoming.description) {
            continue;
        }
        double s = similarity(incoming.description, e.description);
        if (s > tau_sim && s > best_sim) {
            best = i;
            best_sim = s;
        }
    }
    if (best < kb.size()) {
        if (kb[best].confidence > 2) {
            kb[best].confidence -= 1;
        } else {
            kb.erase(kb.begin() + static_cast<std::ptrdiff_t>(best));
            kb.push_back({incoming.date, incoming.location, incoming.description, 1});
        }
        return;
    }
    // (c) novel
    kb.push_back({incoming.date, incoming.location, incoming.description, 1});
}

std::vector<OracleFact> oracle_retrieve(const std::vector<OracleFact>& kb, const std::optional<DateRange>& dates,
                                        const std::optional<std::set<std::string>>& locations,
                                        const std::optional<std::string>& query, int tau_conf,
                                        const OracleSimilarity& similarity) {
    struct Row {
        OracleFact fact;
        double sim;
        std::size_t index;
    };
    std::vector<Row> high, low;
    for (std::size_t i = 0; i < kb.size(); ++i) {
        const auto& e = kb[i];
        if (dates && (e.date < dates->from || dates->to < e.date)) {
            continue;
        }
        if (locations && std::find(locations->begin(), locations->end(), e.location) == locations->end()) {
            continue;
        }
        Row r{e, query ? similarity(*query, e.description) : 0.0, i};
        (e.confidence >= tau_conf ? high : low).push_back(r);
    }
    // insertion sort keeps this obviously correct
    auto ordered = [](std::vector<Row> rows) {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            for (std::size_t j = i; j > 0; --j) {
                const Row& a = rows[j - 1];
                const Row& b = rows[j];
                bool swap = b.fact.confidence > a.fact.confidence ||
                            (b.fact.confidence == a.fact.confidence && b.sim > a.sim) ||
                            (b.fact.confidence == a.fact.confidence && b.sim == a.sim && b.index < a.index);
                if (!swap) {
                    break;
                }
                std::swap(rows[j - 1], rows[j]);
            }
        }
        return rows;
    };
    std::vector<OracleFact> out;
    for (const auto& r : ordered(high)) {
        out.push_back(r.fact);
    }
    for (const auto& r : ordered(low)) {
        out.push_back(r.fact);
    }
    return out;
}

std::vector<std::string> oracle_filter(const std::vector<VideoMeta>& videos, const std::optional<DateRange>& dates,
                                       const std::optional<std::set<std::string>>& locations) {
    std::vector<std::string> out;
    for (const auto& v : videos) {
        bool date_ok = !dates || (dates->from <= v.date && v.date <= dates->to);
        bool loc_ok = !locations || locations->count(v.location) > 0;
        if (date_ok && loc_ok) {
            out.push_back(v.video_id);
        }
    }
    return out;
}

std::vector<PersonDetection> oracle_detections(const std::vector<VideoStream>& streams, const Identity& identity,
                                               const std::optional<std::pair<double, double>>& window,
                                               const std::optional<std::set<std::string>>& locations) {
    std::vector<PersonDetection> out;
    for (const auto& s : streams) {
        if (locations && !locations->count(s.meta.location)) {
            continue;
        }
        for (const auto& d : s.detections) {
            if (d.identity != identity) {
                continue;
            }
            if (window && (d.timestamp < window->first || d.timestamp > window->second)) {
                continue;
            }
            out.push_back(d);
        }
    }
    return out;
}

IdentitySet oracle_common_identities(const std::vector<VideoStream>& streams,
                                     const std::vector<std::string>& video_ids,
                                     const std::optional<std::pair<double, double>>& window) {
    IdentitySet out;
    bool first = true;
    for (const auto& vid : video_ids) {
        IdentitySet ids;
        for (const auto& s : streams) {
            if (s.meta.video_id != vid) {
                continue;
            }
            for (const auto& d : s.detections) {
                if (!window || (d.timestamp >= window->first && d.timestamp <= window->second)) {
                    ids.insert(d.identity);
                }
            }
        }
        if (first) {
            out = ids;
            first = false;
        } else {
            IdentitySet keep;
            for (const auto& id : out) {
                if (ids.count(id)) {
                    keep.insert(id);
                }
            }
            out = std::move(keep);
        }
    }
    return out;
}

} // namespace vforest::testkit
