#include "vforest/agents.hpp"

#include "vforest/error.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace vforest {

namespace {

using json = nlohmann::json;

bool identity_task(Task t) {
    return t == Task::presence || t == Task::locate;
}

std::string format_seconds(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    return buf;
}

std::string join(const IdentitySet& ids, const char* sep = ", ") {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) {
            out += sep;
        }
        out += id;
    }
    return out;
}

const VideoTree* tree_of(const std::vector<const VideoTree*>& selected, const std::string& video_id) {
    for (const VideoTree* t : selected) {
        if (t->meta.video_id == video_id) {
            return t;
        }
    }
    return nullptr;
}

json video_json(const VideoMeta& m) {
    return {{"video_id", m.video_id}, {"location", m.location}, {"date", m.date.to_string()}};
}

KBEntry fact(const VideoMeta& m, std::string description) {
    return {m.date, m.location, std::move(description), 1};
}

void add_fact(std::vector<KBEntry>& facts, KBEntry e) {
    auto same = std::find_if(facts.begin(), facts.end(), [&](const KBEntry& f) { return f.same_fact(e); });
    if (same == facts.end()) {
        facts.push_back(std::move(e));
    }
}

// Per-video identities seen in the hits.
std::map<std::string, IdentitySet> hit_identities(const std::vector<const VideoTree*>& selected,
                                                  const std::vector<SearchHit>& hits) {
    std::map<std::string, IdentitySet> out;
    for (const auto& h : hits) {
        const VideoTree* t = tree_of(selected, h.video_id);
        if (!t) {
            continue;
        }
        auto ids = t->node(h.node).identities();
        out[h.video_id].insert(ids.begin(), ids.end());
    }
    return out;
}

bool mentions_any(const std::string& description, const IdentitySet& ids) {
    std::string padded = " " + description + " ";
    for (const auto& id : ids) {
        if (padded.find(" " + id + " ") != std::string::npos) {
            return true;
        }
    }
    return false;
}

void answer_identity_task(const StructuredQuery& query, const std::vector<const VideoTree*>& selected,
                          const KBContext& context, Answer& a) {
    const IdentitySet& required = *query.identities;
    json videos = json::array();
    std::set<std::string> supporting;
    for (const VideoTree* t : selected) {
        json intervals = json::array();
        for (const auto& h : a.hits) {
            if (h.video_id == t->meta.video_id && t->node(h.node).contains_all(required)) {
                intervals.push_back({h.t_start, h.t_end});
            }
        }
        if (!intervals.empty()) {
            json v = video_json(t->meta);
            v["intervals"] = std::move(intervals);
            videos.push_back(std::move(v));
            supporting.insert(t->meta.video_id);
            for (const auto& id : required) {
                add_fact(a.derived_facts, fact(t->meta, presence_fact(id)));
            }
        }
    }

    // Fresh hits win over stored presence facts they contradict.
    for (const auto& r : context.entries) {
        for (const auto& id : required) {
            if (r.entry.description != presence_fact(id)) {
                continue;
            }
            bool in_scope = false, confirmed = false;
            for (const VideoTree* t : selected) {
                if (t->meta.date == r.entry.date && t->meta.location == r.entry.location) {
                    in_scope = true;
                    confirmed = confirmed || supporting.count(t->meta.video_id) > 0;
                }
            }
            if (in_scope && !confirmed) {
                add_fact(a.derived_facts, {r.entry.date, r.entry.location, "person " + id + " not present", 1});
            }
        }
    }

    bool present = !supporting.empty();
    a.payload["identities"] = required;
    if (query.task == Task::presence) {
        a.payload["present"] = present;
    }
    a.payload["videos"] = std::move(videos);
    if (a.insufficient_evidence) {
        return;
    }
    if (!present) {
        a.text = "person " + join(required, " and ") + " not found in the selected videos";
        return;
    }
    std::string where;
    for (const auto& v : a.payload["videos"]) {
        if (!where.empty()) {
            where += "; ";
        }
        where += v["video_id"].get<std::string>() + " (" + v["location"].get<std::string>() + ", " +
                 v["date"].get<std::string>() + ")";
        for (const auto& iv : v["intervals"]) {
            where += " " + format_seconds(iv[0].get<double>()) + "-" + format_seconds(iv[1].get<double>()) + "s";
        }
    }
    a.text = "person " + join(required, " and ") + (query.task == Task::presence ? " present in " : " seen in ") +
             where;
}

} // namespace

std::vector<const VideoTree*> filter_videos(const StructuredQuery& query, const Forest& forest, bool use_filter) {
    if (forest.trees.empty()) {
        throw Error(ErrorCode::validation, "empty corpus: no video trees to search");
    }
    std::vector<const VideoTree*> out;
    for (const auto& t : forest.trees) {
        if (use_filter) {
            if (query.date_range && !query.date_range->contains(t.meta.date)) {
                continue;
            }
            if (query.locations && !query.locations->count(t.meta.location)) {
                continue;
            }
        }
        out.push_back(&t);
    }
    return out;
}

KBContext retrieve_context(const StructuredQuery& query, const KnowledgeBase& kb, std::size_t limit) {
    KBConstraints c;
    c.date_range = query.date_range;
    c.locations = query.locations;
    std::string text = query.query_text();
    if (!text.empty()) {
        c.description_query = text;
    }
    KBContext ctx;
    ctx.entries = kb.retrieve(c);
    if (query.task == Task::presence && query.identities && !query.identities->empty()) {
        ctx.short_circuit = std::all_of(query.identities->begin(), query.identities->end(), [&](const Identity& id) {
            return std::any_of(ctx.entries.begin(), ctx.entries.end(), [&](const RankedEntry& r) {
                return r.priority && r.entry.description == presence_fact(id);
            });
        });
    }
    if (ctx.entries.size() > limit && !ctx.short_circuit) {
        ctx.entries.resize(limit);
    }
    return ctx;
}

NavigationResult navigate(const StructuredQuery& query, const std::vector<const VideoTree*>& selected,
                          Provider& provider, const PipelineOptions& options) {
    NavigationResult nav;
    if (selected.empty()) {
        return nav;
    }
    SearchOptions so = options.search;
    so.trace = true;
    IdentitySet required;
    if (identity_task(query.task)) {
        required = query.identities.value_or(IdentitySet{});
    } else {
        so.tau_rel = 0.0;
    }
    Embedding qvec = provider.embed_text(query.query_text());
    for (const VideoTree* t : selected) {
        SearchResult r = search(qvec, required, *t, cosine_relevance, so);
        std::move(r.hits.begin(), r.hits.end(), std::back_inserter(nav.hits));
        std::move(r.trace.begin(), r.trace.end(), std::back_inserter(nav.trace));
        nav.relevance_evaluations += r.relevance_evaluations;
    }
    return nav;
}

Answer integrate(const StructuredQuery& query, const std::vector<const VideoTree*>& selected,
                 const std::vector<SearchHit>& hits, const KBContext& context, Provider& provider) {
    Answer a;
    a.task = query.task;
    a.hits = hits;
    for (const auto& r : context.entries) {
        bool relevant = identity_task(query.task) ? mentions_any(r.entry.description, *query.identities) : true;
        if (relevant) {
            a.kb_evidence.push_back(r.entry);
        }
    }
    a.insufficient_evidence = a.hits.empty() && a.kb_evidence.empty();
    if (a.insufficient_evidence) {
        a.text = insufficient_evidence_text;
    }

    if (identity_task(query.task)) {
        answer_identity_task(query, selected, context, a);
        return a;
    }

    auto per_video = hit_identities(selected, hits);
    json videos = json::array();
    for (const VideoTree* t : selected) {
        if (per_video.count(t->meta.video_id)) {
            videos.push_back(video_json(t->meta));
        }
    }

    switch (query.task) {
    case Task::common_identity: {
        if (selected.size() < 2) {
            throw Error(ErrorCode::validation, "common_identity needs at least two videos after filtering, got " +
                                                   std::to_string(selected.size()));
        }
        IdentitySet common;
        bool first = true;
        for (const VideoTree* t : selected) {
            const IdentitySet& ids = per_video[t->meta.video_id];
            if (first) {
                common = ids;
                first = false;
            } else {
                IdentitySet next;
                std::set_intersection(common.begin(), common.end(), ids.begin(), ids.end(),
                                      std::inserter(next, next.end()));
                common = std::move(next);
            }
        }
        for (const auto& id : common) {
            for (const VideoTree* t : selected) {
                add_fact(a.derived_facts, fact(t->meta, presence_fact(id)));
            }
        }
        a.payload["identities"] = common;
        a.payload["videos"] = std::move(videos);
        if (!a.insufficient_evidence) {
            a.text = common.empty() ? "no person appeared in all " + std::to_string(selected.size()) + " videos"
                                    : "appeared in all " + std::to_string(selected.size()) + " videos: " + join(common);
        }
        break;
    }
    case Task::count: {
        IdentitySet all;
        for (const auto& [video, ids] : per_video) {
            all.insert(ids.begin(), ids.end());
            if (const VideoTree* t = tree_of(selected, video)) {
                add_fact(a.derived_facts, fact(t->meta, std::to_string(ids.size()) + " persons present"));
            }
        }
        a.payload["count"] = all.size();
        a.payload["identities"] = all;
        a.payload["videos"] = std::move(videos);
        if (!a.insufficient_evidence) {
            a.text = std::to_string(all.size()) + " distinct persons across " + std::to_string(per_video.size()) +
                     " videos";
        }
        break;
    }
    case Task::summarize: {
        IdentitySet all;
        std::vector<std::string> texts;
        for (const auto& h : hits) {
            const VideoTree* t = tree_of(selected, h.video_id);
            if (!t) {
                continue;
            }
            auto ids = t->node(h.node).identities();
            all.insert(ids.begin(), ids.end());
            std::string body = h.text ? *h.text : "persons " + (ids.empty() ? std::string("none") : join(ids, ",")) + " present";
            texts.push_back(t->meta.video_id + " (" + t->meta.location + ", " + t->meta.date.to_string() + ") " +
                            format_seconds(h.t_start) + "-" + format_seconds(h.t_end) + "s: " + body);
        }
        for (const auto& e : a.kb_evidence) {
            texts.push_back("noted " + e.date.to_string() + " at " + e.location + ": " + e.description);
        }
        a.payload["identities"] = all;
        a.payload["videos"] = std::move(videos);
        if (!a.insufficient_evidence) {
            a.text = provider.synthesize("summarize", texts);
        }
        break;
    }
    default:
        break;
    }
    return a;
}

namespace {

Answer kb_presence_answer(const StructuredQuery& query, const KBContext& context) {
    Answer a;
    a.task = query.task;
    a.short_circuit = true;
    json videos = json::array();
    for (const auto& r : context.entries) {
        for (const auto& id : *query.identities) {
            if (r.priority && r.entry.description == presence_fact(id)) {
                a.kb_evidence.push_back(r.entry);
                add_fact(a.derived_facts, {r.entry.date, r.entry.location, r.entry.description, 1});
            }
        }
    }
    a.payload["identities"] = *query.identities;
    a.payload["present"] = true;
    a.payload["videos"] = std::move(videos);
    std::string where;
    for (const auto& e : a.kb_evidence) {
        where += (where.empty() ? "" : "; ") + e.location + " on " + e.date.to_string() + " (confidence " +
                 std::to_string(e.confidence) + ")";
    }
    a.text = "person " + join(*query.identities, " and ") + " present per knowledge base: " + where;
    return a;
}

template <typename F>
auto run_stage(int index, const char* name, F&& body) {
    try {
        return body();
    } catch (const ProviderError& e) {
        throw ProviderError(e.rpc_code(), "stage " + std::to_string(index) + " (" + name + "): " + e.what());
    } catch (const Error& e) {
        throw Error(e.code(), "stage " + std::to_string(index) + " (" + name + "): " + e.what());
    }
}

Answer run_pipeline(const StructuredQuery& query, const Forest& forest, KnowledgeBase& kb, Provider& provider,
                    const PipelineOptions& options, const PipelineHooks& hooks, std::size_t calls_before) {
    options.search.validate();
    std::vector<StageRecord> stages;

    auto selected = run_stage(1, "filter", [&] { return filter_videos(query, forest, options.use_filter); });
    stages.push_back({1, "filter", "done",
                      std::to_string(selected.size()) + " of " + std::to_string(forest.trees.size()) + " videos" +
                          (options.use_filter ? "" : " (filter disabled)")});

    KBContext ctx = run_stage(2, "retrieve", [&] { return retrieve_context(query, kb, options.max_kb_evidence); });
    stages.push_back({2, "retrieve", "done",
                      std::to_string(ctx.entries.size()) + " entries" + (ctx.short_circuit ? ", short-circuit" : "")});

    NavigationResult nav;
    Answer answer;
    if (ctx.short_circuit) {
        stages.push_back({3, "navigate", "skipped", "answered from knowledge base"});
        answer = kb_presence_answer(query, ctx);
        stages.push_back({4, "integrate", "skipped", "answered from knowledge base"});
    } else {
        nav = run_stage(3, "navigate", [&] { return navigate(query, selected, provider, options); });
        stages.push_back({3, "navigate", "done",
                          std::to_string(nav.hits.size()) + " hits, " + std::to_string(nav.relevance_evaluations) +
                              " nodes scored"});
        answer = run_stage(4, "integrate", [&] { return integrate(query, selected, nav.hits, ctx, provider); });
        stages.push_back({4, "integrate", "done", answer.insufficient_evidence ? "insufficient evidence" : "answered"});
    }
    if (hooks.reflection) {
        answer.stages = stages;
        hooks.reflection(query, answer);
    }

    run_stage(5, "update", [&] {
        if (answer.derived_facts.empty()) {
            stages.push_back({5, "update", "no-op", "no derived facts"});
            return 0;
        }
        std::map<std::string, int> tally;
        for (const auto& f : answer.derived_facts) {
            ++tally[to_string(kb.upsert(f))];
        }
        std::string detail;
        for (const auto& [outcome, n] : tally) {
            detail += (detail.empty() ? "" : ", ") + std::to_string(n) + " " + outcome;
        }
        stages.push_back({5, "update", "done", detail});
        return 0;
    });

    answer.stages = std::move(stages);
    answer.trace = std::move(nav.trace);
    answer.provider_calls = provider.call_count() - calls_before + nav.relevance_evaluations;
    return answer;
}

} // namespace

Answer answer_query(const StructuredQuery& query, const Forest& forest, KnowledgeBase& kb, Provider& provider,
                    const PipelineOptions& options, const PipelineHooks& hooks) {
    return run_pipeline(query, forest, kb, provider, options, hooks, provider.call_count());
}

Answer answer_query(std::string_view raw_query, const Forest& forest, KnowledgeBase& kb, Provider& provider,
                    const PipelineOptions& options, const PipelineHooks& hooks) {
    std::size_t calls_before = provider.call_count();
    auto first = raw_query.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        throw Error(ErrorCode::parse, "empty query");
    }
    StructuredQuery query = raw_query[first] == '{' ? StructuredQuery::parse(raw_query)
                                                    : StructuredQuery::from_json(provider.parse_query(raw_query));
    return run_pipeline(query, forest, kb, provider, options, hooks, calls_before);
}

} // namespace vforest
