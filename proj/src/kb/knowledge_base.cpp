#include "vforest/knowledge_base.hpp"

#include "vforest/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>

namespace vforest {

namespace {

std::set<std::string> tokens_of(std::string_view s) {
    std::set<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isspace(c) || std::ispunct(c)) {
            if (!cur.empty()) {
                out.insert(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) {
        out.insert(std::move(cur));
    }
    return out;
}

} // namespace

void KBConfig::validate() const {
    if (c_max < 3) {
        throw Error(ErrorCode::validation, "kb c_max must be >= 3");
    }
    if (!(tau_sim > 0.0 && tau_sim < 1.0)) {
        throw Error(ErrorCode::validation, "kb tau_sim must lie in (0, 1)");
    }
}

double default_similarity(std::string_view a, std::string_view b) {
    auto ta = tokens_of(a);
    auto tb = tokens_of(b);
    if (ta.empty() && tb.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& t : ta) {
        common += tb.count(t);
    }
    return static_cast<double>(common) / static_cast<double>(ta.size() + tb.size() - common);
}

const char* to_string(UpsertOutcome outcome) noexcept {
    switch (outcome) {
    case UpsertOutcome::inserted: return "inserted";
    case UpsertOutcome::reinforced: return "reinforced";
    case UpsertOutcome::decayed: return "decayed";
    case UpsertOutcome::replaced: return "replaced";
    }
    return "unknown";
}

KnowledgeBase::KnowledgeBase(KBConfig config, SimilarityFn similarity)
    : config_(config), similarity_(std::move(similarity)) {
    config_.validate();
    if (!similarity_) {
        similarity_ = default_similarity;
    }
}

KnowledgeBase::KnowledgeBase(const KnowledgeBase& other) {
    std::shared_lock lock(other.mutex_);
    config_ = other.config_;
    similarity_ = other.similarity_;
    entries_ = other.entries_;
}

KnowledgeBase& KnowledgeBase::operator=(const KnowledgeBase& other) {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        config_ = other.config_;
        similarity_ = other.similarity_;
        entries_ = other.entries_;
    }
    return *this;
}

UpsertOutcome KnowledgeBase::upsert(const KBEntry& entry) {
    if (entry.description.empty() || entry.location.empty()) {
        throw Error(ErrorCode::validation, "kb entry needs a nonempty location and description");
    }
    UpsertOutcome outcome;
    WriteObserver observer;
    {
        std::unique_lock lock(mutex_);
        observer = observer_;
        auto exact = std::find_if(entries_.begin(), entries_.end(),
                                  [&](const KBEntry& e) { return e.same_fact(entry); });
        if (exact != entries_.end()) {
            exact->confidence = std::min(exact->confidence + 1, config_.c_max);
            outcome = UpsertOutcome::reinforced;
        } else {
            auto conflict = entries_.end();
            double best = 0.0;
            for (auto it = entries_.begin(); it != entries_.end(); ++it) {
                if (it->date != entry.date || it->location != entry.location || it->description == entry.description) {
                    continue;
                }
                double s = similarity_(entry.description, it->description);
                if (s > config_.tau_sim && (conflict == entries_.end() || s > best)) {
                    conflict = it;
                    best = s;
                }
            }
            if (conflict == entries_.end()) {
                entries_.push_back({entry.date, entry.location, entry.description, 1});
                outcome = UpsertOutcome::inserted;
            } else if (conflict->confidence > 2) {
                conflict->confidence -= 1;
                outcome = UpsertOutcome::decayed;
            } else {
                entries_.erase(conflict);
                entries_.push_back({entry.date, entry.location, entry.description, 1});
                outcome = UpsertOutcome::replaced;
            }
        }
    }
    if (observer) {
        observer(entry, outcome);
    }
    return outcome;
}

std::vector<RankedEntry> KnowledgeBase::retrieve(const KBConstraints& constraints) const {
    std::vector<RankedEntry> out;
    std::shared_lock lock(mutex_);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const KBEntry& e = entries_[i];
        if (constraints.date_range && !constraints.date_range->contains(e.date)) {
            continue;
        }
        if (constraints.locations && !constraints.locations->count(e.location)) {
            continue;
        }
        RankedEntry r;
        r.entry = e;
        r.similarity = constraints.description_query ? similarity_(*constraints.description_query, e.description) : 0.0;
        r.priority = e.confidence >= config_.tau_conf;
        r.position = i;
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.priority != b.priority) {
            return a.priority;
        }
        if (a.entry.confidence != b.entry.confidence) {
            return a.entry.confidence > b.entry.confidence;
        }
        if (a.similarity != b.similarity) {
            return a.similarity > b.similarity;
        }
        return a.position < b.position;
    });
    return out;
}

std::vector<KBEntry> KnowledgeBase::snapshot() const {
    std::shared_lock lock(mutex_);
    return entries_;
}

std::size_t KnowledgeBase::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void KnowledgeBase::set_write_observer(WriteObserver observer) {
    std::unique_lock lock(mutex_);
    observer_ = std::move(observer);
}

std::string KnowledgeBase::serialize() const {
    std::ostringstream out;
    nlohmann::ordered_json header;
    header["type"] = "kb";
    header["version"] = 1;
    header["c_max"] = config_.c_max;
    header["tau_sim"] = config_.tau_sim;
    header["tau_conf"] = config_.tau_conf;
    out << header.dump() << '\n';
    for (const auto& e : snapshot()) {
        nlohmann::ordered_json j;
        j["d"] = e.date.to_string();
        j["l"] = e.location;
        j["s"] = e.description;
        j["c"] = e.confidence;
        out << j.dump() << '\n';
    }
    return out.str();
}

void KnowledgeBase::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write kb file: " + path);
    }
    out << serialize();
    if (!out) {
        throw Error(ErrorCode::io, "failed writing kb file: " + path);
    }
}

KnowledgeBase KnowledgeBase::parse(std::string_view text, std::optional<KBConfig> config) {
    std::istringstream in{std::string(text)};
    KBConfig cfg = config.value_or(KBConfig{});
    std::vector<KBEntry> entries;
    std::size_t line_no = 0;
    auto corrupt = [&](const std::string& why) {
        return Error(ErrorCode::format, "kb line " + std::to_string(line_no) + ": " + why);
    };
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw corrupt("malformed JSON");
        }
        if (!j.is_object()) {
            throw corrupt("record is not an object");
        }
        try {
            if (j.value("type", "") == "kb") {
                if (config) {
                    continue;
                }
                cfg.c_max = j.value("c_max", cfg.c_max);
                cfg.tau_sim = j.value("tau_sim", cfg.tau_sim);
                cfg.tau_conf = j.value("tau_conf", cfg.tau_conf);
                continue;
            }
            KBEntry e;
            auto date = Date::try_parse(j.at("d").get<std::string>());
            if (!date) {
                throw corrupt("bad date");
            }
            e.date = *date;
            e.location = j.at("l").get<std::string>();
            e.description = j.at("s").get<std::string>();
            e.confidence = j.at("c").get<int>();
            auto same = std::find_if(entries.begin(), entries.end(), [&](const KBEntry& x) { return x.same_fact(e); });
            if (same != entries.end()) {
                same->confidence = e.confidence;
            } else {
                entries.push_back(std::move(e));
            }
        } catch (const nlohmann::json::exception& ex) {
            throw corrupt(ex.what());
        }
    }
    KnowledgeBase kb(cfg);
    for (const auto& e : entries) {
        if (e.confidence < 1 || e.confidence > cfg.c_max || e.description.empty() || e.location.empty()) {
            throw Error(ErrorCode::format, "kb entry \"" + e.description + "\" violates entry invariants");
        }
    }
    kb.entries_ = std::move(entries);
    return kb;
}

KnowledgeBase KnowledgeBase::load(const std::string& path, std::optional<KBConfig> config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open kb file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), config);
}

} // namespace vforest
