#pragma once

// Confidence-weighted fact store.  Facts are (date, location, description)
// triples; repeated assertions reinforce a fact, conflicting ones first wear
// it down and then replace it.

#include "vforest/model.hpp"

#include <functional>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace vforest {

struct KBEntry {
    Date date;
    std::string location;
    std::string description;
    int confidence = 1;

    bool same_fact(const KBEntry& other) const noexcept {
        return date == other.date && location == other.location && description == other.description;
    }
    bool operator==(const KBEntry&) const = default;
};

struct KBConfig {
    int c_max = 10;
    double tau_sim = 0.5;
    int tau_conf = 3;

    void validate() const;
    bool operator==(const KBConfig&) const = default;
};

using SimilarityFn = std::function<double(std::string_view, std::string_view)>;

// Jaccard similarity over lowercased tokens split on whitespace and
// punctuation.  Two token-less strings count as identical.
double default_similarity(std::string_view a, std::string_view b);

enum class UpsertOutcome { inserted, reinforced, decayed, replaced };

const char* to_string(UpsertOutcome outcome) noexcept;

struct KBConstraints {
    std::optional<DateRange> date_range;
    std::optional<std::set<std::string>> locations;
    std::optional<std::string> description_query;
};

struct RankedEntry {
    KBEntry entry;
    double similarity = 0.0;  // to the description query, 0 when absent
    bool priority = false;    // confidence >= tau_conf
    std::size_t position = 0; // insertion order
};

class KnowledgeBase {
public:
    using WriteObserver = std::function<void(const KBEntry& incoming, UpsertOutcome outcome)>;

    explicit KnowledgeBase(KBConfig config = {}, SimilarityFn similarity = default_similarity);

    KnowledgeBase(const KnowledgeBase& other);
    KnowledgeBase& operator=(const KnowledgeBase& other);

    // Exclusive writer.  The incoming confidence is ignored.
    UpsertOutcome upsert(const KBEntry& entry);

    std::vector<RankedEntry> retrieve(const KBConstraints& constraints) const;

    std::vector<KBEntry> snapshot() const;
    std::size_t size() const;
    const KBConfig& config() const noexcept { return config_; }

    // Every upsert is reported here after it is applied.
    void set_write_observer(WriteObserver observer);

    // Line-delimited JSON: a header echoing the config, then one
    // {"d","l","s","c"} object per entry.  Later lines for the same fact win.
    // The header config is used unless `config` is given.
    void save(const std::string& path) const;
    std::string serialize() const;
    static KnowledgeBase load(const std::string& path, std::optional<KBConfig> config = {});
    static KnowledgeBase parse(std::string_view text, std::optional<KBConfig> config = {});

private:
    KBConfig config_;
    SimilarityFn similarity_;
    std::vector<KBEntry> entries_;  // insertion order
    WriteObserver observer_;
    mutable std::shared_mutex mutex_;
};

} // namespace vforest
