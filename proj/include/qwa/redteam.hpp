#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qwa/drift_engine.hpp"
#include "qwa/log_ingest.hpp"
#include "qwa/profile_store.hpp"
#include "qwa/rng.hpp"
#include "qwa/types.hpp"

// Evaluation harness: attack workload generation for the three threat
// models, log-level injection into victim streams, detection-rate scoring,
// and the inter-user similarity matrix.

namespace qwa {

// copycat / freestyler / translator_flow inject additional workload next to
// the victim's own (they differ in where the payload comes from);
// translator_rewrite mutates the victim's own statements in place.
enum class AttackModel : std::uint8_t { copycat, freestyler, translator_rewrite, translator_flow };

inline std::string_view attack_model_name(AttackModel m) {
    switch (m) {
        case AttackModel::copycat: return "copycat";
        case AttackModel::freestyler: return "freestyler";
        case AttackModel::translator_rewrite: return "translator_rewrite";
        case AttackModel::translator_flow: return "translator_flow";
    }
    return "?";
}

// SQL templates with {int} / {str} slots, instantiated per injected interval.
struct AttackScenario {
    AttackModel model = AttackModel::copycat;
    std::string app_id;
    std::vector<std::string> templates;
    int volume = 1;  // statements per injected interval
};

// Built-in scenario packs against a toy schema: tamper with a feed and its
// cache, exfiltrate and redirect account data, and suppress package updates.
inline AttackScenario feed_tamper_scenario(int volume = 3) {
    return {AttackModel::freestyler,
            "feedapp",
            {
                "DELETE FROM feed WHERE item_id = {int}",
                "DELETE FROM cache_item WHERE feed_item_id = {int}",
                "INSERT INTO feed (item_id, author_id, body, created_at) "
                "VALUES ({int}, {int}, '{str}', {int})",
            },
            volume};
}

inline AttackScenario account_exfil_scenario(int volume = 3) {
    return {AttackModel::translator_rewrite,
            "accountapp",
            {
                "SELECT account_id, email, recovery_email FROM account WHERE account_id = {int}",
                "SELECT photo_id, owner_id, url FROM photo WHERE owner_id = {int}",
                "UPDATE account SET recovery_email = '{str}' WHERE account_id = {int}",
            },
            volume};
}

inline AttackScenario update_suppress_scenario(int volume = 3) {
    return {AttackModel::copycat,
            "pkgapp",
            {
                "UPDATE package_log SET status = '{str}' WHERE package_name = '{str}'",
                "DELETE FROM update_queue WHERE package_name = '{str}'",
                "SELECT package_name, version FROM package_log WHERE status = '{str}'",
            },
            volume};
}

namespace detail {

inline std::string instantiate_template(std::string_view tpl, Rng& rng) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl.compare(i, 5, "{int}") == 0) {
            out += std::to_string(rng.uniform_int(1, 99999));
            i += 5;
        } else if (tpl.compare(i, 5, "{str}") == 0) {
            for (int k = 0; k < 8; ++k)
                out.push_back(static_cast<char>('a' + rng.uniform_int(0, 25)));
            i += 5;
        } else {
            out.push_back(tpl[i++]);
        }
    }
    return out;
}

}  // namespace detail

// `volume` statements, cycling the scenario templates in order, slots filled
// deterministically from the seed.
inline std::vector<std::string> generate_simulated(const AttackScenario& scenario,
                                                   std::uint64_t seed) {
    if (scenario.templates.empty()) throw std::invalid_argument("scenario has no templates");
    if (scenario.volume < 1) throw std::invalid_argument("scenario volume must be >= 1");
    Rng rng(seed);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(scenario.volume));
    for (int k = 0; k < scenario.volume; ++k)
        out.push_back(detail::instantiate_template(
            scenario.templates[static_cast<std::size_t>(k) % scenario.templates.size()], rng));
    return out;
}

// Buckets events by floor(ts / interval); empty buckets absent, ascending.
inline std::vector<std::pair<std::int64_t, std::vector<QueryEvent>>> partition_by_interval(
    std::span<const QueryEvent> stream, std::int64_t interval_seconds) {
    std::map<std::int64_t, std::vector<QueryEvent>> buckets;
    for (const auto& ev : stream) buckets[ev.ts / interval_seconds].push_back(ev);
    std::vector<std::pair<std::int64_t, std::vector<QueryEvent>>> out;
    out.reserve(buckets.size());
    for (auto& [idx, evs] : buckets) out.emplace_back(idx, std::move(evs));
    return out;
}

enum class IntervalLabel : std::uint8_t { benign, injected };

struct LabeledStream {
    std::vector<QueryEvent> events;                 // merged, ordered by timestamp
    std::map<std::int64_t, IntervalLabel> labels;   // covers every interval in events
};

// Payload statements become events evenly spread across one target interval.
inline std::vector<QueryEvent> events_from_sqls(std::span<const std::string> sqls,
                                                const std::string& user, const std::string& app,
                                                std::int64_t t_index,
                                                std::int64_t interval_seconds) {
    std::vector<QueryEvent> out;
    out.reserve(sqls.size());
    const std::int64_t start = t_index * interval_seconds;
    const auto n = static_cast<std::int64_t>(sqls.size());
    for (std::int64_t k = 0; k < n; ++k)
        out.push_back({start + (k * interval_seconds) / n, user, app, sqls[static_cast<std::size_t>(k)]});
    return out;
}

// Moves events into the target interval, preserving each event's offset
// within its own original interval (time-of-day survives a day rebase).
inline std::vector<QueryEvent> rebase_events(std::span<const QueryEvent> payload,
                                             std::int64_t target_t_index,
                                             std::int64_t interval_seconds) {
    std::vector<QueryEvent> out(payload.begin(), payload.end());
    const std::int64_t start = target_t_index * interval_seconds;
    for (auto& ev : out) ev.ts = start + ev.ts % interval_seconds;
    std::stable_sort(out.begin(), out.end(),
                     [](const QueryEvent& a, const QueryEvent& b) { return a.ts < b.ts; });
    return out;
}

// Additive injection: the victim workload stays untouched, the payload is
// merged in. Every target interval must receive at least one payload event
// and every payload event must land in a target interval.
inline LabeledStream inject(std::span<const QueryEvent> victim,
                            std::span<const QueryEvent> payload,
                            const std::set<std::int64_t>& target_intervals,
                            std::int64_t interval_seconds) {
    if (payload.empty()) throw EmptyPayload("injection payload is empty");
    std::set<std::int64_t> payload_intervals;
    for (const auto& ev : payload) payload_intervals.insert(ev.ts / interval_seconds);
    if (payload_intervals != target_intervals)
        throw std::invalid_argument("payload intervals do not match target intervals");

    LabeledStream out;
    out.events.assign(victim.begin(), victim.end());
    out.events.insert(out.events.end(), payload.begin(), payload.end());
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const QueryEvent& a, const QueryEvent& b) { return a.ts < b.ts; });
    for (const auto& ev : out.events) {
        const std::int64_t idx = ev.ts / interval_seconds;
        out.labels.emplace(idx, target_intervals.count(idx) ? IntervalLabel::injected
                                                            : IntervalLabel::benign);
    }
    return out;
}

namespace detail {

// Scans raw SQL for a top-level keyword (outside strings, comments, parens).
inline std::size_t find_top_level_keyword(std::string_view sql, std::string_view kw,
                                          std::size_t from = 0) {
    int depth = 0;
    std::size_t i = from;
    const std::size_t n = sql.size();
    auto word_char = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    while (i < n) {
        const char c = sql[i];
        if (c == '\'' || c == '"' || c == '`') {
            const char q = c;
            ++i;
            while (i < n && sql[i] != q) ++i;
            ++i;
        } else if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i += 2;
        } else if (c == '(') {
            ++depth;
            ++i;
        } else if (c == ')') {
            --depth;
            ++i;
        } else if (depth == 0 && word_char(c) && (i == 0 || !word_char(sql[i - 1]))) {
            std::size_t j = i;
            while (j < n && word_char(sql[j])) ++j;
            if (j - i == kw.size()) {
                bool eq = true;
                for (std::size_t k = 0; k < kw.size(); ++k)
                    if (std::tolower(static_cast<unsigned char>(sql[i + k])) != kw[k]) {
                        eq = false;
                        break;
                    }
                if (eq) return i;
            }
            i = j;
        } else {
            ++i;
        }
    }
    return std::string_view::npos;
}

}  // namespace detail

// translator_rewrite mutation: widen a SELECT to grab every column and drop
// its filters ("SELECT * FROM <tables>"). Non-SELECT statements and
// statements without a FROM pass through unchanged.
inline std::string rewrite_extract_all(const std::string& sql) {
    if (first_keyword(sql) != "select") return sql;
    const std::size_t from = detail::find_top_level_keyword(sql, "from");
    if (from == std::string_view::npos) return sql;
    std::size_t stop = sql.size();
    for (std::string_view kw : {"where", "group", "order", "limit", "having"}) {
        const std::size_t p = detail::find_top_level_keyword(sql, kw, from);
        stop = std::min(stop, p);
    }
    std::string body{sql.substr(from, stop - from)};
    while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.pop_back();
    return "SELECT * " + body;
}

// In-place mutation of the victim's own statements in the target intervals.
inline LabeledStream inject_rewrite(std::span<const QueryEvent> victim,
                                    const std::set<std::int64_t>& target_intervals,
                                    std::int64_t interval_seconds) {
    if (target_intervals.empty()) throw std::invalid_argument("no target intervals");
    LabeledStream out;
    out.events.assign(victim.begin(), victim.end());
    for (auto& ev : out.events) {
        const std::int64_t idx = ev.ts / interval_seconds;
        if (target_intervals.count(idx)) ev.sql = rewrite_extract_all(ev.sql);
    }
    for (const auto& ev : out.events) {
        const std::int64_t idx = ev.ts / interval_seconds;
        out.labels.emplace(idx, target_intervals.count(idx) ? IntervalLabel::injected
                                                            : IntervalLabel::benign);
    }
    return out;
}

struct DetectionReport {
    std::int64_t attacks_performed = 0;  // injected intervals processed
    std::int64_t attacks_detected = 0;   // of those, alarmed
    double detection_rate = 0.0;
    std::int64_t false_positives = 0;    // classified benign intervals that alarmed
    std::int64_t benign_intervals = 0;   // classified benign intervals
    double false_positive_rate = 0.0;
};

// Replays a labeled stream through a fresh detector and scores the outcome.
// Warm-up rides on the leading benign history; throws InsufficientHistory
// when the stream never reaches a classifiable interval.
inline DetectionReport evaluate(const DetectorConfig& cfg, const LabeledStream& labeled) {
    if (labeled.events.empty()) throw EmptyPayload("labeled stream has no events");
    Detector detector(labeled.events.front().user, labeled.events.front().app, cfg);
    const auto reports = process_stream(detector, labeled.events);

    DetectionReport out;
    bool any_classified = false;
    for (const auto& rep : reports) {
        const auto it = labeled.labels.find(rep.t_index);
        const IntervalLabel label =
            it != labeled.labels.end() ? it->second : IntervalLabel::benign;
        if (label == IntervalLabel::injected) {
            ++out.attacks_performed;
            if (rep.decision == Decision::alarm) ++out.attacks_detected;
        } else if (rep.decision != Decision::unclassified) {
            ++out.benign_intervals;
            if (rep.decision == Decision::alarm) ++out.false_positives;
        }
        if (rep.decision != Decision::unclassified) any_classified = true;
    }
    if (!any_classified)
        throw InsufficientHistory("stream ends before warm-up completes");
    if (out.attacks_performed > 0)
        out.detection_rate = static_cast<double>(out.attacks_detected) /
                             static_cast<double>(out.attacks_performed);
    if (out.benign_intervals > 0)
        out.false_positive_rate = static_cast<double>(out.false_positives) /
                                  static_cast<double>(out.benign_intervals);
    return out;
}

struct SimilarityMatrix {
    std::vector<std::string> ids;             // user ids, row/column order
    std::vector<std::vector<double>> values;  // divergence in bits, diagonal 0
};

// Pairwise divergence between user profiles of one app. Symmetrized KL by
// default (0.5 * (KL(Pi||Pj) + KL(Pj||Pi)), smoothed); the raw asymmetric
// form is available for comparison.
inline SimilarityMatrix similarity_matrix(std::span<const UserProfile> profiles,
                                          const SmoothingConfig& cfg, bool symmetrize = true) {
    if (profiles.size() < 2) throw std::invalid_argument("need at least 2 profiles");
    for (const auto& p : profiles)
        if (p.app_id != profiles.front().app_id)
            throw std::invalid_argument("profiles must belong to one app");

    std::vector<Distribution> dists;
    dists.reserve(profiles.size());
    SimilarityMatrix out;
    for (const auto& p : profiles) {
        dists.push_back(distribution(p));  // throws EmptyProfile
        out.ids.push_back(p.user_id);
    }
    const std::size_t n = profiles.size();
    out.values.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dij = drift_score(dists[i], dists[j], cfg).score;
            const double dji = drift_score(dists[j], dists[i], cfg).score;
            if (symmetrize) {
                const double v = 0.5 * (dij + dji);
                out.values[i][j] = v;
                out.values[j][i] = v;
            } else {
                out.values[i][j] = dij;
                out.values[j][i] = dji;
            }
        }
    }
    return out;
}

// --- synthetic behavior generators -------------------------------------------
// Toy universe for desk-scale experiments: feature k is the lone projection
// emitted by "SELECT c<k> FROM t<k/50>". One query, one feature occurrence,
// so a categorical model over features translates directly into a workload.

inline std::string universe_query(std::size_t feature) {
    return "SELECT c" + std::to_string(feature) + " FROM t" + std::to_string(feature / 50);
}

struct WorkloadModel {
    std::vector<double> weights;
    CategoricalSampler sampler;

    explicit WorkloadModel(std::vector<double> w) : weights(std::move(w)), sampler(weights) {}
};

// Zipf-like weights over [first, first + count) inside a universe of the
// given size; zero elsewhere, normalized to sum 1.
inline std::vector<double> zipf_weights(std::size_t universe_size, std::size_t first,
                                        std::size_t count, double exponent = 1.0) {
    std::vector<double> w(universe_size, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        w[first + i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
        sum += w[first + i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
    return 0.5 * tv;
}

// One interval of synthetic behavior drawn from the model.
inline std::vector<QueryEvent> synth_day(const std::string& user, const std::string& app,
                                         std::int64_t t_index, std::int64_t interval_seconds,
                                         int n_queries, const WorkloadModel& model,
                                         std::uint64_t seed) {
    Rng rng(seed);
    std::vector<QueryEvent> out;
    out.reserve(static_cast<std::size_t>(n_queries));
    const std::int64_t start = t_index * interval_seconds;
    for (int k = 0; k < n_queries; ++k) {
        const std::int64_t ts =
            start + (static_cast<std::int64_t>(k) * interval_seconds) / n_queries;
        out.push_back({ts, user, app, universe_query(model.sampler.sample(rng))});
    }
    return out;
}

}  // namespace qwa
