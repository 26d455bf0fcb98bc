#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qwa/types.hpp"

namespace qwa {

// Accumulated feature counts for one (user, app) over a half-open timeframe
// [start_ts, end_ts). Counts stay integral; the probability distribution is
// derived on demand, so repeated accumulation cannot pick up float error.
struct UserProfile {
    std::string user_id;
    std::string app_id;
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;
    std::unordered_map<FeatureKey, std::int64_t, FeatureKeyHash> counts;
    std::int64_t total = 0;
    std::int64_t n_queries = 0;
};

struct SmoothingConfig {
    double epsilon = 1e-5;      // mass given to a feature missing from one side
    bool renormalize = false;   // rescale each side to sum to 1 after filling
};

inline void validate(const SmoothingConfig& cfg) {
    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 0.01))
        throw std::invalid_argument("smoothing epsilon must be in (0, 0.01)");
}

// Folds one query's features in. Amortized constant time per feature
// occurrence; the map is keyed by feature, so a profile never scans.
inline void update_profile(UserProfile& profile, const FeatureVector& fv) {
    for (const auto& [key, n] : fv.counts) {
        profile.counts[key] += n;
        profile.total += n;
    }
    profile.n_queries += 1;
}

namespace detail {

template <typename CountMap>
Distribution distribution_from_counts(const CountMap& counts, std::int64_t total) {
    Distribution dist;
    dist.reserve(counts.size());
    for (const auto& [key, n] : counts)
        if (n > 0) dist.emplace_back(key, static_cast<double>(n) / static_cast<double>(total));
    std::sort(dist.begin(), dist.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return dist;
}

inline bool distribution_sorted(const Distribution& d) {
    return std::is_sorted(d.begin(), d.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
}

// Hand-built distributions are not always key-sorted; the merge walks need
// them to be. Returns the input untouched when it already is.
inline const Distribution& sorted_view(const Distribution& d, Distribution& storage) {
    if (distribution_sorted(d)) return d;
    storage = d;
    std::sort(storage.begin(), storage.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return storage;
}

}  // namespace detail

// Normalized distribution: entry i is counts[i] / total. Entries are sorted
// by key. Throws EmptyProfile when there is nothing to normalize.
inline Distribution distribution(const UserProfile& profile) {
    if (profile.total <= 0) throw EmptyProfile("profile has no feature observations");
    return detail::distribution_from_counts(profile.counts, profile.total);
}

inline Distribution distribution(const FeatureVector& fv) {
    const std::int64_t total = fv.total();
    if (total <= 0) throw EmptyProfile("feature vector is empty");
    return detail::distribution_from_counts(fv.counts, total);
}

// Aligns two distributions onto their union support. A feature absent from
// one side receives mass epsilon there; with renormalize the padded vectors
// are rescaled to proper distributions, otherwise the epsilon is left as-is
// (the default, and the variant the drift score is calibrated against).
inline std::pair<Distribution, Distribution> smooth_pair(const Distribution& p_in,
                                                         const Distribution& q_in,
                                                         const SmoothingConfig& cfg) {
    validate(cfg);
    Distribution p_storage, q_storage;
    const Distribution& p = detail::sorted_view(p_in, p_storage);
    const Distribution& q = detail::sorted_view(q_in, q_storage);
    Distribution ps, qs;
    ps.reserve(p.size() + q.size());
    qs.reserve(p.size() + q.size());
    std::size_t i = 0, j = 0;
    while (i < p.size() || j < q.size()) {
        if (j >= q.size() || (i < p.size() && p[i].first < q[j].first)) {
            ps.push_back(p[i]);
            qs.emplace_back(p[i].first, cfg.epsilon);
            ++i;
        } else if (i >= p.size() || q[j].first < p[i].first) {
            ps.emplace_back(q[j].first, cfg.epsilon);
            qs.push_back(q[j]);
            ++j;
        } else {
            ps.push_back(p[i++]);
            qs.push_back(q[j++]);
        }
    }
    if (cfg.renormalize) {
        for (Distribution* d : {&ps, &qs}) {
            double sum = 0.0;
            for (const auto& [k, v] : *d) sum += v;
            for (auto& [k, v] : *d) v /= sum;
        }
    }
    return {std::move(ps), std::move(qs)};
}

// --- persistence -------------------------------------------------------------
// Profile file: versioned JSON with integer counts, schema
//   {version:1, user, app, start_ts, end_ts, n_queries, counts:[{cat,tok,n}]}

inline std::string save_profile(const UserProfile& profile) {
    std::vector<std::pair<FeatureKey, std::int64_t>> sorted(profile.counts.begin(),
                                                            profile.counts.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& [key, n] : sorted)
        counts.push_back({{"cat", category_name(key.cat)}, {"tok", key.token}, {"n", n}});
    const nlohmann::json j = {
        {"version", 1},
        {"user", profile.user_id},
        {"app", profile.app_id},
        {"start_ts", profile.start_ts},
        {"end_ts", profile.end_ts},
        {"n_queries", profile.n_queries},
        {"counts", std::move(counts)},
    };
    return j.dump();
}

inline UserProfile load_profile(std::string_view bytes) {
    const nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (!j.is_object()) throw CorruptProfile("profile is not a JSON object");
    try {
        if (j.at("version").get<int>() != 1) throw CorruptProfile("unsupported profile version");
        UserProfile p;
        p.user_id = j.at("user").get<std::string>();
        p.app_id = j.at("app").get<std::string>();
        p.start_ts = j.at("start_ts").get<std::int64_t>();
        p.end_ts = j.at("end_ts").get<std::int64_t>();
        p.n_queries = j.at("n_queries").get<std::int64_t>();
        for (const auto& entry : j.at("counts")) {
            FeatureKey key;
            if (!category_from_name(entry.at("cat").get<std::string>(), key.cat))
                throw CorruptProfile("unknown feature category");
            key.token = entry.at("tok").get<std::string>();
            const std::int64_t n = entry.at("n").get<std::int64_t>();
            if (n < 0) throw CorruptProfile("negative feature count");
            p.counts[key] += n;
            p.total += n;
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptProfile(std::string("profile schema violation: ") + e.what());
    }
}

}  // namespace qwa
