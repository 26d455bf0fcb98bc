#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qwa/profile_store.hpp"
#include "qwa/sql_features.hpp"
#include "qwa/types.hpp"

namespace qwa {

// Which side of the divergence carries the weights. The drift score is the
// base-weighted sum  sum_i base(i) * log2(base(i) / incoming(i));  the
// reversed form is kept for comparison runs.
enum class DriftDirection : std::uint8_t { base_weighted, incoming_weighted };

struct DriftScore {
    double score = 0.0;  // bits, clamped at 0
    std::vector<std::pair<FeatureKey, double>> contributions;  // descending by bits
};

namespace detail {

inline double log2_ratio_term(double w, double num, double den) {
    return w * std::log2(num / den);
}

}  // namespace detail

// Smoothed divergence between the accumulated profile distribution and an
// incoming interval distribution, in bits, with the per-feature terms that
// make it up. Without renormalizing smoothing the raw sum can undershoot
// zero by rounding-level amounts; the score is clamped, the terms are not.
inline DriftScore drift_score(const Distribution& base, const Distribution& incoming,
                              const SmoothingConfig& cfg,
                              DriftDirection direction = DriftDirection::base_weighted) {
    if (base.empty()) throw EmptyDistribution("base distribution has no support");
    if (incoming.empty()) throw EmptyDistribution("incoming distribution has no support");
    auto [b, q] = smooth_pair(base, incoming, cfg);

    DriftScore result;
    result.contributions.reserve(b.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double term = direction == DriftDirection::base_weighted
                                ? detail::log2_ratio_term(b[i].second, b[i].second, q[i].second)
                                : detail::log2_ratio_term(q[i].second, q[i].second, b[i].second);
        sum += term;
        result.contributions.emplace_back(b[i].first, term);
    }
    result.score = std::max(0.0, sum);
    std::sort(result.contributions.begin(), result.contributions.end(),
              [](const auto& a, const auto& b2) {
                  if (a.second != b2.second) return a.second > b2.second;
                  return a.first < b2.first;
              });
    return result;
}

// Diagnostic, unsmoothed variant: +infinity as soon as the weighted side has
// mass where the other side has none. The pipeline never uses this.
inline double drift_score_unsmoothed(const Distribution& base, const Distribution& incoming,
                                     DriftDirection direction = DriftDirection::base_weighted) {
    if (base.empty() || incoming.empty()) throw EmptyDistribution("empty distribution");
    Distribution ws, os;
    const Distribution& w =
        detail::sorted_view(direction == DriftDirection::base_weighted ? base : incoming, ws);
    const Distribution& other =
        detail::sorted_view(direction == DriftDirection::base_weighted ? incoming : base, os);
    double sum = 0.0;
    std::size_t j = 0;
    for (const auto& [key, p] : w) {
        while (j < other.size() && other[j].first < key) ++j;
        if (j >= other.size() || !(other[j].first == key))
            return std::numeric_limits<double>::infinity();
        sum += detail::log2_ratio_term(p, p, other[j].second);
    }
    return std::max(0.0, sum);
}

struct DriftPoint {
    std::int64_t t_index = 0;
    double score = 0.0;
    std::int64_t n_queries = 0;
};

struct DriftSeries {
    std::vector<DriftPoint> points;  // t_index strictly increasing, empty intervals absent
    std::int64_t interval_seconds = 86400;
};

struct DriftModel {
    double beta0 = 0.0;  // intercept
    double beta1 = 0.0;  // slope per interval index
    double sigma = 0.0;  // sample standard deviation of the scores
    std::int64_t n_points = 0;

    double predict(std::int64_t t_index) const {
        return beta0 + beta1 * static_cast<double>(t_index);
    }
};

// Closed-form 1-D ordinary least squares over (t_index, score), with the
// n-1 standard deviation of the scores. Centered sums keep it stable for
// large absolute interval indices (epoch days are ~2e4).
inline DriftModel fit_model(const DriftSeries& series) {
    const auto& pts = series.points;
    const std::size_t n = pts.size();
    if (n < 2) throw InsufficientHistory("need at least 2 drift points to fit");
    double mean_t = 0.0, mean_s = 0.0;
    for (const auto& p : pts) {
        mean_t += static_cast<double>(p.t_index);
        mean_s += p.score;
    }
    mean_t /= static_cast<double>(n);
    mean_s /= static_cast<double>(n);
    double stt = 0.0, sts = 0.0, sss = 0.0;
    for (const auto& p : pts) {
        const double dt = static_cast<double>(p.t_index) - mean_t;
        const double ds = p.score - mean_s;
        stt += dt * dt;
        sts += dt * ds;
        sss += ds * ds;
    }
    if (stt == 0.0) throw DegenerateTime("all drift points share one interval index");
    DriftModel m;
    m.beta1 = sts / stt;
    m.beta0 = mean_s - m.beta1 * mean_t;
    m.sigma = std::sqrt(std::max(0.0, sss / static_cast<double>(n - 1)));
    m.n_points = static_cast<std::int64_t>(n);
    return m;
}

enum class Decision : std::uint8_t { normal, alarm, unclassified };

inline std::string_view decision_name(Decision d) {
    switch (d) {
        case Decision::normal: return "normal";
        case Decision::alarm: return "alarm";
        case Decision::unclassified: return "unclassified";
    }
    return "?";
}

// Alarm iff the score strictly exceeds predicted drift plus sigma.
inline Decision classify(double score, const DriftModel& model, std::int64_t t_index) {
    if (model.n_points < 2) throw InsufficientHistory("drift model is undefined");
    return score > model.predict(t_index) + model.sigma ? Decision::alarm : Decision::normal;
}

// Per-interval outcome. score is absent for the very first non-empty
// interval (nothing to compare against); predicted/threshold are absent
// until warm-up completes.
struct AlarmReport {
    std::int64_t t_index = 0;
    std::int64_t interval_start_ts = 0;
    Decision decision = Decision::unclassified;
    std::optional<double> score;
    std::optional<double> predicted;
    std::optional<double> threshold;  // predicted + sigma
    std::vector<std::pair<FeatureKey, double>> top_contributors;  // descending, full support
};

struct DetectorConfig {
    std::int64_t interval_seconds = 86400;  // UTC-day aligned intervals
    SmoothingConfig smoothing{};
    DriftDirection direction = DriftDirection::base_weighted;
    int warm_up = 7;             // non-empty intervals consumed before classification starts
    std::size_t profile_window = 0;  // sliding window over merged intervals; 0 = unbounded
    std::size_t model_window = 0;    // fit/sigma over the last N points; 0 = all history
    bool exclude_anomalous = true;   // keep alarmed intervals out of profile and series
    ExtractOptions extract{};
};

// Owns the evolving state for one (user, app) stream: the accumulated
// profile, the drift-score series and the fitted model. Intervals must be
// fed in increasing t_index order; an incoming interval is scored against
// the profile accumulated so far, classified once warm-up is done, and then
// merged unless it alarmed (exclusion is the default, so an attacker cannot
// poison the baseline or the threshold).
class Detector {
  public:
    Detector(std::string user, std::string app, DetectorConfig cfg = {})
        : user_(std::move(user)), app_(std::move(app)), cfg_(cfg) {
        validate(cfg_.smoothing);
        if (cfg_.warm_up < 2) throw std::invalid_argument("warm_up must be at least 2");
        if (cfg_.interval_seconds <= 0) throw std::invalid_argument("interval_seconds must be positive");
        if (cfg_.model_window == 1) throw std::invalid_argument("model_window must be 0 or >= 2");
        profile_.user_id = user_;
        profile_.app_id = app_;
        series_.interval_seconds = cfg_.interval_seconds;
    }

    // Empty interval: no report, no state change ("no queries" is not a
    // security concern). Intervals where nothing parses are treated the same
    // way, with the failures tallied in parse_errors().
    std::optional<AlarmReport> process_interval(std::int64_t t_index,
                                                std::span<const QueryEvent> events) {
        if (last_t_index_ && t_index <= *last_t_index_)
            throw std::invalid_argument("intervals must arrive in increasing order");
        if (events.empty()) return std::nullopt;

        FeatureVector interval;
        std::int64_t parsed = 0;
        for (const auto& ev : events) {
            try {
                FeatureVector fv = extract_features(ev.sql, cfg_.extract);
                for (auto& [key, n] : fv.counts) interval.counts[key] += n;
                ++parsed;
            } catch (const ParseError&) {
                ++parse_errors_;
            }
        }
        if (parsed == 0) return std::nullopt;
        last_t_index_ = t_index;

        AlarmReport report;
        report.t_index = t_index;
        report.interval_start_ts = t_index * cfg_.interval_seconds;

        if (profile_.total == 0) {  // first observed behavior becomes the base
            report.decision = Decision::unclassified;
            merge(t_index, interval, parsed);
            ++intervals_seen_;
            return report;
        }

        const Distribution base = distribution(profile_);
        const Distribution incoming = distribution(interval);
        DriftScore ds = drift_score(base, incoming, cfg_.smoothing, cfg_.direction);
        report.score = ds.score;
        report.top_contributors = std::move(ds.contributions);

        ++intervals_seen_;
        const bool warmed_up = intervals_seen_ > cfg_.warm_up && series_.points.size() >= 2;
        if (!warmed_up) {
            report.decision = Decision::unclassified;
            append_point(t_index, ds.score, parsed);
            merge(t_index, interval, parsed);
            return report;
        }

        model_ = fit_model(model_view());
        report.predicted = model_->predict(t_index);
        report.threshold = *report.predicted + model_->sigma;
        report.decision = classify(ds.score, *model_, t_index);

        // Every scored interval joins the series: the adaptive threshold must
        // see high scores to adapt (dropping them starves the regression and
        // ratchets the threshold down). Only the profile is protected.
        append_point(t_index, ds.score, parsed);
        if (report.decision == Decision::alarm && cfg_.exclude_anomalous) return report;
        merge(t_index, interval, parsed);
        return report;
    }

    const UserProfile& profile() const { return profile_; }
    const DriftSeries& series() const { return series_; }
    const std::optional<DriftModel>& model() const { return model_; }
    const DetectorConfig& config() const { return cfg_; }
    std::int64_t parse_errors() const { return parse_errors_; }
    const std::string& user() const { return user_; }
    const std::string& app() const { return app_; }

  private:
    void append_point(std::int64_t t_index, double score, std::int64_t n_queries) {
        series_.points.push_back({t_index, score, n_queries});
    }

    DriftSeries model_view() const {
        if (cfg_.model_window == 0 || series_.points.size() <= cfg_.model_window) return series_;
        DriftSeries tail;
        tail.interval_seconds = series_.interval_seconds;
        tail.points.assign(series_.points.end() - static_cast<std::ptrdiff_t>(cfg_.model_window),
                           series_.points.end());
        return tail;
    }

    void merge(std::int64_t t_index, const FeatureVector& interval, std::int64_t n_queries) {
        for (const auto& [key, n] : interval.counts) {
            profile_.counts[key] += n;
            profile_.total += n;
        }
        profile_.n_queries += n_queries;
        const std::int64_t start = t_index * cfg_.interval_seconds;
        if (profile_.n_queries == n_queries) profile_.start_ts = start;
        profile_.end_ts = start + cfg_.interval_seconds;

        if (cfg_.profile_window > 0) {
            window_.push_back(interval.counts);
            window_queries_.push_back(n_queries);
            while (window_.size() > cfg_.profile_window) {
                for (const auto& [key, n] : window_.front()) {
                    auto it = profile_.counts.find(key);
                    it->second -= n;
                    profile_.total -= n;
                    if (it->second == 0) profile_.counts.erase(it);
                }
                profile_.n_queries -= window_queries_.front();
                window_.pop_front();
                window_queries_.pop_front();
            }
        }
    }

    std::string user_;
    std::string app_;
    DetectorConfig cfg_;
    UserProfile profile_;
    DriftSeries series_;
    std::optional<DriftModel> model_;
    std::optional<std::int64_t> last_t_index_;
    std::int64_t intervals_seen_ = 0;  // non-empty, parseable intervals
    std::int64_t parse_errors_ = 0;
    std::deque<std::map<FeatureKey, std::int64_t>> window_;
    std::deque<std::int64_t> window_queries_;
};

// Runs a detector over an already-sorted event stream, bucketing by
// floor(ts / interval). Empty intervals are naturally absent.
inline std::vector<AlarmReport> process_stream(Detector& detector,
                                               std::span<const QueryEvent> events_by_ts) {
    std::vector<AlarmReport> reports;
    std::size_t i = 0;
    const std::int64_t len = detector.config().interval_seconds;
    while (i < events_by_ts.size()) {
        const std::int64_t t_index = events_by_ts[i].ts / len;
        std::size_t j = i;
        while (j < events_by_ts.size() && events_by_ts[j].ts / len == t_index) ++j;
        auto rep = detector.process_interval(t_index, events_by_ts.subspan(i, j - i));
        if (rep) reports.push_back(std::move(*rep));
        i = j;
    }
    return reports;
}

}  // namespace qwa
