#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "qwa/drift_engine.hpp"
#include "qwa/rng.hpp"

using namespace qwa;

namespace {

FeatureKey key(std::string tok) { return {Category::Projection, std::move(tok)}; }

Distribution dist(std::initializer_list<std::pair<std::string, double>> items) {
    Distribution d;
    for (const auto& [tok, p] : items) d.emplace_back(key(tok), p);
    return d;
}

// Independent direct-summation oracle over plain maps; smoothing and the
// log2 sum are re-derived here, not shared with the implementation.
double kl_oracle(const Distribution& base, const Distribution& incoming,
                 const SmoothingConfig& cfg) {
    std::map<std::string, double> p, q;
    for (const auto& [k, v] : base) p[k.token] = v;
    for (const auto& [k, v] : incoming) q[k.token] = v;
    for (const auto& [tok, v] : p)
        if (!q.count(tok)) q[tok] = cfg.epsilon;
    for (const auto& [tok, v] : q)
        if (!p.count(tok)) p[tok] = cfg.epsilon;
    if (cfg.renormalize) {
        double sp = 0.0, sq = 0.0;
        for (const auto& [t, v] : p) sp += v;
        for (const auto& [t, v] : q) sq += v;
        for (auto& [t, v] : p) v /= sp;
        for (auto& [t, v] : q) v /= sq;
    }
    double sum = 0.0;
    for (const auto& [tok, pv] : p) sum += pv * std::log2(pv / q.at(tok));
    return sum;
}

// Uncentered normal-equations oracle for the 1-D least squares fit.
std::pair<double, double> ols_oracle(const DriftSeries& s) {
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    const double n = static_cast<double>(s.points.size());
    for (const auto& pt : s.points) {
        const double t = static_cast<double>(pt.t_index);
        st += t;
        sy += pt.score;
        stt += t * t;
        sty += t * pt.score;
    }
    const double beta1 = (n * sty - st * sy) / (n * stt - st * st);
    const double beta0 = (sy - beta1 * st) / n;
    return {beta0, beta1};
}

DriftSeries series_of(std::initializer_list<std::pair<std::int64_t, double>> pts) {
    DriftSeries s;
    for (const auto& [t, v] : pts) s.points.push_back({t, v, 1});
    return s;
}

std::vector<QueryEvent> day_events(std::int64_t day, std::initializer_list<const char*> sqls) {
    std::vector<QueryEvent> out;
    std::int64_t ts = day * 86400;
    for (const char* s : sqls) out.push_back({ts++, "u", "a", s});
    return out;
}

}  // namespace

TEST_CASE("drift score of a distribution against itself is exactly zero") {
    const auto p = dist({{"a", 0.5}, {"b", 0.25}, {"c", 0.25}});
    CHECK(drift_score(p, p, SmoothingConfig{1e-5, false}).score == 0.0);
    CHECK(drift_score(p, p, SmoothingConfig{1e-5, true}).score == 0.0);
    CHECK(drift_score_unsmoothed(p, p) == 0.0);
}

TEST_CASE("worked example: disjoint feature forces infinity, smoothing makes 1.378") {
    const auto p = dist({{"f0", 0.3}, {"f1", 0.4}, {"f2", 0.2}, {"f3", 0.1}});
    const auto q = dist({{"f0", 0.3}, {"f1", 0.3}, {"f2", 0.3}, {"f4", 0.1}});
    CHECK(std::isinf(drift_score_unsmoothed(p, q)));
    const auto ds = drift_score(p, q, SmoothingConfig{1e-5, false});
    CHECK(ds.score == Catch::Approx(1.378).margin(0.01));
}

TEST_CASE("two-point hand-computed divergence") {
    const auto p = dist({{"a", 0.5}, {"b", 0.5}});
    const auto q = dist({{"a", 0.25}, {"b", 0.75}});
    // 0.5*log2(2) + 0.5*log2(2/3)
    const double expected = 0.5 + 0.5 * std::log2(0.5 / 0.75);
    CHECK(drift_score(p, q, SmoothingConfig{1e-5, false}).score ==
          Catch::Approx(expected).epsilon(1e-12));
    CHECK(expected == Catch::Approx(0.2075).margin(5e-5));
}

TEST_CASE("direction flag swaps the weighted side") {
    const auto p = dist({{"a", 0.9}, {"b", 0.1}});
    const auto q = dist({{"a", 0.5}, {"b", 0.5}});
    const double fwd = drift_score(p, q, SmoothingConfig{1e-5, false}).score;
    const double rev =
        drift_score(p, q, SmoothingConfig{1e-5, false}, DriftDirection::incoming_weighted).score;
    CHECK(fwd == Catch::Approx(kl_oracle(p, q, {1e-5, false})));
    CHECK(rev == Catch::Approx(kl_oracle(q, p, {1e-5, false})));
    CHECK(fwd != rev);
}

TEST_CASE("empty distributions are rejected") {
    const Distribution empty;
    const auto p = dist({{"a", 1.0}});
    CHECK_THROWS_AS(drift_score(empty, p, SmoothingConfig{}), EmptyDistribution);
    CHECK_THROWS_AS(drift_score(p, empty, SmoothingConfig{}), EmptyDistribution);
}

TEST_CASE("contributions sum to the score") {
    const auto p = dist({{"a", 0.3}, {"b", 0.3}, {"c", 0.4}});
    const auto q = dist({{"a", 0.6}, {"b", 0.2}, {"d", 0.2}});
    const auto ds = drift_score(p, q, SmoothingConfig{1e-5, true});
    double sum = 0.0;
    for (const auto& [k, bits] : ds.contributions) sum += bits;
    CHECK(std::abs(sum - ds.score) <= 1e-9);
    for (std::size_t i = 1; i < ds.contributions.size(); ++i)
        CHECK(ds.contributions[i - 1].second >= ds.contributions[i].second);
}

TEST_CASE("fit_model closed-form cases") {
    const auto flat = fit_model(series_of({{0, 1.0}, {1, 1.0}, {2, 1.0}}));
    CHECK(flat.beta0 == Catch::Approx(1.0));
    CHECK(flat.beta1 == Catch::Approx(0.0).margin(1e-15));
    CHECK(flat.sigma == 0.0);

    const auto line = fit_model(series_of({{0, 0.0}, {1, 1.0}, {2, 2.0}}));
    CHECK(line.beta0 == Catch::Approx(0.0).margin(1e-15));
    CHECK(line.beta1 == Catch::Approx(1.0));

    const auto s = series_of({{0, 0.1}, {1, 0.2}, {2, 0.1}, {3, 0.3}});
    const auto m = fit_model(s);
    const auto [b0, b1] = ols_oracle(s);
    CHECK(m.beta0 == Catch::Approx(b0).margin(1e-9));
    CHECK(m.beta1 == Catch::Approx(b1).margin(1e-9));
}

TEST_CASE("fit_model error paths") {
    CHECK_THROWS_AS(fit_model(series_of({{0, 1.0}})), InsufficientHistory);
    DriftSeries s;
    s.points = {{5, 1.0, 1}, {5, 2.0, 1}};
    CHECK_THROWS_AS(fit_model(s), DegenerateTime);
}

TEST_CASE("property: fit matches the normal-equations oracle on random series") {
    Rng rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        DriftSeries s;
        const int n = static_cast<int>(rng.uniform_int(2, 1000));
        std::int64_t t = rng.uniform_int(0, 50);
        for (int i = 0; i < n; ++i) {
            s.points.push_back({t, rng.next_double() * 4.0, 1});
            t += rng.uniform_int(1, 3);
        }
        const auto m = fit_model(s);
        const auto [b0, b1] = ols_oracle(s);
        REQUIRE(m.beta0 == Catch::Approx(b0).margin(1e-9));
        REQUIRE(m.beta1 == Catch::Approx(b1).margin(1e-9));
    }
}

TEST_CASE("classification boundary is strict") {
    DriftModel m{0.40, 0.0, 0.05, 10};
    CHECK(classify(0.50, m, 3) == Decision::alarm);    // 0.50 > 0.45
    CHECK(classify(0.45, m, 3) == Decision::normal);   // equality is normal
    DriftModel exact{0.40, 0.0, 0.0, 10};
    CHECK(classify(0.40, exact, 0) == Decision::normal);
    CHECK(classify(0.40 + 1e-9, exact, 0) == Decision::alarm);
}

TEST_CASE("property: growing sigma never turns normal into alarm") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        DriftModel m{rng.next_double(), rng.next_double() * 0.1, rng.next_double() * 0.5, 10};
        const double score = rng.next_double() * 2.0;
        const std::int64_t t = rng.uniform_int(0, 50);
        const Decision before = classify(score, m, t);
        m.sigma += rng.next_double();
        const Decision after = classify(score, m, t);
        if (before == Decision::normal) CHECK(after == Decision::normal);
    }
}

TEST_CASE("property: Gibbs inequality under renormalized smoothing") {
    Rng rng(2024);
    const SmoothingConfig cfg{1e-5, true};
    for (int trial = 0; trial < 500; ++trial) {
        auto random_dist = [&]() {
            Distribution d;
            double sum = 0.0;
            const int k = static_cast<int>(rng.uniform_int(1, 25));
            for (int i = 0; i < 30; ++i) {
                if (i < k || rng.uniform_int(0, 1)) continue;
                const double w = rng.next_double() + 1e-3;
                d.emplace_back(key("f" + std::to_string(i)), w);
                sum += w;
            }
            if (d.empty()) {
                d.emplace_back(key("f0"), 1.0);
                sum = 1.0;
            }
            for (auto& [dk, v] : d) v /= sum;
            return d;
        };
        const auto p = random_dist();
        const auto q = random_dist();
        const auto ds = drift_score(p, q, cfg);
        REQUIRE(ds.score >= 0.0);
        REQUIRE(std::abs(ds.score - std::max(0.0, kl_oracle(p, q, cfg))) <= 1e-12);
    }
}

TEST_CASE("detector lifecycle over a synthetic stream") {
    DetectorConfig cfg;
    cfg.warm_up = 3;
    Detector det("u", "a", cfg);

    SECTION("empty interval leaves state untouched") {
        CHECK_FALSE(det.process_interval(0, {}).has_value());
        CHECK(det.profile().total == 0);
    }

    SECTION("warm-up marks intervals unclassified, then classification starts") {
        std::vector<AlarmReport> reports;
        for (std::int64_t day = 0; day < 6; ++day) {
            auto evs = day_events(day, {"SELECT a FROM t", "SELECT b FROM t"});
            auto rep = det.process_interval(day, evs);
            REQUIRE(rep.has_value());
            reports.push_back(*rep);
        }
        CHECK(reports[0].decision == Decision::unclassified);
        CHECK_FALSE(reports[0].score.has_value());
        CHECK(reports[1].decision == Decision::unclassified);
        CHECK(reports[2].decision == Decision::unclassified);
        // day 3 is the 4th non-empty interval: past warm_up=3, two points exist
        CHECK(reports[3].decision == Decision::normal);
        CHECK(reports[3].score.has_value());
        CHECK(*reports[3].score == Catch::Approx(0.0).margin(1e-12));
        CHECK(reports[3].threshold.has_value());
        CHECK(reports[5].decision == Decision::normal);
    }

    SECTION("intervals must arrive in order") {
        auto evs = day_events(4, {"SELECT a FROM t"});
        REQUIRE(det.process_interval(4, evs).has_value());
        CHECK_THROWS_AS(det.process_interval(4, evs), std::invalid_argument);
        CHECK_THROWS_AS(det.process_interval(3, evs), std::invalid_argument);
    }
}

TEST_CASE("alarmed intervals stay out of the profile but their scores join the series") {
    DetectorConfig cfg;
    cfg.warm_up = 2;
    Detector det("u", "a", cfg);
    for (std::int64_t day = 0; day < 5; ++day) {
        auto evs = day_events(day, {"SELECT a FROM t", "SELECT a FROM t", "SELECT b FROM t"});
        det.process_interval(day, evs);
    }
    const auto total_before = det.profile().total;
    const auto points_before = det.series().points.size();

    // a wildly different day
    auto attack = day_events(5, {"DELETE FROM secrets WHERE owner = 'x'",
                                 "DELETE FROM secrets WHERE owner = 'y'",
                                 "SELECT blob FROM vault"});
    const auto rep = det.process_interval(5, attack);
    REQUIRE(rep.has_value());
    CHECK(rep->decision == Decision::alarm);
    // the baseline profile is protected from poisoning
    CHECK(det.profile().total == total_before);
    // the threshold keeps adapting: the alarmed score still enters the series
    CHECK(det.series().points.size() == points_before + 1);

    // the same day fed to an inclusive detector is absorbed
    DetectorConfig inc = cfg;
    inc.exclude_anomalous = false;
    Detector det2("u", "a", inc);
    for (std::int64_t day = 0; day < 5; ++day) {
        auto evs = day_events(day, {"SELECT a FROM t", "SELECT a FROM t", "SELECT b FROM t"});
        det2.process_interval(day, evs);
    }
    const auto before2 = det2.profile().total;
    det2.process_interval(5, attack);
    CHECK(det2.profile().total > before2);
}

TEST_CASE("alarm explanation names the drifting features first") {
    DetectorConfig cfg;
    cfg.warm_up = 2;
    Detector det("u", "a", cfg);
    for (std::int64_t day = 0; day < 4; ++day)
        det.process_interval(day, day_events(day, {"SELECT a FROM t", "SELECT b FROM t"}));
    const auto rep =
        det.process_interval(4, day_events(4, {"SELECT zz FROM vault", "SELECT zz FROM vault"}));
    REQUIRE(rep.has_value());
    REQUIRE(rep->decision == Decision::alarm);
    REQUIRE_FALSE(rep->top_contributors.empty());
    // the missing baseline features dominate the divergence
    CHECK(rep->top_contributors.front().second > 0.0);
    double sum = 0.0;
    for (const auto& [k, bits] : rep->top_contributors) sum += bits;
    REQUIRE(rep->score.has_value());
    CHECK(std::abs(sum - *rep->score) <= 1e-9);
}

TEST_CASE("unparseable statements are excluded and counted") {
    Detector det("u", "a", {});
    auto evs = day_events(0, {"SELECT a FROM t", "PRAGMA weird", "garbage ###"});
    const auto rep = det.process_interval(0, evs);
    REQUIRE(rep.has_value());
    CHECK(det.parse_errors() == 2);
    CHECK(det.profile().n_queries == 1);

    auto only_bad = day_events(1, {"PRAGMA weird"});
    CHECK_FALSE(det.process_interval(1, only_bad).has_value());
}

TEST_CASE("profile window caps accumulation") {
    DetectorConfig cfg;
    cfg.warm_up = 2;
    cfg.profile_window = 2;
    Detector det("u", "a", cfg);
    for (std::int64_t day = 0; day < 6; ++day)
        det.process_interval(day, day_events(day, {"SELECT a FROM t"}));
    // only the last two merged intervals remain
    CHECK(det.profile().total == 2);
    CHECK(det.profile().n_queries == 2);
}

TEST_CASE("process_stream buckets by interval and skips gaps") {
    DetectorConfig cfg;
    cfg.warm_up = 2;
    Detector det("u", "a", cfg);
    std::vector<QueryEvent> events;
    for (std::int64_t day : {0, 1, 2, 5, 6}) {
        auto evs = day_events(day, {"SELECT a FROM t", "SELECT b FROM t"});
        events.insert(events.end(), evs.begin(), evs.end());
    }
    const auto reports = process_stream(det, events);
    REQUIRE(reports.size() == 5);
    CHECK(reports[3].t_index == 5);
    CHECK(reports[3].decision == Decision::normal);  // identical mix, zero drift
}
