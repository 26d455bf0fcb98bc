// qwa: drift-based anomaly detection over per-user SQL query workloads.
//
// Subcommands: detect, profile, drift, similarity, inject, evaluate, features.
// Exit codes: 0 success, 1 error, 2 (detect) at least one alarm raised.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qwa/qwa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::vector<std::string> inputs;
    std::string format = "jsonl";
    std::int64_t interval = 86400;
    double epsilon = 1e-5;
    bool renormalize = false;
    int warm_up = 7;
    std::size_t window = 0;
    bool exclude_anomalous = true;
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string user;
    std::string app;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_input = true) {
    auto* in = cmd->add_option("--input,-i", o.inputs, "input log file (repeatable)");
    if (needs_input) in->required();
    cmd->add_option("--format", o.format, "log format")
        ->check(CLI::IsMember({"jsonl", "csv"}))
        ->capture_default_str();
    cmd->add_option("--interval", o.interval, "interval length in seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--epsilon", o.epsilon, "smoothing mass for missing features")
        ->capture_default_str();
    cmd->add_flag("--renormalize", o.renormalize, "rescale smoothed distributions to sum to 1");
    cmd->add_option("--warm-up", o.warm_up, "intervals consumed before classification")
        ->capture_default_str();
    cmd->add_option("--window", o.window, "profile sliding window in intervals (0 = unbounded)")
        ->capture_default_str();
    cmd->add_flag("--exclude-anomalous,!--include-anomalous", o.exclude_anomalous,
                  "keep alarmed intervals out of the profile (default on)");
    cmd->add_option("--seed", o.seed, "RNG seed for generated workloads")->capture_default_str();
    cmd->add_option("--out,-o", o.out, "output directory (env QWA_OUT overrides)")
        ->capture_default_str();
    cmd->add_option("--user", o.user, "restrict to one user id");
    cmd->add_option("--app", o.app, "restrict to one app id");
}

qwa::LogFormat log_format(const CommonOpts& o) {
    return o.format == "csv" ? qwa::LogFormat::csv : qwa::LogFormat::jsonl;
}

qwa::DetectorConfig detector_config(const CommonOpts& o) {
    qwa::DetectorConfig cfg;
    cfg.interval_seconds = o.interval;
    cfg.smoothing.epsilon = o.epsilon;
    cfg.smoothing.renormalize = o.renormalize;
    cfg.warm_up = o.warm_up;
    cfg.profile_window = o.window;
    cfg.exclude_anomalous = o.exclude_anomalous;
    return cfg;
}

fs::path out_dir(const CommonOpts& o) {
    const char* env = std::getenv("QWA_OUT");
    fs::path dir = (env && *env) ? fs::path(env) : fs::path(o.out);
    fs::create_directories(dir);
    return dir;
}

std::string sanitize(std::string_view id) {
    std::string out;
    for (char c : id)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-'
                          ? c
                          : '_');
    return out.empty() ? std::string("_") : out;
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw qwa::IoError("cannot write " + tmp.string());
        f << content;
    }
    fs::rename(tmp, path);
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// merged, timestamp-sorted events from every input file
std::pair<std::vector<qwa::QueryEvent>, qwa::IngestStats> read_inputs(const CommonOpts& o) {
    std::optional<qwa::StreamSelector> selector;
    if (!o.user.empty() || !o.app.empty()) {
        if (o.user.empty() || o.app.empty())
            throw std::invalid_argument("--user and --app must be given together");
        selector = qwa::StreamSelector{o.user, o.app};
    }
    std::vector<qwa::QueryEvent> events;
    qwa::IngestStats stats;
    for (const auto& path : o.inputs) {
        auto r = qwa::read_stream(fs::path(path), log_format(o), selector);
        events.insert(events.end(), r.events.begin(), r.events.end());
        stats.total_lines += r.stats.total_lines;
        stats.accepted += r.stats.accepted;
        stats.skipped_non_sql += r.stats.skipped_non_sql;
        stats.skipped_malformed += r.stats.skipped_malformed;
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const qwa::QueryEvent& a, const qwa::QueryEvent& b) { return a.ts < b.ts; });
    return {std::move(events), stats};
}

using StreamKey = std::pair<std::string, std::string>;  // (user, app)

std::map<StreamKey, std::vector<qwa::QueryEvent>> group_streams(
    std::vector<qwa::QueryEvent> events) {
    std::map<StreamKey, std::vector<qwa::QueryEvent>> groups;
    for (auto& ev : events) groups[{ev.user, ev.app}].push_back(std::move(ev));
    return groups;
}

json alarm_record(const std::string& user, const std::string& app, const qwa::AlarmReport& rep) {
    json top = json::array();
    std::size_t shown = 0;
    for (const auto& [key, bits] : rep.top_contributors) {
        if (shown++ == 10) break;
        top.push_back({{"cat", qwa::category_name(key.cat)}, {"tok", key.token}, {"bits", bits}});
    }
    json j = {
        {"user", user},
        {"app", app},
        {"t_index", rep.t_index},
        {"interval_start_ts", rep.interval_start_ts},
        {"score", rep.score ? json(*rep.score) : json(nullptr)},
        {"threshold", rep.threshold ? json(*rep.threshold) : json(nullptr)},
        {"decision", qwa::decision_name(rep.decision)},
        {"top", std::move(top)},
    };
    return j;
}

std::string drift_csv(const std::vector<qwa::AlarmReport>& reports) {
    std::string csv = "t_index,score,predicted,threshold\n";
    for (const auto& rep : reports) {
        if (!rep.score) continue;
        csv += std::to_string(rep.t_index);
        csv += ',';
        csv += fmt_double(*rep.score);
        csv += ',';
        if (rep.predicted) csv += fmt_double(*rep.predicted);
        csv += ',';
        if (rep.threshold) csv += fmt_double(*rep.threshold);
        csv += '\n';
    }
    return csv;
}

void print_stats(const qwa::IngestStats& s) {
    std::cerr << "ingest: " << s.total_lines << " records, " << s.accepted << " accepted, "
              << s.skipped_non_sql << " non-sql, " << s.skipped_malformed << " malformed\n";
}

// --- subcommands --------------------------------------------------------------

int cmd_detect(const CommonOpts& o) {
    auto [events, stats] = read_inputs(o);
    print_stats(stats);
    const fs::path dir = out_dir(o);
    std::int64_t alarms = 0;
    for (auto& [key, stream] : group_streams(std::move(events))) {
        qwa::Detector det(key.first, key.second, detector_config(o));
        const auto reports = qwa::process_stream(det, stream);
        std::string jsonl;
        std::int64_t stream_alarms = 0;
        for (const auto& rep : reports) {
            jsonl += alarm_record(key.first, key.second, rep).dump();
            jsonl += '\n';
            if (rep.decision == qwa::Decision::alarm) ++stream_alarms;
        }
        alarms += stream_alarms;
        const std::string base = sanitize(key.first) + "_" + sanitize(key.second);
        write_atomic(dir / (base + "_alarms.jsonl"), jsonl);
        write_atomic(dir / (base + "_drift.csv"), drift_csv(reports));
        std::cout << key.first << "/" << key.second << ": " << reports.size() << " intervals, "
                  << stream_alarms << " alarms, " << det.parse_errors() << " parse errors\n";
    }
    return alarms > 0 ? 2 : 0;
}

int cmd_profile(const CommonOpts& o) {
    auto [events, stats] = read_inputs(o);
    print_stats(stats);
    const fs::path dir = out_dir(o);
    for (auto& [key, stream] : group_streams(std::move(events))) {
        qwa::UserProfile profile;
        profile.user_id = key.first;
        profile.app_id = key.second;
        if (!stream.empty()) {
            profile.start_ts = stream.front().ts;
            profile.end_ts = stream.back().ts + 1;
        }
        std::int64_t parse_errors = 0;
        for (const auto& ev : stream) {
            try {
                qwa::update_profile(profile, qwa::extract_features(ev.sql));
            } catch (const qwa::ParseError&) {
                ++parse_errors;
            }
        }
        const std::string base = sanitize(key.first) + "_" + sanitize(key.second);
        write_atomic(dir / (base + "_profile.json"), qwa::save_profile(profile) + "\n");
        std::cout << key.first << "/" << key.second << ": " << profile.n_queries
                  << " queries profiled, " << parse_errors << " parse errors\n";
    }
    return 0;
}

int cmd_drift(const CommonOpts& o) {
    auto [events, stats] = read_inputs(o);
    print_stats(stats);
    const fs::path dir = out_dir(o);
    auto groups = group_streams(std::move(events));
    if (groups.empty()) {
        write_atomic(dir / "drift.csv", "t_index,score,predicted,threshold\n");
        return 0;
    }
    for (auto& [key, stream] : groups) {
        qwa::Detector det(key.first, key.second, detector_config(o));
        const auto reports = qwa::process_stream(det, stream);
        const std::string base = sanitize(key.first) + "_" + sanitize(key.second);
        write_atomic(dir / (base + "_drift.csv"), drift_csv(reports));
    }
    return 0;
}

int cmd_similarity(const CommonOpts& o) {
    auto [events, stats] = read_inputs(o);
    print_stats(stats);
    const fs::path dir = out_dir(o);

    // per-app profiles keyed by user
    std::map<std::string, std::vector<qwa::UserProfile>> by_app;
    for (auto& [key, stream] : group_streams(std::move(events))) {
        qwa::UserProfile profile;
        profile.user_id = key.first;
        profile.app_id = key.second;
        for (const auto& ev : stream) {
            try {
                qwa::update_profile(profile, qwa::extract_features(ev.sql));
            } catch (const qwa::ParseError&) {
            }
        }
        if (profile.total > 0) by_app[key.second].push_back(std::move(profile));
    }

    qwa::SmoothingConfig smoothing{o.epsilon, o.renormalize};
    bool wrote = false;
    for (const auto& [app, profiles] : by_app) {
        if (profiles.size() < 2) {
            std::cerr << "similarity: app " << app << " has fewer than 2 users, skipped\n";
            continue;
        }
        const auto m = qwa::similarity_matrix(profiles, smoothing);
        std::string csv = "user";
        for (const auto& id : m.ids) csv += "," + qwa::csv_escape(id);
        csv += '\n';
        for (std::size_t i = 0; i < m.ids.size(); ++i) {
            csv += qwa::csv_escape(m.ids[i]);
            for (std::size_t j = 0; j < m.ids.size(); ++j) csv += "," + fmt_double(m.values[i][j]);
            csv += '\n';
        }
        write_atomic(dir / (sanitize(app) + "_similarity.csv"), csv);
        wrote = true;
    }
    if (!wrote) {
        std::cerr << "similarity: no app with at least 2 users\n";
        return 1;
    }
    return 0;
}

std::string labels_csv(const qwa::LabeledStream& labeled) {
    std::string csv = "t_index,label\n";
    for (const auto& [t, label] : labeled.labels) {
        csv += std::to_string(t);
        csv += ',';
        csv += label == qwa::IntervalLabel::injected ? "injected" : "benign";
        csv += '\n';
    }
    return csv;
}

std::string events_jsonl(const std::vector<qwa::QueryEvent>& events) {
    std::string out;
    for (const auto& ev : events) {
        out += json{{"ts", ev.ts}, {"user", ev.user}, {"app", ev.app}, {"sql", ev.sql}}.dump();
        out += '\n';
    }
    return out;
}

struct InjectOpts {
    std::string scenario;
    int volume = 20;
    std::string payload_file;
    std::string payload_user;
    std::string payload_app;
    bool rewrite = false;
    std::vector<std::int64_t> targets;
};

int cmd_inject(const CommonOpts& o, const InjectOpts& io) {
    auto [events, stats] = read_inputs(o);
    print_stats(stats);
    if (events.empty()) throw std::invalid_argument("victim stream is empty");
    const auto groups = group_streams(std::move(events));
    if (groups.size() != 1)
        throw std::invalid_argument("victim input spans several (user, app) streams; "
                                    "select one with --user/--app");
    const auto& [victim_key, victim] = *groups.begin();
    if (io.targets.empty()) throw std::invalid_argument("--target-interval is required");
    const std::set<std::int64_t> targets(io.targets.begin(), io.targets.end());

    qwa::LabeledStream labeled;
    if (io.rewrite) {
        labeled = qwa::inject_rewrite(victim, targets, o.interval);
    } else if (!io.scenario.empty()) {
        qwa::AttackScenario scenario;
        if (io.scenario == "feed_tamper") scenario = qwa::feed_tamper_scenario(io.volume);
        else if (io.scenario == "account_exfil") scenario = qwa::account_exfil_scenario(io.volume);
        else if (io.scenario == "update_suppress") scenario = qwa::update_suppress_scenario(io.volume);
        else throw std::invalid_argument("unknown scenario: " + io.scenario);
        std::vector<qwa::QueryEvent> payload;
        std::uint64_t n = 0;
        for (std::int64_t t : targets) {
            const auto sqls = qwa::generate_simulated(scenario, o.seed + n++);
            auto evs = qwa::events_from_sqls(sqls, victim_key.first, victim_key.second, t, o.interval);
            payload.insert(payload.end(), evs.begin(), evs.end());
        }
        labeled = qwa::inject(victim, payload, targets, o.interval);
    } else if (!io.payload_file.empty()) {
        CommonOpts po = o;
        po.inputs = {io.payload_file};
        po.user = io.payload_user;
        po.app = io.payload_app;
        auto [payload_events, pstats] = read_inputs(po);
        if (payload_events.empty()) throw qwa::EmptyPayload("payload stream is empty");
        const auto partitions = qwa::partition_by_interval(payload_events, o.interval);
        std::vector<qwa::QueryEvent> payload;
        std::size_t i = 0;
        for (std::int64_t t : targets) {
            auto moved = qwa::rebase_events(partitions[i % partitions.size()].second, t, o.interval);
            for (auto& ev : moved) {
                ev.user = victim_key.first;
                ev.app = victim_key.second;
            }
            payload.insert(payload.end(), moved.begin(), moved.end());
            ++i;
        }
        labeled = qwa::inject(victim, payload, targets, o.interval);
    } else {
        throw std::invalid_argument("one of --scenario, --payload or --rewrite is required");
    }

    const fs::path dir = out_dir(o);
    write_atomic(dir / "injected.jsonl", events_jsonl(labeled.events));
    write_atomic(dir / "labels.csv", labels_csv(labeled));
    std::cout << "injected " << io.targets.size() << " interval(s) into " << victim_key.first
              << "/" << victim_key.second << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& o, const std::string& labels_file, const std::string& mode) {
    auto [events, stats] = read_inputs(o);
    print_stats(stats);
    if (events.empty()) throw std::invalid_argument("stream is empty");

    qwa::LabeledStream labeled;
    labeled.events = std::move(events);
    std::ifstream lf(labels_file);
    if (!lf) throw qwa::IoError("cannot open labels file: " + labels_file);
    std::string record;
    int span = 0;
    bool first = true;
    while (qwa::read_csv_record(lf, record, span)) {
        std::vector<std::string> fields;
        if (!qwa::split_csv_record(record, fields) || fields.size() != 2)
            throw qwa::IoError("bad labels row: " + record);
        if (first && fields[0] == "t_index") {
            first = false;
            continue;
        }
        first = false;
        std::int64_t t = 0;
        auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), t);
        if (ec != std::errc{}) throw qwa::IoError("bad t_index in labels: " + fields[0]);
        labeled.labels[t] = fields[1] == "injected" ? qwa::IntervalLabel::injected
                                                    : qwa::IntervalLabel::benign;
    }

    const auto report = qwa::evaluate(detector_config(o), labeled);
    const auto& key = labeled.events.front();
    const json j = {
        {"app", key.app},
        {"user", key.user},
        {"mode", mode},
        {"attacks_performed", report.attacks_performed},
        {"attacks_detected", report.attacks_detected},
        {"detection_rate", report.detection_rate},
        {"false_positives", report.false_positives},
        {"benign_intervals", report.benign_intervals},
        {"false_positive_rate", report.false_positive_rate},
    };
    const fs::path dir = out_dir(o);
    write_atomic(dir / "report.json", j.dump(2) + "\n");
    std::string csv =
        "app,user,mode,attacks_performed,attacks_detected,detection_rate,"
        "false_positives,benign_intervals,false_positive_rate\n";
    csv += qwa::csv_escape(key.app) + "," + qwa::csv_escape(key.user) + "," +
           qwa::csv_escape(mode) + "," + std::to_string(report.attacks_performed) + "," +
           std::to_string(report.attacks_detected) + "," + fmt_double(report.detection_rate) +
           "," + std::to_string(report.false_positives) + "," +
           std::to_string(report.benign_intervals) + "," +
           fmt_double(report.false_positive_rate) + "\n";
    write_atomic(dir / "report.csv", csv);
    std::cout << "detection rate " << report.detection_rate << " (" << report.attacks_detected
              << "/" << report.attacks_performed << "), false-positive rate "
              << report.false_positive_rate << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"query workload auditor: per-user SQL behavior drift detection"};
    app.require_subcommand(1);

    CommonOpts detect_o, profile_o, drift_o, sim_o, inject_o, eval_o;
    InjectOpts inject_extra;
    std::string eval_labels, eval_mode = "unspecified", features_sql;

    add_common(app.add_subcommand("detect", "score intervals and raise alarms"), detect_o);
    add_common(app.add_subcommand("profile", "build per-(user, app) profiles"), profile_o);
    add_common(app.add_subcommand("drift", "export drift-score series"), drift_o);
    add_common(app.add_subcommand("similarity", "inter-user divergence matrix per app"), sim_o);

    auto* inj = app.add_subcommand("inject", "splice an attack workload into a victim stream");
    add_common(inj, inject_o);
    inj->add_option("--scenario", inject_extra.scenario,
                    "built-in pack: feed_tamper | account_exfil | update_suppress");
    inj->add_option("--volume", inject_extra.volume, "statements per injected interval")
        ->capture_default_str();
    inj->add_option("--payload", inject_extra.payload_file, "log file with payload workload");
    inj->add_option("--payload-user", inject_extra.payload_user, "payload user selector");
    inj->add_option("--payload-app", inject_extra.payload_app, "payload app selector");
    inj->add_flag("--rewrite", inject_extra.rewrite,
                  "mutate the victim's own statements in the target intervals");
    inj->add_option("--target-interval", inject_extra.targets,
                    "interval index to inject into (repeatable)");

    auto* ev = app.add_subcommand("evaluate", "replay a labeled stream and score detection");
    add_common(ev, eval_o);
    ev->add_option("--labels", eval_labels, "labels.csv produced by inject")->required();
    ev->add_option("--mode", eval_mode, "attack-model tag for the report")->capture_default_str();

    auto* feat = app.add_subcommand("features", "dump the feature vector of one statement");
    feat->add_option("--sql", features_sql, "SQL statement")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("detect")) return cmd_detect(detect_o);
        if (app.got_subcommand("profile")) return cmd_profile(profile_o);
        if (app.got_subcommand("drift")) return cmd_drift(drift_o);
        if (app.got_subcommand("similarity")) return cmd_similarity(sim_o);
        if (app.got_subcommand("inject")) return cmd_inject(inject_o, inject_extra);
        if (app.got_subcommand("evaluate")) return cmd_evaluate(eval_o, eval_labels, eval_mode);
        if (app.got_subcommand("features")) {
            std::cout << qwa::feature_vector_json(qwa::extract_features(features_sql)).dump(2)
                      << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
