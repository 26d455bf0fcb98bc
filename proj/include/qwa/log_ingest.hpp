#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qwa/csv.hpp"
#include "qwa/types.hpp"

namespace qwa {

enum class LogFormat { jsonl, csv };

enum class SkipReason { malformed, non_sql };

// Per-file bookkeeping. total_lines counts logical records (a multi-line
// quoted CSV record is one); a recognized CSV header row is not a record.
struct IngestStats {
    std::int64_t total_lines = 0;
    std::int64_t accepted = 0;
    std::int64_t skipped_non_sql = 0;
    std::int64_t skipped_malformed = 0;

    friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool parse_int64(std::string_view s, std::int64_t& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool event_fields_valid(const QueryEvent& ev) {
    return ev.ts >= 0 && !trim(ev.user).empty() && !trim(ev.app).empty() &&
           !trim(ev.sql).empty();
}

}  // namespace detail

// First keyword of the statement, lowercased, with leading whitespace and
// `--` / `/* */` comments stripped. Empty when there is none.
inline std::string first_keyword(std::string_view sql) {
    std::size_t i = 0;
    const std::size_t n = sql.size();
    while (i < n) {
        const char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = (i + 1 < n) ? i + 2 : n;
        } else {
            break;
        }
    }
    std::string kw;
    while (i < n && (std::isalpha(static_cast<unsigned char>(sql[i])) || sql[i] == '_')) {
        kw.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(sql[i]))));
        ++i;
    }
    return kw;
}

// Keyword-based DML gate; everything else (PRAGMA, BEGIN, stored procedure
// calls, environment checks) is skipped before parsing.
inline std::optional<SkipReason> filter_non_sql(const QueryEvent& ev) {
    const std::string kw = first_keyword(ev.sql);
    if (kw == "select" || kw == "insert" || kw == "update" || kw == "delete")
        return std::nullopt;
    return SkipReason::non_sql;
}

// Maps one record to a QueryEvent. Structural failures (bad JSON, missing or
// mistyped fields, wrong CSV arity, violated field invariants) come back as
// Skip(malformed); this never throws on bad input.
inline std::variant<QueryEvent, SkipReason> parse_log_line(std::string_view line, LogFormat format) {
    QueryEvent ev;
    if (format == LogFormat::jsonl) {
        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (!j.is_object()) return SkipReason::malformed;
        const auto ts = j.find("ts");
        const auto user = j.find("user");
        const auto app = j.find("app");
        const auto sql = j.find("sql");
        if (ts == j.end() || user == j.end() || app == j.end() || sql == j.end())
            return SkipReason::malformed;
        if (!ts->is_number_integer() && !ts->is_number_unsigned()) return SkipReason::malformed;
        if (!user->is_string() || !app->is_string() || !sql->is_string())
            return SkipReason::malformed;
        ev.ts = ts->get<std::int64_t>();
        ev.user = user->get<std::string>();
        ev.app = app->get<std::string>();
        ev.sql = sql->get<std::string>();
    } else {
        std::vector<std::string> fields;
        if (!split_csv_record(line, fields) || fields.size() != 4) return SkipReason::malformed;
        if (!detail::parse_int64(fields[0], ev.ts)) return SkipReason::malformed;
        ev.user = std::move(fields[1]);
        ev.app = std::move(fields[2]);
        ev.sql = std::move(fields[3]);
    }
    if (!detail::event_fields_valid(ev)) return SkipReason::malformed;
    return ev;
}

struct StreamSelector {
    std::string user;
    std::string app;
};

struct ReadResult {
    std::vector<QueryEvent> events;  // stably sorted by timestamp
    IngestStats stats;               // file-level, computed before the selector
};

namespace detail {

inline bool is_csv_header(std::string_view record) {
    std::vector<std::string> fields;
    if (!split_csv_record(record, fields) || fields.size() != 4) return false;
    const char* expected[4] = {"ts", "user", "app", "sql"};
    for (int i = 0; i < 4; ++i) {
        std::string f{trim(fields[i])};
        std::transform(f.begin(), f.end(), f.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (f != expected[i]) return false;
    }
    return true;
}

}  // namespace detail

inline ReadResult read_stream(std::istream& in, LogFormat format,
                              const std::optional<StreamSelector>& selector = std::nullopt) {
    ReadResult result;
    auto consume = [&](std::string_view record) {
        ++result.stats.total_lines;
        auto parsed = parse_log_line(record, format);
        if (std::holds_alternative<SkipReason>(parsed)) {
            ++result.stats.skipped_malformed;
            return;
        }
        auto& ev = std::get<QueryEvent>(parsed);
        if (filter_non_sql(ev)) {
            ++result.stats.skipped_non_sql;
            return;
        }
        ++result.stats.accepted;
        if (selector && (ev.user != selector->user || ev.app != selector->app)) return;
        result.events.push_back(std::move(ev));
    };

    if (format == LogFormat::jsonl) {
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            consume(line);
        }
    } else {
        std::string record;
        int span = 0;
        bool first = true;
        while (read_csv_record(in, record, span)) {
            if (first && detail::is_csv_header(record)) {
                first = false;
                continue;
            }
            first = false;
            consume(record);
        }
    }

    std::stable_sort(result.events.begin(), result.events.end(),
                     [](const QueryEvent& a, const QueryEvent& b) { return a.ts < b.ts; });
    return result;
}

inline ReadResult read_stream(const std::filesystem::path& path, LogFormat format,
                              const std::optional<StreamSelector>& selector = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open log file: " + path.string());
    return read_stream(in, format, selector);
}

}  // namespace qwa
