#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace qwa {

// Splits one RFC-4180 record into fields. The record must already be
// complete (quotes balanced); returns false on a structural error such as
// a stray quote or trailing garbage after a closing quote.
inline bool split_csv_record(std::string_view record, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    std::size_t i = 0;
    const std::size_t n = record.size();
    while (true) {
        field.clear();
        if (i < n && record[i] == '"') {
            ++i;
            while (true) {
                if (i >= n) return false;  // unterminated quote
                if (record[i] == '"') {
                    if (i + 1 < n && record[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                    } else {
                        ++i;
                        break;
                    }
                } else {
                    field.push_back(record[i++]);
                }
            }
            if (i < n && record[i] != ',') return false;
        } else {
            while (i < n && record[i] != ',') {
                if (record[i] == '"') return false;
                field.push_back(record[i++]);
            }
        }
        out.push_back(field);
        if (i >= n) return true;
        ++i;  // consume comma
    }
}

// Reads one logical CSV record, joining physical lines while a quoted field
// is open. Returns false at end of stream. `physical_lines` reports how many
// input lines the record spanned.
inline bool read_csv_record(std::istream& in, std::string& record, int& physical_lines) {
    record.clear();
    physical_lines = 0;
    std::string line;
    bool in_quotes = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++physical_lines;
        if (!record.empty()) record.push_back('\n');
        record += line;
        for (char c : line)
            if (c == '"') in_quotes = !in_quotes;
        if (!in_quotes) return true;
    }
    return physical_lines > 0;
}

inline std::string csv_escape(std::string_view field) {
    bool needs_quotes = false;
    for (char c : field) {
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace qwa
