#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "qwa/types.hpp"

namespace qwa {

enum class TokKind : std::uint8_t { End, Ident, Number, String, Param, Punct };

struct SqlToken {
    TokKind kind = TokKind::End;
    std::string text;  // Ident/Number: raw lexeme (quotes removed); String: content; Punct: operator
};

// Tokenizes one SQL statement. Understands '--' and '/* */' comments,
// '...' strings with '' escapes, "..."/`...`/[...] quoted identifiers, and
// the ?NNN/:name/@name/$name parameter forms (all normalized to "?").
// Throws ParseError on an unterminated string or quoted identifier.
inline std::vector<SqlToken> tokenize_sql(std::string_view sql) {
    std::vector<SqlToken> out;
    std::size_t i = 0;
    const std::size_t n = sql.size();
    auto isidstart = [](char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    };
    auto isidchar = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
    };

    while (i < n) {
        const char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = (i + 1 < n) ? i + 2 : n;
            continue;
        }
        if (c == '\'') {
            std::string s;
            ++i;
            while (true) {
                if (i >= n) throw ParseError("unterminated string literal");
                if (sql[i] == '\'') {
                    if (i + 1 < n && sql[i + 1] == '\'') {
                        s.push_back('\'');
                        i += 2;
                    } else {
                        ++i;
                        break;
                    }
                } else {
                    s.push_back(sql[i++]);
                }
            }
            out.push_back({TokKind::String, std::move(s)});
            continue;
        }
        if (c == '"' || c == '`' || c == '[') {
            const char close = (c == '[') ? ']' : c;
            std::string s;
            ++i;
            while (true) {
                if (i >= n) throw ParseError("unterminated quoted identifier");
                if (sql[i] == close) {
                    if (close != ']' && i + 1 < n && sql[i + 1] == close) {
                        s.push_back(close);
                        i += 2;
                    } else {
                        ++i;
                        break;
                    }
                } else {
                    s.push_back(sql[i++]);
                }
            }
            out.push_back({TokKind::Ident, std::move(s)});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            std::string s;
            if (c == '0' && i + 1 < n && (sql[i + 1] == 'x' || sql[i + 1] == 'X')) {
                s += sql.substr(i, 2);
                i += 2;
                while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) s.push_back(sql[i++]);
            } else {
                while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) s.push_back(sql[i++]);
                if (i < n && sql[i] == '.') {
                    s.push_back(sql[i++]);
                    while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) s.push_back(sql[i++]);
                }
                if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
                    std::size_t j = i + 1;
                    if (j < n && (sql[j] == '+' || sql[j] == '-')) ++j;
                    if (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) {
                        while (i < j) s.push_back(sql[i++]);
                        while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) s.push_back(sql[i++]);
                    }
                }
            }
            out.push_back({TokKind::Number, std::move(s)});
            continue;
        }
        if (c == '?') {
            ++i;
            while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
            out.push_back({TokKind::Param, "?"});
            continue;
        }
        if ((c == ':' || c == '@' || c == '$') && i + 1 < n && isidstart(sql[i + 1])) {
            ++i;
            while (i < n && isidchar(sql[i])) ++i;
            out.push_back({TokKind::Param, "?"});
            continue;
        }
        if (isidstart(c)) {
            std::string s;
            while (i < n && isidchar(sql[i])) s.push_back(sql[i++]);
            out.push_back({TokKind::Ident, std::move(s)});
            continue;
        }
        // multi-char operators first
        static constexpr std::string_view two_char[] = {"<=", ">=", "<>", "!=", "==", "||", "<<", ">>"};
        bool matched = false;
        if (i + 1 < n) {
            const std::string_view pair = sql.substr(i, 2);
            for (auto op : two_char) {
                if (pair == op) {
                    out.push_back({TokKind::Punct, std::string(op)});
                    i += 2;
                    matched = true;
                    break;
                }
            }
        }
        if (matched) continue;
        out.push_back({TokKind::Punct, std::string(1, c)});
        ++i;
    }
    out.push_back({TokKind::End, ""});
    return out;
}

}  // namespace qwa
