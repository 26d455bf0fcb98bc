#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qwa/sql_lexer.hpp"
#include "qwa/types.hpp"

// Clause-level feature extraction.
//
// A statement is reduced to a sparse count vector of (category, token) pairs:
//   - projection items, aggregate arguments, INSERT column lists and UPDATE
//     SET targets                                -> PROJECTION
//   - WHERE/HAVING/ON predicates comparing two column sides -> both sides JOIN
//   - predicates comparing a column side against literals or placeholders
//                                                -> SELECTION (+ CONSTANT / PARAMETER)
//   - GROUP BY / ORDER BY items                  -> GROUPBY / ORDERBY
//   - literal operands anywhere                  -> CONSTANT (lexeme, lowercased)
//   - ?/:name/@name/$name placeholders anywhere  -> PARAMETER ("?")
// Subqueries are walked recursively and contribute to the same vector.
// Attribute tokens are alias-resolved against the enclosing FROM scope.

namespace qwa {

struct ExtractOptions {
    bool from_table_category = false;   // record FROM/target tables as FROM_TABLE
    bool statement_kind_feature = false;  // record the statement kind as a feature
    bool bucket_constants = false;        // CONSTANT tokens become <num> / <str>
};

// Alias resolution context for one query block: declared aliases plus the
// FROM tables in declaration order.
struct AliasMap {
    std::map<std::string, std::string> alias_to_table;
    std::vector<std::string> tables;
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::vector<std::string> split_dotted(std::string_view name) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= name.size(); ++i) {
        if (i == name.size() || name[i] == '.') {
            parts.emplace_back(name.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

}  // namespace detail

// Canonical token for a column reference: lowercased, alias-resolved to
// table.column when the alias is declared, bare columns qualified by the sole
// FROM table when unambiguous. Undeclared qualifiers are kept verbatim.
inline std::string canonicalize(std::string_view identifier, const AliasMap& scope) {
    auto parts = detail::split_dotted(detail::lower(identifier));
    if (parts.size() >= 3) parts.erase(parts.begin(), parts.end() - 2);  // drop db prefix
    if (parts.size() == 2) {
        auto it = scope.alias_to_table.find(parts[0]);
        if (it != scope.alias_to_table.end()) return it->second + "." + parts[1];
        return parts[0] + "." + parts[1];
    }
    if (scope.tables.size() == 1) return scope.tables[0] + "." + parts[0];
    return parts[0];
}

namespace detail {

struct Expr {
    enum class Kind : std::uint8_t {
        Column,      // text = raw dotted name
        LiteralNum,  // text = lexeme, lowercased
        LiteralStr,  // text = content, lowercased
        Param,
        Star,        // text = raw qualifier or empty
        Op,          // text = operator; comparison flag set for predicates
        Func,        // text = function name, lowercased
        Subquery,    // features already harvested when this node was built
        List,
    };
    Kind kind = Kind::Op;
    std::string text;
    bool comparison = false;
    std::vector<Expr> kids;
};

inline bool is_reserved(std::string_view w) {
    static constexpr std::string_view words[] = {
        "from", "where", "group", "order", "by", "having", "limit", "offset",
        "union", "except", "intersect", "on", "using", "join", "inner", "left",
        "right", "full", "cross", "natural", "outer", "as", "and", "or", "not",
        "in", "between", "like", "glob", "match", "regexp", "is", "isnull",
        "notnull", "asc", "desc", "set", "values", "when", "then", "else",
        "end", "case", "distinct", "all", "exists", "collate", "cast", "select",
        "insert", "update", "delete", "into", "default", "returning", "over",
        "filter", "window", "escape", "null",
    };
    for (auto k : words)
        if (w == k) return true;
    return false;
}

class FeatureParser {
  public:
    FeatureParser(std::vector<SqlToken> tokens, const ExtractOptions& opts)
        : toks_(std::move(tokens)), opts_(opts) {}

    FeatureVector run() {
        const std::string kw = lower(peek().text);
        if (peek().kind != TokKind::Ident) throw ParseError("statement must start with a keyword");
        if (kw == "select") {
            out_.kind = StatementKind::Select;
            parse_select();
        } else if (kw == "insert") {
            out_.kind = StatementKind::Insert;
            parse_insert();
        } else if (kw == "update") {
            out_.kind = StatementKind::Update;
            parse_update();
        } else if (kw == "delete") {
            out_.kind = StatementKind::Delete;
            parse_delete();
        } else {
            throw ParseError("unsupported statement kind: " + kw);
        }
        accept_punct(";");
        if (peek().kind != TokKind::End) throw ParseError("trailing tokens after statement");
        if (opts_.statement_kind_feature)
            add(Category::StatementKind, std::string(statement_kind_name(out_.kind)));
        // every parsed statement contributes at least one observation
        if (out_.counts.empty())
            out_.counts[{Category::StatementKind, std::string(statement_kind_name(out_.kind))}] = 1;
        return std::move(out_);
    }

  private:
    // --- token helpers -----------------------------------------------------
    const SqlToken& peek(std::size_t ahead = 0) const {
        const std::size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const SqlToken& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    bool at_kw(std::string_view kw, std::size_t ahead = 0) const {
        const SqlToken& t = peek(ahead);
        return t.kind == TokKind::Ident && lower(t.text) == kw;
    }
    bool accept_kw(std::string_view kw) {
        if (!at_kw(kw)) return false;
        advance();
        return true;
    }
    void expect_kw(std::string_view kw) {
        if (!accept_kw(kw)) throw ParseError("expected keyword " + std::string(kw));
    }
    bool at_punct(std::string_view p, std::size_t ahead = 0) const {
        const SqlToken& t = peek(ahead);
        return t.kind == TokKind::Punct && t.text == p;
    }
    bool accept_punct(std::string_view p) {
        if (!at_punct(p)) return false;
        advance();
        return true;
    }
    void expect_punct(std::string_view p) {
        if (!accept_punct(p)) throw ParseError("expected '" + std::string(p) + "'");
    }

    // --- scopes and feature emission ---------------------------------------
    void add(Category cat, std::string token) { ++out_.counts[{cat, std::move(token)}]; }

    std::string resolve_column(const std::string& raw) const {
        auto parts = split_dotted(lower(raw));
        if (parts.size() >= 3) parts.erase(parts.begin(), parts.end() - 2);
        if (parts.size() == 2) {
            for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
                auto hit = it->alias_to_table.find(parts[0]);
                if (hit != it->alias_to_table.end()) return hit->second + "." + parts[1];
            }
            return parts[0] + "." + parts[1];
        }
        if (!scopes_.empty() && scopes_.back().tables.size() == 1)
            return scopes_.back().tables[0] + "." + parts[0];
        return parts[0];
    }

    std::string resolve_star(const std::string& qualifier) const {
        if (!qualifier.empty()) {
            const std::string q = lower(qualifier);
            for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
                auto hit = it->alias_to_table.find(q);
                if (hit != it->alias_to_table.end()) return hit->second + ".*";
            }
            return q + ".*";
        }
        if (!scopes_.empty() && scopes_.back().tables.size() == 1)
            return scopes_.back().tables[0] + ".*";
        return "*";
    }

    std::string constant_token(const Expr& e) const {
        if (opts_.bucket_constants)
            return e.kind == Expr::Kind::LiteralNum ? "<num>" : "<str>";
        return e.text;
    }

    // --- generic walkers ----------------------------------------------------
    struct Collected {
        std::vector<std::string> columns;        // raw names
        std::vector<const Expr*> constants;
        int params = 0;
    };

    static void collect(const Expr& e, Collected& into) {
        switch (e.kind) {
            case Expr::Kind::Column: into.columns.push_back(e.text); break;
            case Expr::Kind::LiteralNum:
            case Expr::Kind::LiteralStr: into.constants.push_back(&e); break;
            case Expr::Kind::Param: ++into.params; break;
            case Expr::Kind::Subquery:
            case Expr::Kind::Star: break;
            default:
                for (const auto& k : e.kids) collect(k, into);
        }
    }

    // Column references in value position (projection lists, VALUES rows, SET
    // right-hand sides, GROUP BY / ORDER BY items) land in `col_cat`.
    void classify_value(const Expr& e, Category col_cat) {
        if (e.kind == Expr::Kind::Star) {
            if (col_cat == Category::Projection) add(Category::Projection, resolve_star(e.text));
            return;
        }
        if (e.kind == Expr::Kind::Column) {
            add(col_cat, resolve_column(e.text));
            return;
        }
        if (e.kind == Expr::Kind::LiteralNum || e.kind == Expr::Kind::LiteralStr) {
            add(Category::Constant, constant_token(e));
            return;
        }
        if (e.kind == Expr::Kind::Param) {
            add(Category::Parameter, "?");
            return;
        }
        if (e.kind == Expr::Kind::Subquery) return;
        if (e.comparison) {  // predicate embedded in value position
            classify_predicate(e);
            return;
        }
        for (const auto& k : e.kids) classify_value(k, col_cat);
    }

    // WHERE/HAVING/ON expressions. A comparison whose two sides both carry
    // column references is a join; otherwise its columns are selections.
    void classify_predicate(const Expr& e) {
        if (e.kind == Expr::Kind::Op && !e.comparison &&
            (e.text == "and" || e.text == "or" || e.text == "not")) {
            for (const auto& k : e.kids) classify_predicate(k);
            return;
        }
        if (e.comparison) {
            Collected lhs, rhs;
            if (!e.kids.empty()) collect(e.kids[0], lhs);
            for (std::size_t i = 1; i < e.kids.size(); ++i) collect(e.kids[i], rhs);
            const bool join = !lhs.columns.empty() && !rhs.columns.empty();
            const Category col_cat = join ? Category::Join : Category::Selection;
            for (const auto& c : lhs.columns) add(col_cat, resolve_column(c));
            for (const auto& c : rhs.columns) add(col_cat, resolve_column(c));
            for (const Expr* lit : lhs.constants) add(Category::Constant, constant_token(*lit));
            for (const Expr* lit : rhs.constants) add(Category::Constant, constant_token(*lit));
            for (int i = 0; i < lhs.params + rhs.params; ++i) add(Category::Parameter, "?");
            return;
        }
        classify_value(e, Category::Selection);
    }

    // --- expression grammar --------------------------------------------------
    // hostile inputs can nest arbitrarily; bound the recursion instead of
    // letting it eat the stack
    struct DepthGuard {
        explicit DepthGuard(int& d) : depth(d) {
            if (++depth > 200) throw ParseError("expression nesting too deep");
        }
        ~DepthGuard() { --depth; }
        int& depth;
    };

    Expr parse_expr() {
        DepthGuard guard(depth_);
        return parse_or();
    }

    Expr parse_or() {
        Expr e = parse_and();
        while (accept_kw("or")) {
            Expr node{Expr::Kind::Op, "or", false, {}};
            node.kids.push_back(std::move(e));
            node.kids.push_back(parse_and());
            e = std::move(node);
        }
        return e;
    }

    Expr parse_and() {
        Expr e = parse_not();
        while (accept_kw("and")) {
            Expr node{Expr::Kind::Op, "and", false, {}};
            node.kids.push_back(std::move(e));
            node.kids.push_back(parse_not());
            e = std::move(node);
        }
        return e;
    }

    Expr parse_not() {
        if (accept_kw("not")) {
            Expr node{Expr::Kind::Op, "not", false, {}};
            node.kids.push_back(parse_not());
            return node;
        }
        return parse_comparison();
    }

    Expr parse_comparison() {
        Expr e = parse_additive();
        while (true) {
            bool negated = false;
            if (at_kw("not") && (at_kw("in", 1) || at_kw("between", 1) || at_kw("like", 1) ||
                                 at_kw("glob", 1) || at_kw("match", 1) || at_kw("regexp", 1))) {
                advance();
                negated = true;
            }
            (void)negated;
            if (peek().kind == TokKind::Punct &&
                (peek().text == "=" || peek().text == "==" || peek().text == "!=" ||
                 peek().text == "<>" || peek().text == "<" || peek().text == "<=" ||
                 peek().text == ">" || peek().text == ">=")) {
                Expr node{Expr::Kind::Op, advance().text, true, {}};
                node.kids.push_back(std::move(e));
                node.kids.push_back(parse_additive());
                e = std::move(node);
                continue;
            }
            if (at_kw("like") || at_kw("glob") || at_kw("match") || at_kw("regexp")) {
                Expr node{Expr::Kind::Op, lower(advance().text), true, {}};
                node.kids.push_back(std::move(e));
                node.kids.push_back(parse_additive());
                if (accept_kw("escape")) node.kids.push_back(parse_additive());
                e = std::move(node);
                continue;
            }
            if (at_kw("between")) {
                advance();
                Expr node{Expr::Kind::Op, "between", true, {}};
                node.kids.push_back(std::move(e));
                node.kids.push_back(parse_additive());
                expect_kw("and");
                node.kids.push_back(parse_additive());
                e = std::move(node);
                continue;
            }
            if (at_kw("in")) {
                advance();
                Expr node{Expr::Kind::Op, "in", true, {}};
                node.kids.push_back(std::move(e));
                expect_punct("(");
                if (at_kw("select")) {
                    parse_select();
                    node.kids.push_back(Expr{Expr::Kind::Subquery, "", false, {}});
                } else if (!at_punct(")")) {
                    Expr list{Expr::Kind::List, "", false, {}};
                    list.kids.push_back(parse_expr());
                    while (accept_punct(",")) list.kids.push_back(parse_expr());
                    node.kids.push_back(std::move(list));
                }
                expect_punct(")");
                e = std::move(node);
                continue;
            }
            if (at_kw("is")) {
                advance();
                accept_kw("not");
                if (accept_kw("null")) {
                    Expr node{Expr::Kind::Op, "isnull", true, {}};
                    node.kids.push_back(std::move(e));
                    e = std::move(node);
                } else {
                    Expr node{Expr::Kind::Op, "is", true, {}};
                    node.kids.push_back(std::move(e));
                    node.kids.push_back(parse_additive());
                    e = std::move(node);
                }
                continue;
            }
            if (at_kw("isnull") || at_kw("notnull")) {
                advance();
                Expr node{Expr::Kind::Op, "isnull", true, {}};
                node.kids.push_back(std::move(e));
                e = std::move(node);
                continue;
            }
            break;
        }
        return e;
    }

    Expr parse_additive() {
        Expr e = parse_multiplicative();
        while (peek().kind == TokKind::Punct &&
               (peek().text == "+" || peek().text == "-" || peek().text == "||" ||
                peek().text == "&" || peek().text == "|" || peek().text == "<<" ||
                peek().text == ">>")) {
            Expr node{Expr::Kind::Op, advance().text, false, {}};
            node.kids.push_back(std::move(e));
            node.kids.push_back(parse_multiplicative());
            e = std::move(node);
        }
        return e;
    }

    Expr parse_multiplicative() {
        Expr e = parse_unary();
        while (peek().kind == TokKind::Punct &&
               (peek().text == "*" || peek().text == "/" || peek().text == "%")) {
            Expr node{Expr::Kind::Op, advance().text, false, {}};
            node.kids.push_back(std::move(e));
            node.kids.push_back(parse_unary());
            e = std::move(node);
        }
        return e;
    }

    Expr parse_unary() {
        if (at_punct("-") || at_punct("+") || at_punct("~")) {
            const std::string op = advance().text;
            Expr operand = parse_unary();
            if (op == "-" && operand.kind == Expr::Kind::LiteralNum) {
                operand.text = operand.text.starts_with('-') ? operand.text.substr(1)
                                                             : "-" + operand.text;
                return operand;
            }
            if (op == "+") return operand;
            Expr node{Expr::Kind::Op, op, false, {}};
            node.kids.push_back(std::move(operand));
            return node;
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        Expr e = parse_primary();
        while (accept_kw("collate")) advance();  // collation name
        return e;
    }

    Expr parse_primary() {
        const SqlToken& t = peek();
        if (t.kind == TokKind::Number)
            return Expr{Expr::Kind::LiteralNum, lower(advance().text), false, {}};
        if (t.kind == TokKind::String)
            return Expr{Expr::Kind::LiteralStr, lower(advance().text), false, {}};
        if (t.kind == TokKind::Param) {
            advance();
            return Expr{Expr::Kind::Param, "?", false, {}};
        }
        if (at_punct("*")) {
            advance();
            return Expr{Expr::Kind::Star, "", false, {}};
        }
        if (at_punct("(")) {
            advance();
            if (at_kw("select")) {
                parse_select();
                expect_punct(")");
                return Expr{Expr::Kind::Subquery, "", false, {}};
            }
            Expr first = parse_expr();
            if (at_punct(",")) {
                Expr list{Expr::Kind::List, "", false, {}};
                list.kids.push_back(std::move(first));
                while (accept_punct(",")) list.kids.push_back(parse_expr());
                expect_punct(")");
                return list;
            }
            expect_punct(")");
            return first;
        }
        if (t.kind != TokKind::Ident) throw ParseError("unexpected token '" + t.text + "'");

        const std::string word = lower(t.text);
        if (word == "null" || word == "true" || word == "false") {
            advance();
            return Expr{Expr::Kind::LiteralStr, word, false, {}};
        }
        if (word == "exists") {
            advance();
            expect_punct("(");
            if (!at_kw("select")) throw ParseError("expected subquery after EXISTS");
            parse_select();
            expect_punct(")");
            Expr node{Expr::Kind::Op, "exists", false, {}};
            node.kids.push_back(Expr{Expr::Kind::Subquery, "", false, {}});
            return node;
        }
        if (word == "case") {
            advance();
            Expr node{Expr::Kind::Func, "case", false, {}};
            if (!at_kw("when")) node.kids.push_back(parse_expr());
            while (accept_kw("when")) {
                node.kids.push_back(parse_expr());
                expect_kw("then");
                node.kids.push_back(parse_expr());
            }
            if (accept_kw("else")) node.kids.push_back(parse_expr());
            expect_kw("end");
            return node;
        }
        if (word == "cast") {
            advance();
            expect_punct("(");
            Expr node{Expr::Kind::Func, "cast", false, {}};
            node.kids.push_back(parse_expr());
            expect_kw("as");
            int depth = 0;  // type name, possibly parameterized
            while (!(depth == 0 && at_punct(")"))) {
                if (peek().kind == TokKind::End) throw ParseError("unterminated cast");
                if (at_punct("(")) ++depth;
                if (at_punct(")")) --depth;
                advance();
            }
            expect_punct(")");
            return node;
        }
        if (is_reserved(word)) throw ParseError("unexpected keyword '" + word + "'");

        // identifier: function call, dotted column, star qualifier, or bare column
        std::string name = advance().text;
        if (at_punct("(")) {
            advance();
            Expr node{Expr::Kind::Func, lower(name), false, {}};
            accept_kw("distinct");
            if (at_punct("*")) {
                advance();
                node.kids.push_back(Expr{Expr::Kind::Star, "", false, {}});
            } else if (!at_punct(")")) {
                node.kids.push_back(parse_expr());
                while (accept_punct(",")) node.kids.push_back(parse_expr());
            }
            expect_punct(")");
            return node;
        }
        while (at_punct(".")) {
            advance();
            if (at_punct("*")) {
                advance();
                return Expr{Expr::Kind::Star, name, false, {}};
            }
            if (peek().kind != TokKind::Ident) throw ParseError("expected name after '.'");
            name += ".";
            name += advance().text;
        }
        return Expr{Expr::Kind::Column, std::move(name), false, {}};
    }

    // --- statement grammar ---------------------------------------------------
    void parse_select() {
        DepthGuard guard(depth_);
        parse_select_core();
        while (true) {
            if (accept_kw("union")) {
                accept_kw("all");
            } else if (at_kw("except") || at_kw("intersect")) {
                advance();
            } else {
                break;
            }
            parse_select_core();
        }
    }

    void parse_select_core() {
        expect_kw("select");
        if (accept_kw("distinct") || accept_kw("all")) {
        }
        scopes_.emplace_back();

        std::vector<Expr> items;
        items.push_back(parse_result_column());
        while (accept_punct(",")) items.push_back(parse_result_column());

        std::vector<Expr> on_exprs;
        if (accept_kw("from")) parse_from(on_exprs);

        std::optional<Expr> where;
        if (accept_kw("where")) where = parse_expr();

        // scope is complete; classify what was gathered before the tail
        for (const auto& e : items) classify_value(e, Category::Projection);
        for (const auto& e : on_exprs) classify_predicate(e);
        if (where) classify_predicate(*where);

        // GROUP BY / HAVING / ORDER BY / LIMIT, tolerant of ordering
        while (true) {
            if (at_kw("group")) {
                advance();
                expect_kw("by");
                do classify_value(parse_expr(), Category::GroupBy);
                while (accept_punct(","));
            } else if (accept_kw("having")) {
                classify_predicate(parse_expr());
            } else if (at_kw("order")) {
                advance();
                expect_kw("by");
                do {
                    Expr e = parse_expr();
                    if (accept_kw("asc") || accept_kw("desc")) {
                    }
                    if (accept_kw("nulls")) advance();  // FIRST | LAST
                    classify_value(e, Category::OrderBy);
                } while (accept_punct(","));
            } else if (accept_kw("limit")) {
                classify_value(parse_expr(), Category::Selection);
                if (accept_kw("offset") || accept_punct(","))
                    classify_value(parse_expr(), Category::Selection);
            } else {
                break;
            }
        }
        scopes_.pop_back();
    }

    Expr parse_result_column() {
        Expr e = parse_expr();
        if (accept_kw("as")) {
            if (peek().kind != TokKind::Ident) throw ParseError("expected alias after AS");
            advance();
        } else if (peek().kind == TokKind::Ident && !is_reserved(lower(peek().text))) {
            advance();  // implicit alias
        }
        return e;
    }

    void parse_from(std::vector<Expr>& on_exprs) {
        std::string prev = parse_table_item();
        while (true) {
            if (accept_punct(",")) {
                prev = parse_table_item();
                continue;
            }
            bool is_join = false;
            std::size_t save = pos_;
            if (accept_kw("natural")) is_join = true;
            while (at_kw("left") || at_kw("right") || at_kw("full") || at_kw("inner") ||
                   at_kw("cross") || at_kw("outer")) {
                advance();
                is_join = true;
            }
            if (accept_kw("join")) {
                is_join = true;
            } else if (is_join) {
                throw ParseError("expected JOIN");
            } else {
                pos_ = save;
                break;
            }
            const std::string right = parse_table_item();
            if (accept_kw("on")) {
                on_exprs.push_back(parse_expr());
            } else if (accept_kw("using")) {
                expect_punct("(");
                do {
                    if (peek().kind != TokKind::Ident) throw ParseError("expected column in USING");
                    const std::string col = lower(advance().text);
                    add(Category::Join, prev.empty() ? col : prev + "." + col);
                    add(Category::Join, right.empty() ? col : right + "." + col);
                } while (accept_punct(","));
                expect_punct(")");
            }
            prev = right;
        }
    }

    // Returns the base table name, or "" for a derived table.
    std::string parse_table_item() {
        if (accept_punct("(")) {
            if (!at_kw("select")) throw ParseError("expected subquery in FROM");
            parse_select();
            expect_punct(")");
            register_alias_if_present("");
            return "";
        }
        if (peek().kind != TokKind::Ident || is_reserved(lower(peek().text)))
            throw ParseError("expected table name");
        std::string name = lower(advance().text);
        while (at_punct(".")) {  // schema.table -> keep table
            advance();
            if (peek().kind != TokKind::Ident) throw ParseError("expected name after '.'");
            name = lower(advance().text);
        }
        AliasMap& scope = scopes_.back();
        scope.tables.push_back(name);
        scope.alias_to_table.emplace(name, name);
        if (opts_.from_table_category) add(Category::FromTable, name);
        register_alias_if_present(name);
        return name;
    }

    void register_alias_if_present(const std::string& table) {
        std::string alias;
        if (accept_kw("as")) {
            if (peek().kind != TokKind::Ident) throw ParseError("expected alias after AS");
            alias = lower(advance().text);
        } else if (peek().kind == TokKind::Ident && !is_reserved(lower(peek().text))) {
            alias = lower(advance().text);
        }
        if (!alias.empty() && !table.empty()) scopes_.back().alias_to_table[alias] = table;
    }

    void push_target_scope(const std::string& table) {
        AliasMap scope;
        scope.tables.push_back(table);
        scope.alias_to_table.emplace(table, table);
        scopes_.push_back(std::move(scope));
        if (opts_.from_table_category) add(Category::FromTable, table);
    }

    std::string parse_target_table(bool allow_alias) {
        if (peek().kind != TokKind::Ident || is_reserved(lower(peek().text)))
            throw ParseError("expected table name");
        std::string name = lower(advance().text);
        while (at_punct(".")) {
            advance();
            if (peek().kind != TokKind::Ident) throw ParseError("expected name after '.'");
            name = lower(advance().text);
        }
        push_target_scope(name);
        if (allow_alias) register_alias_if_present(name);
        return name;
    }

    void parse_insert() {
        expect_kw("insert");
        if (accept_kw("or")) advance();  // conflict action
        expect_kw("into");
        parse_target_table(false);

        if (accept_punct("(")) {
            do {
                if (peek().kind != TokKind::Ident) throw ParseError("expected column name");
                add(Category::Projection, resolve_column(advance().text));
            } while (accept_punct(","));
            expect_punct(")");
        }

        if (accept_kw("values")) {
            do {
                expect_punct("(");
                if (!at_punct(")")) {
                    classify_value(parse_expr(), Category::Selection);
                    while (accept_punct(",")) classify_value(parse_expr(), Category::Selection);
                }
                expect_punct(")");
            } while (accept_punct(","));
        } else if (at_kw("select")) {
            parse_select();
        } else if (accept_kw("default")) {
            expect_kw("values");
        } else {
            throw ParseError("expected VALUES, SELECT or DEFAULT VALUES");
        }
        scopes_.pop_back();
    }

    void parse_update() {
        expect_kw("update");
        if (accept_kw("or")) advance();
        parse_target_table(true);
        expect_kw("set");
        do {
            if (peek().kind != TokKind::Ident) throw ParseError("expected column in SET");
            std::string col = advance().text;
            while (at_punct(".")) {
                advance();
                if (peek().kind != TokKind::Ident) throw ParseError("expected name after '.'");
                col += ".";
                col += advance().text;
            }
            add(Category::Projection, resolve_column(col));
            expect_punct("=");
            classify_value(parse_expr(), Category::Selection);
        } while (accept_punct(","));
        if (accept_kw("where")) classify_predicate(parse_expr());
        parse_update_delete_tail();
        scopes_.pop_back();
    }

    void parse_delete() {
        expect_kw("delete");
        expect_kw("from");
        parse_target_table(true);
        if (accept_kw("where")) classify_predicate(parse_expr());
        parse_update_delete_tail();
        scopes_.pop_back();
    }

    void parse_update_delete_tail() {
        if (at_kw("order")) {
            advance();
            expect_kw("by");
            do {
                Expr e = parse_expr();
                if (accept_kw("asc") || accept_kw("desc")) {
                }
                classify_value(e, Category::OrderBy);
            } while (accept_punct(","));
        }
        if (accept_kw("limit")) {
            classify_value(parse_expr(), Category::Selection);
            if (accept_kw("offset") || accept_punct(","))
                classify_value(parse_expr(), Category::Selection);
        }
    }

    std::vector<SqlToken> toks_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    ExtractOptions opts_;
    FeatureVector out_;
    std::vector<AliasMap> scopes_;
};

}  // namespace detail

// Parses one SELECT/INSERT/UPDATE/DELETE statement and returns its feature
// vector. Throws ParseError for anything else; callers count those and keep
// them out of profiles. Single pass over the statement text.
inline FeatureVector extract_features(std::string_view sql, const ExtractOptions& opts = {}) {
    detail::FeatureParser parser(tokenize_sql(sql), opts);
    return parser.run();
}

// Debug dump: {"kind":..., "features":[{"cat":...,"tok":...,"n":...}]}
inline nlohmann::json feature_vector_json(const FeatureVector& fv) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& [key, n] : fv.counts)
        features.push_back({{"cat", category_name(key.cat)}, {"tok", key.token}, {"n", n}});
    return {{"kind", statement_kind_name(fv.kind)}, {"features", std::move(features)}};
}

}  // namespace qwa
