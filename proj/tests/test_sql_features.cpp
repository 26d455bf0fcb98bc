#include <catch2/catch_amalgamated.hpp>

#include "qwa/rng.hpp"
#include "qwa/sql_features.hpp"

using namespace qwa;

namespace {

FeatureVector fv(std::string_view sql, const ExtractOptions& opts = {}) {
    return extract_features(sql, opts);
}

std::int64_t count_of(const FeatureVector& v, Category cat, std::string_view tok) {
    const auto it = v.counts.find({cat, std::string(tok)});
    return it == v.counts.end() ? 0 : it->second;
}

}  // namespace

TEST_CASE("golden: multi-table select with join, selection, group and order") {
    const auto v = fv(
        "SELECT p.name, COUNT(g.played) FROM player p, game g "
        "WHERE p.id = g.playerid AND p.age > 30 GROUP BY u.name ORDER BY u.name");
    REQUIRE(v.kind == StatementKind::Select);
    const std::map<FeatureKey, std::int64_t> expected = {
        {{Category::Projection, "player.name"}, 1},
        {{Category::Projection, "game.played"}, 1},
        {{Category::Join, "player.id"}, 1},
        {{Category::Join, "game.playerid"}, 1},
        {{Category::Selection, "player.age"}, 1},
        {{Category::Constant, "30"}, 1},
        {{Category::GroupBy, "u.name"}, 1},
        {{Category::OrderBy, "u.name"}, 1},
    };
    REQUIRE(v.counts == expected);
}

TEST_CASE("golden: insert with column list, literal and placeholder") {
    const auto v = fv("INSERT INTO t (a,b) VALUES (1,?)");
    REQUIRE(v.kind == StatementKind::Insert);
    const std::map<FeatureKey, std::int64_t> expected = {
        {{Category::Projection, "t.a"}, 1},
        {{Category::Projection, "t.b"}, 1},
        {{Category::Constant, "1"}, 1},
        {{Category::Parameter, "?"}, 1},
    };
    REQUIRE(v.counts == expected);
}

TEST_CASE("golden: star projection qualified by the sole table") {
    const auto v = fv("SELECT * FROM contact");
    REQUIRE(v.kind == StatementKind::Select);
    const std::map<FeatureKey, std::int64_t> expected = {{{Category::Projection, "contact.*"}, 1}};
    REQUIRE(v.counts == expected);
}

TEST_CASE("kind coverage: the four basic statement shapes parse non-empty") {
    const auto ins = fv("INSERT INTO tbl (column1, column2) VALUES (1, 'two')");
    REQUIRE(ins.kind == StatementKind::Insert);
    REQUIRE(ins.total() >= 1);

    const auto upd = fv("UPDATE tbl SET column1 = 5 WHERE column2 = 'x'");
    REQUIRE(upd.kind == StatementKind::Update);
    REQUIRE(count_of(upd, Category::Projection, "tbl.column1") == 1);
    REQUIRE(count_of(upd, Category::Selection, "tbl.column2") == 1);
    REQUIRE(count_of(upd, Category::Constant, "5") == 1);
    REQUIRE(count_of(upd, Category::Constant, "x") == 1);

    const auto del = fv("DELETE FROM tbl WHERE column1 = 10");
    REQUIRE(del.kind == StatementKind::Delete);
    REQUIRE(count_of(del, Category::Selection, "tbl.column1") == 1);
    REQUIRE(count_of(del, Category::Constant, "10") == 1);

    const auto sel = fv(
        "SELECT column1, column2 FROM table1, table2 "
        "WHERE table1.column1 = table2.column3 ORDER BY column1 GROUP BY column1 LIMIT 3");
    REQUIRE(sel.kind == StatementKind::Select);
    REQUIRE(count_of(sel, Category::Join, "table1.column1") == 1);
    REQUIRE(count_of(sel, Category::Join, "table2.column3") == 1);
    REQUIRE(count_of(sel, Category::Constant, "3") == 1);
    REQUIRE(sel.total() >= 1);
}

TEST_CASE("canonicalize resolves aliases, qualifies bare columns, keeps unknowns") {
    AliasMap two;
    two.alias_to_table = {{"p", "player"}, {"g", "game"}, {"player", "player"}, {"game", "game"}};
    two.tables = {"player", "game"};
    CHECK(canonicalize("P.Name", two) == "player.name");
    CHECK(canonicalize("u.name", two) == "u.name");
    CHECK(canonicalize("age", two) == "age");

    AliasMap one;
    one.alias_to_table = {{"player", "player"}};
    one.tables = {"player"};
    CHECK(canonicalize("age", one) == "player.age");
    CHECK(canonicalize("db.player.age", one) == "player.age");
}

TEST_CASE("predicate classification") {
    SECTION("column against placeholder") {
        const auto v = fv("SELECT a FROM t WHERE b = ?");
        CHECK(count_of(v, Category::Selection, "t.b") == 1);
        CHECK(count_of(v, Category::Parameter, "?") == 1);
    }
    SECTION("named placeholders normalize to ?") {
        const auto v = fv("SELECT a FROM t WHERE b = :b AND c = @c AND d = $d");
        CHECK(count_of(v, Category::Parameter, "?") == 3);
    }
    SECTION("function-wrapped column stays a selection") {
        const auto v = fv("SELECT a FROM t WHERE upper(name) = 'X'");
        CHECK(count_of(v, Category::Selection, "t.name") == 1);
        CHECK(count_of(v, Category::Constant, "x") == 1);
    }
    SECTION("LIKE with string constant") {
        const auto v = fv("SELECT * FROM contact WHERE name LIKE 'A%'");
        CHECK(count_of(v, Category::Selection, "contact.name") == 1);
        CHECK(count_of(v, Category::Constant, "a%") == 1);
    }
    SECTION("IN list") {
        const auto v = fv("SELECT a FROM t WHERE b IN (1, 2, ?)");
        CHECK(count_of(v, Category::Selection, "t.b") == 1);
        CHECK(count_of(v, Category::Constant, "1") == 1);
        CHECK(count_of(v, Category::Constant, "2") == 1);
        CHECK(count_of(v, Category::Parameter, "?") == 1);
    }
    SECTION("BETWEEN") {
        const auto v = fv("SELECT a FROM t WHERE b BETWEEN 1 AND 5");
        CHECK(count_of(v, Category::Selection, "t.b") == 1);
        CHECK(count_of(v, Category::Constant, "1") == 1);
        CHECK(count_of(v, Category::Constant, "5") == 1);
    }
    SECTION("IS NULL is a selection without a constant") {
        const auto v = fv("SELECT a FROM t WHERE b IS NOT NULL");
        CHECK(count_of(v, Category::Selection, "t.b") == 1);
        CHECK(v.counts.size() == 2);  // projection t.a + selection t.b
    }
    SECTION("negative numeric literal keeps its sign") {
        const auto v = fv("SELECT a FROM t WHERE b < -5");
        CHECK(count_of(v, Category::Constant, "-5") == 1);
    }
    SECTION("column-to-column comparison through arithmetic is a join") {
        const auto v = fv("SELECT a FROM t, s WHERE t.x + 1 = s.y");
        CHECK(count_of(v, Category::Join, "t.x") == 1);
        CHECK(count_of(v, Category::Join, "s.y") == 1);
        CHECK(count_of(v, Category::Constant, "1") == 1);
    }
}

TEST_CASE("join syntax variants") {
    SECTION("explicit JOIN ... ON") {
        const auto v = fv("SELECT a.x FROM a JOIN b ON a.id = b.aid WHERE b.flag = 1");
        CHECK(count_of(v, Category::Join, "a.id") == 1);
        CHECK(count_of(v, Category::Join, "b.aid") == 1);
        CHECK(count_of(v, Category::Selection, "b.flag") == 1);
    }
    SECTION("LEFT JOIN ... USING") {
        const auto v = fv("SELECT x FROM a LEFT JOIN b USING (id)");
        CHECK(count_of(v, Category::Join, "a.id") == 1);
        CHECK(count_of(v, Category::Join, "b.id") == 1);
    }
}

TEST_CASE("subqueries contribute to the same vector") {
    const auto v = fv(
        "SELECT a FROM t WHERE b IN (SELECT c FROM s WHERE s.d = 7)");
    CHECK(count_of(v, Category::Projection, "t.a") == 1);
    CHECK(count_of(v, Category::Selection, "t.b") == 1);
    CHECK(count_of(v, Category::Projection, "s.c") == 1);
    CHECK(count_of(v, Category::Selection, "s.d") == 1);
    CHECK(count_of(v, Category::Constant, "7") == 1);
}

TEST_CASE("update set right-hand side references") {
    const auto v = fv("UPDATE t SET a = b + 1, c = ? WHERE d = 'k'");
    CHECK(count_of(v, Category::Projection, "t.a") == 1);
    CHECK(count_of(v, Category::Projection, "t.c") == 1);
    CHECK(count_of(v, Category::Selection, "t.b") == 1);
    CHECK(count_of(v, Category::Constant, "1") == 1);
    CHECK(count_of(v, Category::Parameter, "?") == 1);
    CHECK(count_of(v, Category::Selection, "t.d") == 1);
    CHECK(count_of(v, Category::Constant, "k") == 1);
}

TEST_CASE("multi-row insert and insert-select") {
    const auto v = fv("INSERT INTO t (a) VALUES (1), (2)");
    CHECK(count_of(v, Category::Projection, "t.a") == 1);
    CHECK(count_of(v, Category::Constant, "1") == 1);
    CHECK(count_of(v, Category::Constant, "2") == 1);

    const auto w = fv("INSERT INTO t (a) SELECT x FROM s");
    CHECK(count_of(w, Category::Projection, "t.a") == 1);
    CHECK(count_of(w, Category::Projection, "s.x") == 1);
}

TEST_CASE("statements with no clause features still count once") {
    const auto v = fv("DELETE FROM t");
    REQUIRE(v.kind == StatementKind::Delete);
    REQUIRE(v.total() == 1);
    CHECK(count_of(v, Category::StatementKind, "delete") == 1);
}

TEST_CASE("parse errors on non-DML and malformed statements") {
    CHECK_THROWS_AS(extract_features("PRAGMA user_version"), ParseError);
    CHECK_THROWS_AS(extract_features("CREATE TABLE t (a int)"), ParseError);
    CHECK_THROWS_AS(extract_features("SELECT FROM WHERE"), ParseError);
    CHECK_THROWS_AS(extract_features("SELECT a FROM t WHERE name LIKE \"A"), ParseError);
    CHECK_THROWS_AS(extract_features("SELECT a FROM t extra garbage ,"), ParseError);
}

TEST_CASE("pathological nesting is rejected, not crashed on") {
    std::string sql = "SELECT a FROM t WHERE x = ";
    for (int i = 0; i < 100000; ++i) sql += "(1 + ";
    sql += "1";
    for (int i = 0; i < 100000; ++i) sql += ")";
    CHECK_THROWS_AS(extract_features(sql), ParseError);

    // moderate nesting stays fine
    std::string ok = "SELECT a FROM t WHERE x = ";
    for (int i = 0; i < 50; ++i) ok += "(1 + ";
    ok += "1";
    for (int i = 0; i < 50; ++i) ok += ")";
    CHECK_NOTHROW(extract_features(ok));
}

TEST_CASE("extraction options") {
    SECTION("from_table category") {
        ExtractOptions o;
        o.from_table_category = true;
        const auto v = fv("SELECT a FROM t JOIN s ON t.x = s.y", o);
        CHECK(count_of(v, Category::FromTable, "t") == 1);
        CHECK(count_of(v, Category::FromTable, "s") == 1);
    }
    SECTION("statement kind feature") {
        ExtractOptions o;
        o.statement_kind_feature = true;
        const auto v = fv("SELECT a FROM t", o);
        CHECK(count_of(v, Category::StatementKind, "select") == 1);
    }
    SECTION("constant type buckets") {
        ExtractOptions o;
        o.bucket_constants = true;
        const auto v = fv("SELECT a FROM t WHERE b = 5 AND c = 'x'", o);
        CHECK(count_of(v, Category::Constant, "<num>") == 1);
        CHECK(count_of(v, Category::Constant, "<str>") == 1);
    }
}

TEST_CASE("determinism: equal text yields equal vectors") {
    const std::string sql = "SELECT a, b FROM t WHERE c = 1 AND d LIKE 'p%' ORDER BY a";
    const auto v1 = fv(sql);
    const auto v2 = fv(sql);
    REQUIRE(v1.counts == v2.counts);
    REQUIRE(v1.kind == v2.kind);
}

TEST_CASE("property: join symmetry for column-column predicates") {
    Rng rng(1234);
    for (int trial = 0; trial < 50; ++trial) {
        const int i = static_cast<int>(rng.uniform_int(0, 9));
        const int j = static_cast<int>(rng.uniform_int(0, 9));
        const std::string sql = "SELECT z FROM a, b WHERE a.c" + std::to_string(i) +
                                " = b.c" + std::to_string(j);
        const auto v = fv(sql);
        CHECK(count_of(v, Category::Join, "a.c" + std::to_string(i)) >= 1);
        CHECK(count_of(v, Category::Join, "b.c" + std::to_string(j)) >= 1);
        std::int64_t join_total = 0;
        for (const auto& [k, n] : v.counts)
            if (k.cat == Category::Join) join_total += n;
        CHECK(join_total == 2);
    }
}

TEST_CASE("property: conjunct concatenation adds feature multisets") {
    Rng rng(77);
    auto random_conjunct = [&](std::string& sql) {
        const int col = static_cast<int>(rng.uniform_int(0, 5));
        const int lit = static_cast<int>(rng.uniform_int(0, 100));
        sql += "c" + std::to_string(col) + " > " + std::to_string(lit);
    };
    for (int trial = 0; trial < 30; ++trial) {
        std::string a = "SELECT x FROM t WHERE ";
        std::string b = "SELECT x FROM t WHERE ";
        random_conjunct(a);
        random_conjunct(b);
        const std::string both =
            a + " AND " + b.substr(std::string("SELECT x FROM t WHERE ").size());
        auto va = fv(a);
        auto vb = fv(b);
        const auto vboth = fv(both);

        std::map<FeatureKey, std::int64_t> merged = va.counts;
        for (const auto& [k, n] : vb.counts) merged[k] += n;
        merged[{Category::Projection, "t.x"}] -= 1;  // shared projection counted once
        REQUIRE(vboth.counts == merged);
    }
}
