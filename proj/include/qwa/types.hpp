#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qwa {

// One timestamped SQL statement attributed to a (user, app) pair.
struct QueryEvent {
    std::int64_t ts = 0;  // seconds since epoch, UTC
    std::string user;
    std::string app;
    std::string sql;

    friend bool operator==(const QueryEvent&, const QueryEvent&) = default;
};

// Clause category a token was harvested from. FromTable and StatementKind
// are opt-in experimental categories (see ExtractOptions); the default
// scheme uses the first seven.
enum class Category : std::uint8_t {
    Projection,
    Selection,
    Join,
    GroupBy,
    OrderBy,
    Constant,
    Parameter,
    FromTable,
    StatementKind,
};

inline std::string_view category_name(Category c) {
    switch (c) {
        case Category::Projection: return "projection";
        case Category::Selection: return "selection";
        case Category::Join: return "join";
        case Category::GroupBy: return "groupby";
        case Category::OrderBy: return "orderby";
        case Category::Constant: return "constant";
        case Category::Parameter: return "parameter";
        case Category::FromTable: return "from_table";
        case Category::StatementKind: return "statement";
    }
    return "?";
}

// Returns true and sets `out` when `name` is a known category name.
inline bool category_from_name(std::string_view name, Category& out) {
    for (auto c : {Category::Projection, Category::Selection, Category::Join,
                   Category::GroupBy, Category::OrderBy, Category::Constant,
                   Category::Parameter, Category::FromTable, Category::StatementKind}) {
        if (category_name(c) == name) {
            out = c;
            return true;
        }
    }
    return false;
}

// A (category, canonical token) pair. Tokens are lowercase; attribute tokens
// are alias-resolved to table.column where possible.
struct FeatureKey {
    Category cat = Category::Projection;
    std::string token;

    friend auto operator<=>(const FeatureKey&, const FeatureKey&) = default;
};

struct FeatureKeyHash {
    std::size_t operator()(const FeatureKey& k) const noexcept {
        std::size_t h = std::hash<std::string>{}(k.token);
        return h ^ (static_cast<std::size_t>(k.cat) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
    }
};

enum class StatementKind : std::uint8_t { Select, Insert, Update, Delete };

inline std::string_view statement_kind_name(StatementKind k) {
    switch (k) {
        case StatementKind::Select: return "select";
        case StatementKind::Insert: return "insert";
        case StatementKind::Update: return "update";
        case StatementKind::Delete: return "delete";
    }
    return "?";
}

// Sparse count vector for one query. Absent keys are zero; present counts
// are >= 1. Ordered map keeps iteration deterministic.
struct FeatureVector {
    StatementKind kind = StatementKind::Select;
    std::map<FeatureKey, std::int64_t> counts;

    std::int64_t total() const {
        std::int64_t t = 0;
        for (const auto& [k, n] : counts) t += n;
        return t;
    }
};

// Probability distribution over feature keys, sorted by key, entries unique.
using Distribution = std::vector<std::pair<FeatureKey, double>>;

// Error taxonomy. Data-level problems (a malformed log line, a statement the
// extractor cannot handle) are reported by value where the contract says so;
// these exceptions cover contract violations and unusable inputs.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyProfile : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyDistribution : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientHistory : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateTime : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CorruptProfile : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyPayload : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qwa
