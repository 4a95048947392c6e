#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace metam {

// A cell is either a value or missing. Empty source fields load as missing.
using Cell = std::optional<std::string>;

enum class Dtype { Numeric, Categorical, Text };

std::string dtype_name(Dtype d);

struct Column {
    std::optional<std::string> name;  // absent models missing header values
    Dtype dtype = Dtype::Text;
    std::vector<Cell> values;
    std::size_t distinct_count = 0;

    std::size_t null_count() const;
};

struct Table {
    std::string id;  // relative file path, unique within a repository
    std::vector<Column> columns;
    std::size_t row_count = 0;

    std::optional<std::size_t> column_index(std::string_view name) const;
    std::optional<std::size_t> first_numeric_column() const;
};

// --- numeric cells ---------------------------------------------------------

// Parses a trimmed decimal/scientific literal; rejects NaN/inf and trailing junk.
std::optional<double> parse_real(std::string_view s);

// Round-trip-stable formatting used everywhere a double lands in a cell or file.
std::string format_real(double v);

// ≥95% of non-null cells numeric -> Numeric; distinct ≤ max(20, 5% of non-null)
// -> Categorical; otherwise Text. All-null -> Text.
Dtype infer_dtype(const std::vector<Cell>& cells);

std::size_t count_distinct(const std::vector<Cell>& cells);

// --- strings ----------------------------------------------------------------

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// lowercase + trim, the normalization used for join keys and containment
std::string normalize_value(std::string_view s);

// lowercased alphanumeric runs
std::vector<std::string> tokenize_alnum(std::string_view s);

// --- hashing ----------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

// deterministic uniform value in [0,1) from a hash
double hash01(std::uint64_t h);

std::uint64_t table_content_hash(const Table& t);

// --- seeded randomness ------------------------------------------------------

// All randomness flows through this wrapper. The engine is std::mt19937_64
// (sequence pinned by the standard); every distribution transform is
// hand-rolled so runs are bit-reproducible across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform01();                         // [0, 1)
    std::size_t uniform_index(std::size_t n);   // [0, n), n > 0
    double normal();                            // standard normal, Box-Muller
    double gamma(double shape);                 // shape >= 1, Marsaglia-Tsang
    double beta(double a, double b);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

    // independent stream derived from this seed; does not advance this rng
    Rng fork(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;  // raw output sequence is pinned by the standard
};

}  // namespace metam
