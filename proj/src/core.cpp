#include "metam/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace metam {

std::string dtype_name(Dtype d) {
    switch (d) {
        case Dtype::Numeric: return "numeric";
        case Dtype::Categorical: return "categorical";
        case Dtype::Text: return "text";
    }
    return "text";
}

std::size_t Column::null_count() const {
    std::size_t n = 0;
    for (const auto& c : values) {
        if (!c.has_value()) ++n;
    }
    return n;
}

std::optional<std::size_t> Table::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name && *columns[i].name == name) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> Table::first_numeric_column() const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].dtype == Dtype::Numeric) return i;
    }
    return std::nullopt;
}

std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;  // from_chars rejects a leading plus
    auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_real(double v) {
    if (v == static_cast<double>(static_cast<long long>(v)) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // shortest representation that still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(shorter, "%lf", &back);
        if (back == v) return shorter;
    }
    return buf;
}

std::size_t count_distinct(const std::vector<Cell>& cells) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(cells.size());
    for (const auto& c : cells) {
        if (c.has_value()) seen.insert(*c);
    }
    return seen.size();
}

Dtype infer_dtype(const std::vector<Cell>& cells) {
    std::size_t non_null = 0;
    std::size_t numeric = 0;
    for (const auto& c : cells) {
        if (!c.has_value()) continue;
        ++non_null;
        if (parse_real(*c).has_value()) ++numeric;
    }
    if (non_null == 0) return Dtype::Text;
    if (static_cast<double>(numeric) >= 0.95 * static_cast<double>(non_null)) {
        return Dtype::Numeric;
    }
    const std::size_t distinct = count_distinct(cells);
    const auto cap = std::max<std::size_t>(
        20, static_cast<std::size_t>(0.05 * static_cast<double>(non_null)));
    if (distinct <= cap) return Dtype::Categorical;
    return Dtype::Text;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string normalize_value(std::string_view s) {
    return to_lower(trim(s));
}

std::vector<std::string> tokenize_alnum(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double hash01(std::uint64_t h) {
    return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

std::uint64_t table_content_hash(const Table& t) {
    std::uint64_t h = fnv1a64("table");
    for (const auto& col : t.columns) {
        h = fnv1a64(col.name.value_or("\x01"), h);
        h = fnv1a64("|", h);
        for (const auto& cell : col.values) {
            h = fnv1a64(cell.has_value() ? std::string_view(*cell) : std::string_view("\x02"), h);
            h = fnv1a64(";", h);
        }
    }
    return h;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

std::uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

double Rng::normal() {
    double u1;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

double Rng::gamma(double shape) {
    // Marsaglia-Tsang; callers only need shape >= 1
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
}

Rng Rng::fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream)));
}

}  // namespace metam
