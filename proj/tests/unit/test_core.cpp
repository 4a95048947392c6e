#include <doctest.h>

#include <set>

#include "metam/core.hpp"

using namespace metam;

namespace {

std::vector<Cell> cells(std::initializer_list<const char*> vals) {
    std::vector<Cell> out;
    for (const char* v : vals) {
        if (v) {
            out.emplace_back(std::string(v));
        } else {
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("parse_real accepts decimals and rejects junk") {
    CHECK(parse_real("1.5").value() == doctest::Approx(1.5));
    CHECK(parse_real(" -2e3 ").value() == doctest::Approx(-2000.0));
    CHECK(parse_real("+7").value() == doctest::Approx(7.0));
    CHECK_FALSE(parse_real("x").has_value());
    CHECK_FALSE(parse_real("1.5abc").has_value());
    CHECK_FALSE(parse_real("").has_value());
    CHECK_FALSE(parse_real("nan").has_value());
    CHECK_FALSE(parse_real("inf").has_value());
}

TEST_CASE("format_real round-trips") {
    for (double v : {0.0, 1.0, -3.5, 0.1, 1e-9, 123456.789, 2.0 / 3.0}) {
        CHECK(parse_real(format_real(v)).value() == v);
    }
}

TEST_CASE("infer_dtype thresholds") {
    // 95% numeric threshold: 2 numeric + 1 text fails, padding with more numerics passes
    std::vector<Cell> mostly_numeric = cells({"1.5", "2", "x"});
    for (int i = 0; i < 100; ++i) mostly_numeric.emplace_back(std::to_string(i));
    CHECK(infer_dtype(mostly_numeric) == Dtype::Numeric);

    CHECK(infer_dtype(cells({"a", "b", "a", "b"})) == Dtype::Categorical);

    std::vector<Cell> freeform;
    for (int i = 0; i < 1000; ++i) freeform.emplace_back("text-" + std::to_string(i) + "-x");
    CHECK(infer_dtype(freeform) == Dtype::Text);

    CHECK(infer_dtype(cells({nullptr, nullptr})) == Dtype::Text);
}

TEST_CASE("count_distinct ignores nulls") {
    CHECK(count_distinct(cells({"a", "b", "a", nullptr})) == 2);
    CHECK(count_distinct({}) == 0);
}

TEST_CASE("tokenize_alnum lowercases and splits on punctuation") {
    auto toks = tokenize_alnum("Zip-Code_9 (NYC)");
    REQUIRE(toks.size() == 4);
    CHECK(toks[0] == "zip");
    CHECK(toks[1] == "code");
    CHECK(toks[2] == "9");
    CHECK(toks[3] == "nyc");
}

TEST_CASE("rng determinism and fork independence") {
    Rng a(42), b(42);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42);
    Rng f1 = c.fork(1);
    Rng f2 = c.fork(2);
    CHECK(f1.next_u64() != f2.next_u64());
    // forking does not advance the parent
    Rng d(42);
    CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("rng uniform01 range and rough mean") {
    Rng r(7);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("rng beta with larger alpha skews high") {
    Rng r(3);
    int above = 0;
    for (int i = 0; i < 2000; ++i) {
        if (r.beta(4, 1) > 0.5) ++above;
    }
    CHECK(above > 1500);  // Beta(4,1): P(X > 0.5) = 1 - 0.5^4 = 0.9375
}

TEST_CASE("rng normal moments") {
    Rng r(11);
    double s = 0, ss = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        ss += x * x;
    }
    CHECK(s / n == doctest::Approx(0.0).epsilon(0.05));
    CHECK(ss / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("hash01 lands in unit interval and spreads") {
    std::set<int> buckets;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        double v = hash01(i);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        buckets.insert(static_cast<int>(v * 10));
    }
    CHECK(buckets.size() == 10);
}
