#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "metam/core.hpp"
#include "metam/repository.hpp"

namespace metam {

struct ColumnRef {
    std::string table;
    std::size_t column = 0;

    bool operator==(const ColumnRef&) const = default;
};

struct JoinEdge {
    ColumnRef left;
    ColumnRef right;
    double containment = 0.0;  // |left ∩ right| / |left|, at creation >= threshold
};

// chain of joins starting at the input table
struct JoinPath {
    std::vector<JoinEdge> edges;

    const ColumnRef& terminal() const { return edges.back().right; }
};

struct Augmentation {
    JoinPath path;
    std::size_t column_index = 0;  // projected column of the terminal table
    std::string id;                // path + column, stable across runs
};

std::string make_aug_id(const JoinPath& path, std::size_t column_index);

// Bottom-k min-hash sketches over normalized distinct values of every
// categorical/text column with at least 2 distinct values. Small columns
// additionally keep the exact value set so containment is exact for them.
class JoinIndex {
public:
    struct Sketch {
        ColumnRef ref;
        std::size_t distinct = 0;
        std::vector<std::uint64_t> signature;
        std::vector<std::string> small_set;  // sorted; empty when above the limit
    };

    static constexpr std::size_t kExactLimit = 512;

    JoinIndex() = default;

    static JoinIndex build(const Repository& repo, std::size_t signature_size = 128,
                           bool parallel = true);

    // sketch for a column outside the repository (the input table)
    Sketch make_sketch(const ColumnRef& ref, const Column& col) const;

    // containment(a -> b); exact when both sides kept their value sets
    static double containment(const Sketch& a, const Sketch& b);

    const std::vector<Sketch>& sketches() const { return sketches_; }
    const std::vector<std::size_t>* sketches_of(const std::string& table) const;
    std::size_t signature_size() const { return signature_size_; }
    std::uint64_t repo_hash() const { return repo_hash_; }

    std::string to_json() const;
    static JoinIndex from_json(const std::string& text);

private:
    std::size_t signature_size_ = 128;
    std::uint64_t repo_hash_ = 0;
    std::vector<Sketch> sketches_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_table_;

    void rebuild_table_map();
};

// exact containment between two raw columns, the reference the sketch is tested against
double exact_containment(const Column& a, const Column& b);

// All augmentations reachable from d_in via join paths of at most max_hops
// whose every edge has containment >= threshold; one augmentation per non-key
// column of the terminal table, sorted by id. Empty result is the NoCandidates
// signal, handled by the caller.
std::vector<Augmentation> generate_candidates(const Table& d_in, const JoinIndex& index,
                                              const Repository& repo, double threshold,
                                              int max_hops);

// memoized hash maps from normalized key value to row indices
class JoinMapCache {
public:
    using Map = std::unordered_map<std::string, std::vector<std::size_t>>;
    const Map& get(const Repository& repo, const ColumnRef& ref);

private:
    std::map<std::pair<std::string, std::size_t>, Map> maps_;
};

// Left join preserving base row order and count. One-to-many matches aggregate
// per base row: numeric -> mean, categorical/text -> mode with lexicographic
// tie-break. Unmatched rows get nulls. Appends one column per augmentation,
// named by its id.
Table materialize(const Table& base, std::span<const Augmentation> augs,
                  const Repository& repo, JoinMapCache* cache = nullptr);

}  // namespace metam
