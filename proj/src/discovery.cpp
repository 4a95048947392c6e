#include "metam/discovery.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "metam/errors.hpp"
#include "metam/parallel.hpp"

namespace metam {

std::string make_aug_id(const JoinPath& path, std::size_t column_index) {
    std::string id;
    for (const auto& e : path.edges) {
        if (!id.empty()) id += ';';
        id += e.left.table + "[" + std::to_string(e.left.column) + "]>" + e.right.table +
              "[" + std::to_string(e.right.column) + "]";
    }
    id += "#" + std::to_string(column_index);
    return id;
}

namespace {

bool indexable(const Column& col) {
    return (col.dtype == Dtype::Categorical || col.dtype == Dtype::Text) &&
           col.distinct_count >= 2;
}

std::vector<std::string> normalized_distinct(const Column& col) {
    std::unordered_set<std::string> seen;
    seen.reserve(col.distinct_count * 2);
    for (const auto& c : col.values) {
        if (c.has_value()) seen.insert(normalize_value(*c));
    }
    std::vector<std::string> out(seen.begin(), seen.end());
    std::sort(out.begin(), out.end());
    return out;
}

// bottom-k sketch: the k smallest distinct hash values, sorted ascending.
// Complete (untruncated) sketches make containment exact.
std::vector<std::uint64_t> kmv_signature(const std::vector<std::string>& values,
                                         std::size_t k) {
    std::vector<std::uint64_t> hashes;
    hashes.reserve(values.size());
    for (const auto& v : values) hashes.push_back(splitmix64(fnv1a64(v)));
    std::sort(hashes.begin(), hashes.end());
    hashes.erase(std::unique(hashes.begin(), hashes.end()), hashes.end());
    if (hashes.size() > k) hashes.resize(k);
    return hashes;
}

}  // namespace

JoinIndex JoinIndex::build(const Repository& repo, std::size_t signature_size,
                           bool parallel) {
    JoinIndex idx;
    idx.signature_size_ = signature_size;
    idx.repo_hash_ = repository_content_hash(repo);

    struct Work {
        ColumnRef ref;
        const Column* col;
    };
    std::vector<Work> work;
    for (const auto& [id, table] : repo.tables) {
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            if (indexable(table.columns[j])) work.push_back({{id, j}, &table.columns[j]});
        }
    }

    idx.sketches_.resize(work.size());
    // duplicate tables are common in open-data corpora; reuse their signatures
    std::unordered_map<std::uint64_t, std::size_t> by_content;
    std::vector<std::uint64_t> content(work.size());
    for (std::size_t i = 0; i < work.size(); ++i) {
        std::uint64_t h = fnv1a64("col");
        for (const auto& c : work[i].col->values) {
            h = fnv1a64(c ? std::string_view(*c) : std::string_view("\x02"), h);
            h = fnv1a64(";", h);
        }
        content[i] = h;
    }
    std::vector<std::size_t> firsts;
    std::vector<std::size_t> owner(work.size());
    for (std::size_t i = 0; i < work.size(); ++i) {
        auto [it, inserted] = by_content.emplace(content[i], i);
        owner[i] = it->second;
        if (inserted) firsts.push_back(i);
    }

    parallel_for(firsts.size(), parallel, [&](std::size_t w) {
        const std::size_t i = firsts[w];
        auto values = normalized_distinct(*work[i].col);
        Sketch s;
        s.distinct = values.size();
        s.signature = kmv_signature(values, signature_size);
        if (values.size() <= kExactLimit) s.small_set = std::move(values);
        idx.sketches_[i] = std::move(s);
    });
    for (std::size_t i = 0; i < work.size(); ++i) {
        if (owner[i] != i) idx.sketches_[i] = idx.sketches_[owner[i]];
        idx.sketches_[i].ref = work[i].ref;
    }
    idx.rebuild_table_map();
    return idx;
}

void JoinIndex::rebuild_table_map() {
    by_table_.clear();
    for (std::size_t i = 0; i < sketches_.size(); ++i) {
        by_table_[sketches_[i].ref.table].push_back(i);
    }
}

JoinIndex::Sketch JoinIndex::make_sketch(const ColumnRef& ref, const Column& col) const {
    Sketch s;
    s.ref = ref;
    auto values = normalized_distinct(col);
    s.distinct = values.size();
    s.signature = kmv_signature(values, signature_size_);
    if (values.size() <= kExactLimit) s.small_set = std::move(values);
    return s;
}

const std::vector<std::size_t>* JoinIndex::sketches_of(const std::string& table) const {
    auto it = by_table_.find(table);
    return it == by_table_.end() ? nullptr : &it->second;
}

double JoinIndex::containment(const Sketch& a, const Sketch& b) {
    if (a.distinct == 0) return 0.0;
    if (!a.small_set.empty() && !b.small_set.empty()) {
        std::size_t inter = 0;
        std::size_t i = 0, j = 0;
        while (i < a.small_set.size() && j < b.small_set.size()) {
            const int cmp = a.small_set[i].compare(b.small_set[j]);
            if (cmp == 0) {
                ++inter;
                ++i;
                ++j;
            } else if (cmp < 0) {
                ++i;
            } else {
                ++j;
            }
        }
        return static_cast<double>(inter) / static_cast<double>(a.distinct);
    }
    // KMV jaccard estimate over the k smallest union hashes, converted to
    // containment via the known distinct counts
    const auto& sa = a.signature;
    const auto& sb = b.signature;
    if (sa.empty() || sb.empty()) return 0.0;
    const std::size_t k = std::max(sa.size(), sb.size());
    std::size_t i = 0, j = 0, taken = 0, common = 0;
    while (taken < k && (i < sa.size() || j < sb.size())) {
        if (i < sa.size() && j < sb.size() && sa[i] == sb[j]) {
            ++common;
            ++i;
            ++j;
        } else if (j >= sb.size() || (i < sa.size() && sa[i] < sb[j])) {
            ++i;
        } else {
            ++j;
        }
        ++taken;
    }
    const double jac = static_cast<double>(common) / static_cast<double>(taken);
    const double inter =
        jac / (1.0 + jac) * static_cast<double>(a.distinct + b.distinct);
    return std::clamp(inter / static_cast<double>(a.distinct), 0.0, 1.0);
}

double exact_containment(const Column& a, const Column& b) {
    auto va = normalized_distinct(a);
    if (va.empty()) return 0.0;
    auto vb = normalized_distinct(b);
    std::unordered_set<std::string> sb(vb.begin(), vb.end());
    std::size_t inter = 0;
    for (const auto& v : va) {
        if (sb.count(v)) ++inter;
    }
    return static_cast<double>(inter) / static_cast<double>(va.size());
}

std::vector<Augmentation> generate_candidates(const Table& d_in, const JoinIndex& index,
                                              const Repository& repo, double threshold,
                                              int max_hops) {
    std::vector<Augmentation> out;
    if (threshold <= 0.0 || threshold > 1.0) {
        throw ConfigError("containment threshold must be in (0,1]");
    }

    struct Frontier {
        JoinPath path;                // empty for d_in itself
        const Table* table;
        std::string table_id;
    };

    std::vector<Frontier> frontier{{JoinPath{}, &d_in, d_in.id}};
    for (int hop = 0; hop < max_hops; ++hop) {
        std::vector<Frontier> next;
        for (const auto& f : frontier) {
            std::set<std::string> visited{d_in.id};
            for (const auto& e : f.path.edges) visited.insert(e.right.table);

            for (std::size_t c = 0; c < f.table->columns.size(); ++c) {
                const auto& col = f.table->columns[c];
                if (!indexable(col)) continue;
                JoinIndex::Sketch left;
                if (f.path.edges.empty()) {
                    left = index.make_sketch({f.table_id, c}, col);
                } else {
                    // terminal tables live in the repository; reuse their sketches
                    const auto* ids = index.sketches_of(f.table_id);
                    const JoinIndex::Sketch* found = nullptr;
                    if (ids) {
                        for (auto i : *ids) {
                            if (index.sketches()[i].ref.column == c) {
                                found = &index.sketches()[i];
                                break;
                            }
                        }
                    }
                    if (!found) continue;
                    left = *found;
                }
                for (const auto& sk : index.sketches()) {
                    if (visited.count(sk.ref.table)) continue;
                    const double cont = JoinIndex::containment(left, sk);
                    if (cont < threshold) continue;
                    Frontier g;
                    g.path = f.path;
                    g.path.edges.push_back({{f.table_id, c}, sk.ref, cont});
                    g.table_id = sk.ref.table;
                    g.table = &repo.at(sk.ref.table);
                    next.push_back(std::move(g));
                }
            }
        }
        for (const auto& g : next) {
            const auto& term = *g.table;
            const std::size_t key_col = g.path.terminal().column;
            for (std::size_t j = 0; j < term.columns.size(); ++j) {
                if (j == key_col) continue;  // join keys add no new information
                Augmentation aug;
                aug.path = g.path;
                aug.column_index = j;
                aug.id = make_aug_id(g.path, j);
                out.push_back(std::move(aug));
            }
        }
        frontier = std::move(next);
    }

    std::sort(out.begin(), out.end(),
              [](const Augmentation& a, const Augmentation& b) { return a.id < b.id; });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Augmentation& a, const Augmentation& b) {
                              return a.id == b.id;
                          }),
              out.end());
    return out;
}

const JoinMapCache::Map& JoinMapCache::get(const Repository& repo, const ColumnRef& ref) {
    const auto key = std::make_pair(ref.table, ref.column);
    auto it = maps_.find(key);
    if (it != maps_.end()) return it->second;

    const Table& t = repo.at(ref.table);
    if (ref.column >= t.columns.size()) {
        throw KeyColumnMissing("column " + std::to_string(ref.column) + " missing in " +
                               ref.table);
    }
    Map m;
    const auto& vals = t.columns[ref.column].values;
    m.reserve(vals.size() * 2);
    for (std::size_t r = 0; r < vals.size(); ++r) {
        if (vals[r].has_value()) m[normalize_value(*vals[r])].push_back(r);
    }
    return maps_.emplace(key, std::move(m)).first->second;
}

namespace {

Cell aggregate_values(const std::vector<const std::string*>& vals, Dtype dtype) {
    if (vals.empty()) return std::nullopt;
    if (dtype == Dtype::Numeric) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto* v : vals) {
            if (auto x = parse_real(*v)) {
                sum += *x;
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return format_real(sum / static_cast<double>(n));
    }
    // mode with lexicographic tie-break
    std::map<std::string_view, std::size_t> counts;
    for (const auto* v : vals) ++counts[*v];
    std::string_view best;
    std::size_t best_n = 0;
    for (const auto& [v, n] : counts) {
        if (n > best_n) {
            best = v;
            best_n = n;
        }
    }
    return std::string(best);
}

}  // namespace

Table materialize(const Table& base, std::span<const Augmentation> augs,
                  const Repository& repo, JoinMapCache* cache) {
    Table out = base;
    if (augs.empty()) return out;

    JoinMapCache local;
    JoinMapCache& maps = cache ? *cache : local;

    for (const auto& aug : augs) {
        if (aug.path.edges.empty()) throw KeyColumnMissing("augmentation with empty path");
        const auto& first = aug.path.edges.front();
        if (first.left.column >= base.columns.size()) {
            throw KeyColumnMissing("join key column " + std::to_string(first.left.column) +
                                   " missing in " + base.id);
        }
        const Table& term = repo.at(aug.path.terminal().table);
        if (aug.column_index >= term.columns.size()) {
            throw KeyColumnMissing("projected column missing in " +
                                   aug.path.terminal().table);
        }
        const auto& proj = term.columns[aug.column_index];

        Column added;
        added.name = aug.id;
        added.dtype = proj.dtype;
        added.values.reserve(base.row_count);

        const auto& key_vals = base.columns[first.left.column].values;
        for (std::size_t r = 0; r < base.row_count; ++r) {
            std::vector<std::size_t> rows;
            if (key_vals[r].has_value()) {
                const auto& m = maps.get(repo, first.right);
                auto hit = m.find(normalize_value(*key_vals[r]));
                if (hit != m.end()) rows = hit->second;
            }
            // walk the remaining edges of the chain
            for (std::size_t e = 1; e < aug.path.edges.size() && !rows.empty(); ++e) {
                const auto& edge = aug.path.edges[e];
                const Table& left_t = repo.at(edge.left.table);
                if (edge.left.column >= left_t.columns.size()) {
                    throw KeyColumnMissing("join key column missing in " + edge.left.table);
                }
                const auto& lvals = left_t.columns[edge.left.column].values;
                const auto& m = maps.get(repo, edge.right);
                std::vector<std::size_t> next;
                std::unordered_set<std::size_t> seen;
                for (auto lr : rows) {
                    if (!lvals[lr].has_value()) continue;
                    auto hit = m.find(normalize_value(*lvals[lr]));
                    if (hit == m.end()) continue;
                    for (auto rr : hit->second) {
                        if (seen.insert(rr).second) next.push_back(rr);
                    }
                }
                rows = std::move(next);
            }
            std::vector<const std::string*> vals;
            vals.reserve(rows.size());
            for (auto rr : rows) {
                if (proj.values[rr].has_value()) vals.push_back(&*proj.values[rr]);
            }
            added.values.push_back(aggregate_values(vals, proj.dtype));
        }
        added.distinct_count = count_distinct(added.values);
        out.columns.push_back(std::move(added));
    }
    return out;
}

std::string JoinIndex::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["signature_size"] = signature_size_;
    j["repo_hash"] = repo_hash_;
    auto& cols = j["columns"];
    cols = nlohmann::json::array();
    for (const auto& s : sketches_) {
        nlohmann::json c;
        c["table"] = s.ref.table;
        c["column"] = s.ref.column;
        c["distinct"] = s.distinct;
        c["signature"] = s.signature;
        if (!s.small_set.empty()) c["values"] = s.small_set;
        cols.push_back(std::move(c));
    }
    return j.dump();
}

JoinIndex JoinIndex::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    if (j.value("version", 0) != 1) throw ConfigError("unsupported index version");
    JoinIndex idx;
    idx.signature_size_ = j.at("signature_size").get<std::size_t>();
    idx.repo_hash_ = j.at("repo_hash").get<std::uint64_t>();
    for (const auto& c : j.at("columns")) {
        Sketch s;
        s.ref.table = c.at("table").get<std::string>();
        s.ref.column = c.at("column").get<std::size_t>();
        s.distinct = c.at("distinct").get<std::size_t>();
        s.signature = c.at("signature").get<std::vector<std::uint64_t>>();
        if (c.contains("values")) s.small_set = c.at("values").get<std::vector<std::string>>();
        idx.sketches_.push_back(std::move(s));
    }
    idx.rebuild_table_map();
    return idx;
}

}  // namespace metam
