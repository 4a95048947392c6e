#include "metam/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "metam/errors.hpp"
#include "metam/parallel.hpp"

namespace metam {

namespace {

constexpr std::size_t kHashBuckets = 1024;

ProfileKind kind_from_name(const std::string& raw) {
    const std::string n = to_lower(trim(raw));
    if (n == "correlation" || n == "corr") return ProfileKind::Correlation;
    if (n == "mutual_info" || n == "mi") return ProfileKind::MutualInfo;
    if (n == "semantic") return ProfileKind::Semantic;
    if (n == "metadata") return ProfileKind::Metadata;
    if (n == "overlap") return ProfileKind::Overlap;
    if (n.rfind("noise", 0) == 0) return ProfileKind::Noise;
    throw ConfigError("unknown profile: " + raw);
}

// finite value or NaN; categorical values label-encoded by first appearance
std::vector<double> encode_column(const Column& col) {
    std::vector<double> out(col.values.size(), std::nan(""));
    if (col.dtype == Dtype::Numeric) {
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            if (!col.values[i]) continue;
            if (auto v = parse_real(*col.values[i])) out[i] = *v;
        }
        return out;
    }
    std::unordered_map<std::string, double> codes;
    for (std::size_t i = 0; i < col.values.size(); ++i) {
        if (!col.values[i]) continue;
        auto [it, inserted] = codes.emplace(*col.values[i], static_cast<double>(codes.size()));
        out[i] = it->second;
    }
    return out;
}

// equal-width bin index per row, or -1 for missing; categorical uses categories
std::vector<int> discretize(const Column& col, int bins) {
    std::vector<int> out(col.values.size(), -1);
    if (col.dtype == Dtype::Numeric) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        auto enc = encode_column(col);
        for (double v : enc) {
            if (std::isnan(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) {
            for (std::size_t i = 0; i < enc.size(); ++i) {
                if (!std::isnan(enc[i])) out[i] = 0;
            }
            return out;
        }
        const double w = (hi - lo) / bins;
        for (std::size_t i = 0; i < enc.size(); ++i) {
            if (std::isnan(enc[i])) continue;
            int b = static_cast<int>((enc[i] - lo) / w);
            out[i] = std::clamp(b, 0, bins - 1);
        }
        return out;
    }
    std::unordered_map<std::string, int> codes;
    for (std::size_t i = 0; i < col.values.size(); ++i) {
        if (!col.values[i]) continue;
        auto [it, inserted] = codes.emplace(*col.values[i], static_cast<int>(codes.size()));
        out[i] = it->second;
    }
    return out;
}

double clamp01(double v) {
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, 0.0, 1.0);
}

std::vector<double> hashed_embedding(const std::vector<std::string>& tokens) {
    std::vector<double> v(kHashBuckets, 0.0);
    for (const auto& tok : tokens) {
        const std::uint64_t h = splitmix64(fnv1a64(tok));
        const std::size_t bucket = h % kHashBuckets;
        const double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        v[bucket] += sign;
    }
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::string> sampled_table_tokens(const Table& t, std::size_t sample_size,
                                              std::uint64_t seed) {
    std::vector<std::string> tokens;
    for (const auto& col : t.columns) {
        if (col.name) {
            for (auto& tok : tokenize_alnum(*col.name)) tokens.push_back(std::move(tok));
        }
    }
    std::vector<std::size_t> rows(t.row_count);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    if (rows.size() > sample_size) {
        Rng rng(splitmix64(seed ^ fnv1a64(t.id)));
        rng.shuffle(rows);
        rows.resize(sample_size);
        std::sort(rows.begin(), rows.end());
    }
    for (const auto& col : t.columns) {
        for (auto r : rows) {
            if (!col.values[r]) continue;
            for (auto& tok : tokenize_alnum(*col.values[r])) tokens.push_back(std::move(tok));
        }
    }
    return tokens;
}

}  // namespace

ProfileRegistry ProfileRegistry::default_set() {
    ProfileRegistry r;
    r.profiles = {{"correlation", ProfileKind::Correlation},
                  {"mutual_info", ProfileKind::MutualInfo},
                  {"semantic", ProfileKind::Semantic},
                  {"metadata", ProfileKind::Metadata},
                  {"overlap", ProfileKind::Overlap}};
    return r;
}

ProfileRegistry ProfileRegistry::parse(const std::string& names) {
    ProfileRegistry r;
    std::string cur;
    int noise_n = 0;
    auto flush = [&] {
        auto t = trim(cur);
        if (!t.empty()) {
            const auto kind = kind_from_name(std::string(t));
            std::string name(t);
            if (kind == ProfileKind::Noise) name = "noise" + std::to_string(++noise_n);
            r.profiles.push_back({std::move(name), kind});
        }
        cur.clear();
    };
    for (char c : names) {
        if (c == ',') {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    if (r.profiles.empty()) throw ConfigError("empty profile list");
    std::set<std::string> seen;
    for (const auto& p : r.profiles) {
        if (!seen.insert(p.name).second) throw ConfigError("duplicate profile " + p.name);
    }
    return r;
}

void ProfileRegistry::add_noise_profiles(int count) {
    int next = 1;
    for (const auto& p : profiles) {
        if (p.kind == ProfileKind::Noise) ++next;
    }
    for (int i = 0; i < count; ++i) {
        profiles.push_back({"noise" + std::to_string(next + i), ProfileKind::Noise});
    }
}

std::vector<std::string> ProfileRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) out.push_back(p.name);
    return out;
}

std::uint64_t ProfileRegistry::hash() const {
    std::uint64_t h = fnv1a64("registry");
    for (const auto& p : profiles) h = fnv1a64(p.name, h);
    h = splitmix64(h ^ sample_size);
    return h;
}

double correlation_profile(const Column& aug_col, const Column& target_col) {
    const auto x = encode_column(aug_col);
    const auto y = encode_column(target_col);
    const std::size_t n = std::min(x.size(), y.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(x[i]) || std::isnan(y[i])) continue;
        ++m;
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    if (m < 3) return 0.0;
    const double dm = static_cast<double>(m);
    const double vx = sxx - sx * sx / dm;
    const double vy = syy - sy * sy / dm;
    if (vx <= 0.0 || vy <= 0.0) return 0.0;
    const double cov = sxy - sx * sy / dm;
    return clamp01(std::abs(cov / std::sqrt(vx * vy)));
}

double mutual_info_profile(const Column& aug_col, const Column& target_col, int bins) {
    const auto bx = discretize(aug_col, bins);
    const auto by = discretize(target_col, bins);
    const std::size_t n = std::min(bx.size(), by.size());
    std::unordered_map<long long, double> joint;
    std::unordered_map<int, double> px, py;
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (bx[i] < 0 || by[i] < 0) continue;
        m += 1;
        joint[static_cast<long long>(bx[i]) * 1000003LL + by[i]] += 1;
        px[bx[i]] += 1;
        py[by[i]] += 1;
    }
    if (m < 3) return 0.0;
    double hx = 0, hy = 0, mi = 0;
    for (auto& [k, c] : px) hx -= c / m * std::log(c / m);
    for (auto& [k, c] : py) hy -= c / m * std::log(c / m);
    const double hmin = std::min(hx, hy);
    if (hmin <= 1e-12) return 0.0;
    for (auto& [k, c] : joint) {
        const double pxy = c / m;
        const double marg =
            (px[static_cast<int>(k / 1000003LL)] / m) * (py[static_cast<int>(k % 1000003LL)] / m);
        mi += pxy * std::log(pxy / marg);
    }
    return clamp01(mi / hmin);
}

double hashed_cosine_similarity(const std::vector<std::string>& tokens_a,
                                const std::vector<std::string>& tokens_b) {
    if (tokens_a.empty() || tokens_b.empty()) return 0.5;
    const double c = cosine(hashed_embedding(tokens_a), hashed_embedding(tokens_b));
    return clamp01((c + 1.0) / 2.0);
}

double metadata_profile_tokens(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : a) {
        if (b.count(t)) ++inter;
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::set<std::string> table_name_tokens(const Table& t) {
    std::set<std::string> out;
    for (auto& tok : tokenize_alnum(t.id)) out.insert(tok);
    for (const auto& col : t.columns) {
        if (!col.name) continue;
        for (auto& tok : tokenize_alnum(*col.name)) out.insert(tok);
    }
    return out;
}

ProfileContext::ProfileContext(const Table& d_in, const Repository& repo,
                               ProfileRegistry registry,
                               std::optional<std::string> target_column, std::uint64_t seed)
    : repo_(repo), registry_(std::move(registry)), seed_(seed) {
    // one fixed sample shared by every profile evaluation in this run
    std::vector<std::size_t> rows(d_in.row_count);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    if (rows.size() > registry_.sample_size) {
        Rng rng = Rng(seed).fork(fnv1a64("profile-sample"));
        rng.shuffle(rows);
        rows.resize(registry_.sample_size);
        std::sort(rows.begin(), rows.end());
    }
    sample_.id = d_in.id;
    sample_.row_count = rows.size();
    sample_.columns.reserve(d_in.columns.size());
    for (const auto& col : d_in.columns) {
        Column c;
        c.name = col.name;
        c.dtype = col.dtype;
        c.values.reserve(rows.size());
        for (auto r : rows) c.values.push_back(col.values[r]);
        c.distinct_count = count_distinct(c.values);
        sample_.columns.push_back(std::move(c));
    }

    if (target_column) {
        target_idx_ = sample_.column_index(*target_column);
    }
    if (!target_idx_) {
        target_idx_ = sample_.first_numeric_column();
    }

    din_embedding_ =
        hashed_embedding(sampled_table_tokens(sample_, registry_.sample_size, seed_));
    din_meta_tokens_ = table_name_tokens(d_in);
}

std::optional<std::string> ProfileContext::resolved_target() const {
    if (!target_idx_) return std::nullopt;
    return sample_.columns[*target_idx_].name;
}

void ProfileContext::prepare_table(const std::string& table_id) const {
    if (embeddings_.count(table_id)) return;
    const Table& t = repo_.at(table_id);
    embeddings_[table_id] =
        hashed_embedding(sampled_table_tokens(t, registry_.sample_size, seed_));
    meta_tokens_[table_id] = table_name_tokens(t);
    content_hashes_[table_id] = table_content_hash(t);
}

const std::vector<double>& ProfileContext::embedding_of(const std::string& table_id) const {
    prepare_table(table_id);
    return embeddings_.at(table_id);
}

ProfileVector ProfileContext::compute(const Augmentation& aug) const {
    prepare_table(aug.path.terminal().table);

    const Table joined = materialize(sample_, std::span(&aug, 1), repo_, &join_maps_);
    const Column& added = joined.columns.back();

    ProfileVector out;
    out.values.reserve(registry_.size());
    for (const auto& spec : registry_.profiles) {
        double v = 0.0;
        switch (spec.kind) {
            case ProfileKind::Correlation:
                if (target_idx_) v = correlation_profile(added, sample_.columns[*target_idx_]);
                break;
            case ProfileKind::MutualInfo:
                if (target_idx_) v = mutual_info_profile(added, sample_.columns[*target_idx_]);
                break;
            case ProfileKind::Semantic: {
                // an empty token set hashes to the zero vector; cosine() then
                // returns 0, which lands on the neutral midpoint below
                const double c = cosine(din_embedding_, embedding_of(aug.path.terminal().table));
                v = (c + 1.0) / 2.0;
                break;
            }
            case ProfileKind::Metadata:
                v = metadata_profile_tokens(meta_tokens_.at(aug.path.terminal().table),
                                            din_meta_tokens_);
                break;
            case ProfileKind::Overlap: {
                std::size_t hit = 0;
                for (const auto& c : added.values) {
                    if (c.has_value()) ++hit;
                }
                v = added.values.empty()
                        ? 0.0
                        : static_cast<double>(hit) / static_cast<double>(added.values.size());
                break;
            }
            case ProfileKind::Noise:
                v = hash01(fnv1a64(spec.name) ^
                           content_hashes_.at(aug.path.terminal().table) ^ splitmix64(seed_));
                break;
        }
        out.values.push_back(clamp01(v));
    }
    return out;
}

std::vector<ProfileVector> ProfileContext::compute_batch(std::span<const Augmentation> augs,
                                                         bool parallel) const {
    // serial prepass builds every shared structure so the parallel loop only reads
    for (const auto& aug : augs) {
        prepare_table(aug.path.terminal().table);
        for (const auto& e : aug.path.edges) join_maps_.get(repo_, e.right);
    }
    std::vector<ProfileVector> out(augs.size());
    parallel_for(augs.size(), parallel, [&](std::size_t i) { out[i] = compute(augs[i]); });
    return out;
}

ProfileVector compute_profiles(const Augmentation& aug, const Table& d_in,
                               const Repository& repo, const ProfileRegistry& registry,
                               std::uint64_t seed, std::optional<std::string> target_column) {
    ProfileContext ctx(d_in, repo, registry, std::move(target_column), seed);
    return ctx.compute(aug);
}

}  // namespace metam
